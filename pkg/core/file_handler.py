import hashlib
import io
import json
import os
import time
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from core import __version__
from core.config import LAB_OUTPUT_DIR
from core.errors import InvalidScenario
from core.experiments import Scenario, ScenarioResult
from core.solver import DiscreteSolution
from utils.logger import get_logger, success

logger = get_logger("lab.files")

FLOAT_FORMAT = "%.12e"
VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "joblib")


def generate_filename(base_name: str, extension: str, output_dir: str) -> str:
    """Timestamped path, used only when a run directory is requested"""
    timestamp = time.strftime("%Y%m%d_%H%M%S")
    return os.path.join(output_dir, f"{base_name}_{timestamp}.{extension}")


def package_versions() -> Dict[str, str]:
    versions = {"nonlocal-regularity-lab": __version__}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "missing"
    return versions


def _jsonable(value):
    """Plain JSON types for numpy scalars, arrays and non-finite floats"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    return value


class ResultFileHandler:
    """Reads scenarios and writes report CSVs with their metadata"""

    def __init__(self, output_dir: Optional[str] = None, timestamped: bool = False):
        base = output_dir or LAB_OUTPUT_DIR
        self.output_dir = os.path.join(base, time.strftime("run_%Y%m%d_%H%M%S")) if timestamped else base
        self.allowed_extensions = {"scenario": [".json"], "report": [".csv"]}

    def ensure_output_dir(self) -> str:
        if not os.path.exists(self.output_dir):
            os.makedirs(self.output_dir)
            logger.info(f"created output directory {self.output_dir}")
        return self.output_dir

    # -- scenarios -------------------------------------------------------------

    def read_scenario_data(self, path: Union[str, Path]) -> Dict:
        """Raw scenario JSON; a string domain field names a JSON file next to the scenario"""
        path = Path(path)
        if not path.is_file():
            raise InvalidScenario(f"scenario file {path} does not exist")
        if path.suffix.lower() not in self.allowed_extensions["scenario"]:
            raise InvalidScenario(f"scenario files must be JSON, got {path.suffix!r}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InvalidScenario(f"invalid JSON in {path}: {exc}")
        if not isinstance(data, dict):
            raise InvalidScenario(f"scenario {path} must be a JSON object")
        if isinstance(data.get("domain"), str):
            domain_path = (path.parent / data["domain"]).resolve()
            if not domain_path.is_file():
                raise InvalidScenario(f"domain file {domain_path} does not exist")
            data["domain"] = json.loads(domain_path.read_text())
        return data

    def load_scenario(self, path: Union[str, Path]) -> Scenario:
        return Scenario.from_dict(self.read_scenario_data(path))

    def suite_files(self, directory: Union[str, Path]) -> List[Path]:
        """Scenario JSON files of a directory in name order, metadata files skipped"""
        directory = Path(directory)
        if not directory.is_dir():
            raise InvalidScenario(f"suite directory {directory} does not exist")
        files = sorted(p for p in directory.glob("*.json") if not p.name.endswith(".meta.json"))
        if not files:
            raise InvalidScenario(f"no scenario files in {directory}")
        return files

    def load_suite(self, directory: Union[str, Path]) -> List[Scenario]:
        return [self.load_scenario(p) for p in self.suite_files(directory)]

    # -- reports ------------------------------------------------------------------

    @staticmethod
    def csv_bytes(frame: pd.DataFrame) -> bytes:
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return buffer.getvalue().encode("utf-8")

    def build_metadata(self, result: ScenarioResult, csv_payload: bytes) -> Dict:
        return _jsonable({
            "scenario": result.scenario.to_dict(),
            "versions": package_versions(),
            "rows": len(result.frame),
            "passed": result.passed,
            "gates": result.gates,
            "error_estimates": result.error_estimates(),
            "summary": result.summary,
            "csv_sha256": hashlib.sha256(csv_payload).hexdigest(),
        })

    def save_result(self, result: ScenarioResult) -> Dict[str, str]:
        """Write <id>.csv and <id>.meta.json; returns both paths"""
        self.ensure_output_dir()
        scenario_id = result.scenario.id
        csv_path = os.path.join(self.output_dir, f"{scenario_id}.csv")
        meta_path = os.path.join(self.output_dir, f"{scenario_id}.meta.json")
        payload = self.csv_bytes(result.frame)
        with open(csv_path, "wb") as handle:
            handle.write(payload)
        with open(meta_path, "w") as handle:
            json.dump(self.build_metadata(result, payload), handle, indent=2, sort_keys=True)
            handle.write("\n")
        success(logger, f"report saved: {csv_path} ({len(result.frame)} rows)")
        return {"csv": csv_path, "meta": meta_path}

    def save_solution(self, solution: DiscreteSolution, name: str, stamp: bool = False) -> str:
        """Nodal values with columns x1..xd, value, d_x"""
        self.ensure_output_dir()
        path = generate_filename(name, "csv", self.output_dir) if stamp else os.path.join(self.output_dir, f"{name}.csv")
        with open(path, "wb") as handle:
            handle.write(self.csv_bytes(solution.to_frame()))
        logger.info(f"solution saved: {path}")
        return path

    def save_summary(self, summary: Dict, name: str = "suite_summary") -> str:
        self.ensure_output_dir()
        path = os.path.join(self.output_dir, f"{name}.json")
        with open(path, "w") as handle:
            json.dump(_jsonable(summary), handle, indent=2, sort_keys=True)
            handle.write("\n")
        return path
