from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from core.config import DEFAULT_GATES, unknowns_cap
from core.errors import LabError
from core.experiments import KINDS, Scenario
from core.measures import ellipticity_constant
from utils.logger import get_logger, warn

logger = get_logger("lab.validators")

# kinds that assemble and solve a grid system
SOLVER_KINDS = {"main_estimate", "hopf", "nonlocal_to_local", "barrier", "identity_suite"}


class ScenarioValidator:
    """Checks scenario files before any numerics run"""

    def __init__(self):
        self.required_fields = ("id", "kind", "operator", "domain")

    def validate_scenario_data(self, data: Dict) -> Tuple[bool, str, Dict]:
        """
        Validate a raw scenario object
        Returns: (is_valid, message, statistics)
        """
        try:
            if not isinstance(data, dict) or not data:
                return False, "Empty scenario", {}
            missing = [key for key in self.required_fields if key not in data]
            if missing:
                return False, f"Missing fields: {', '.join(missing)}", {}
            if data["kind"] not in KINDS:
                return False, f"Unknown kind {data['kind']!r}; available: {', '.join(KINDS)}", {}
            unknown_gates = sorted(set(data.get("gates", {})) - set(DEFAULT_GATES))
            if unknown_gates:
                return False, f"Unknown gates: {', '.join(unknown_gates)}", {}
            grid = data.get("grid", {})
            if "h" in grid and not float(grid["h"]) > 0:
                return False, "Grid spacing h must be positive", {}

            scenario = Scenario.from_dict(data)
            result = self._validate_operator(scenario)
            if not result[0]:
                return result[0], result[1], {}

            stats = self._scenario_stats(scenario)
            cap = unknowns_cap(scenario.dimension)
            if scenario.kind in SOLVER_KINDS and stats["estimated_interior"] > cap:
                return False, (f"Grid too fine: about {stats['estimated_interior']} unknowns "
                               f"(cap {cap})"), stats
            return True, f"Valid {scenario.kind} scenario {scenario.id!r}", stats

        except LabError as e:
            return False, f"{type(e).__name__}: {e.message}", {}
        except (KeyError, TypeError, ValueError) as e:
            return False, f"Validation error: {str(e)}", {}

    def _validate_operator(self, scenario: Scenario) -> Tuple[bool, str]:
        for s in scenario.s_list:
            spec = scenario.spec(s)
            if spec.dimension != scenario.dimension:
                return False, "Operator and domain dimensions differ"
            try:
                ellipticity_constant(spec.measure, s)
            except LabError as e:
                if scenario.kind in SOLVER_KINDS or scenario.kind == "distance_estimate":
                    return False, f"Operator is degenerate at s={s:g}: {e.message}"
                warn(logger, f"operator is degenerate at s={s:g}")
        return True, "Operator valid"

    def _scenario_stats(self, scenario: Scenario) -> Dict:
        lo, hi = scenario.domain.bounding_box()
        cells = np.ceil((hi - lo) / scenario.h)
        fill = scenario.domain.volume / float(np.prod(hi - lo))
        return {
            "id": scenario.id,
            "kind": scenario.kind,
            "dimension": scenario.dimension,
            "s_count": len(scenario.s_list),
            "h": scenario.h,
            "estimated_unknowns": int(np.prod(cells)),
            "estimated_interior": int(np.prod(cells) * fill),
            "seed": scenario.seed,
        }

    def validate_suite(self, items: List[Dict]) -> Tuple[bool, str, Dict]:
        """Every scenario valid and ids unique"""
        ids = [item.get("id") for item in items if isinstance(item, dict)]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            return False, f"Duplicate scenario ids: {', '.join(map(str, duplicates))}", {}
        invalid = {}
        for item in items:
            ok, message, _ = self.validate_scenario_data(item)
            if not ok:
                invalid[str(item.get("id") if isinstance(item, dict) else item)] = message
        stats = {"scenarios": len(items), "invalid": invalid}
        if invalid:
            return False, f"{len(invalid)} of {len(items)} scenarios invalid", stats
        return True, f"Valid suite with {len(items)} scenarios", stats

    def validate_report(self, frame: pd.DataFrame) -> Tuple[bool, str, Dict]:
        """Report rows present and no failed rows"""
        if frame is None or frame.empty:
            return False, "Empty report", {}
        errors = int((frame["status"] == "error").sum()) if "status" in frame else 0
        stats = {"rows": len(frame), "columns": len(frame.columns), "error_rows": errors}
        if errors:
            return False, f"{errors} rows failed", stats
        return True, f"Report with {len(frame)} rows", stats
