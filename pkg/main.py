import argparse
import sys
from typing import Dict, List, Optional

from core import __version__
from core.config import LAB_LOG_LEVEL, LAB_OUTPUT_DIR, LAB_THREADS
from core.errors import LabError
from core.experiments import KINDS, Scenario, ScenarioEngine, ScenarioResult
from core.file_handler import ResultFileHandler
from utils.logger import Colors, get_logger, set_level
from utils.validators import ScenarioValidator

logger = get_logger("lab.cli")

# Available commands
COMMANDS = ["run", "suite", "list-kinds", "validate"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_GATE_FAILURE = 2


def _print(color: str, message: str) -> None:
    print(f"{color}{message}{Colors.RESET}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=LAB_OUTPUT_DIR, help="output directory for reports")
    common.add_argument("--threads", type=int, default=LAB_THREADS, help="worker threads (-1 for all cores)")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--quick", action="store_true", help="halve every resolution")
    common.add_argument("--timestamped", action="store_true", help="write into a fresh run_<time> directory")
    common.add_argument("--log-level", default=LAB_LOG_LEVEL, help="DEBUG, INFO, WARNING or ERROR")

    parser = argparse.ArgumentParser(prog="nonlocal-lab", description="Numerical lab for 2s-stable operators")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run one scenario file")
    run.add_argument("scenario")
    suite = sub.add_parser("suite", parents=[common], help="run every scenario in a directory")
    suite.add_argument("directory")
    sub.add_parser("list-kinds", parents=[common], help="list scenario kinds")
    validate = sub.add_parser("validate", parents=[common], help="check a scenario file without running it")
    validate.add_argument("scenario")
    return parser


def prepare(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    """Apply --seed and --quick"""
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    if args.quick:
        scenario = scenario.quick()
    return scenario


def print_result(result: ScenarioResult, paths: Dict[str, str]) -> None:
    for name, passed in result.gates.items():
        mark = f"{Colors.GREEN}✅" if passed else f"{Colors.RED}❌"
        print(f"  {mark} {name}{Colors.RESET}")
    if result.passed:
        _print(Colors.GREEN, f"✅ {result.scenario.id}: all gates passed ({len(result.frame)} rows)")
    else:
        _print(Colors.RED, f"❌ {result.scenario.id}: failed {', '.join(result.failed_gates)}")
    _print(Colors.BLUE, f"📂 {paths['csv']}")


def _load_checked(handler: ResultFileHandler, validator: ScenarioValidator, path: str) -> Optional[Scenario]:
    data = handler.read_scenario_data(path)
    is_valid, message, _ = validator.validate_scenario_data(data)
    if not is_valid:
        _print(Colors.RED, f"❌ ERROR: {path}: {message}")
        return None
    return Scenario.from_dict(data)


def cmd_run(args: argparse.Namespace) -> int:
    handler = ResultFileHandler(args.out, timestamped=args.timestamped)
    scenario = _load_checked(handler, ScenarioValidator(), args.scenario)
    if scenario is None:
        return EXIT_ERROR
    scenario = prepare(scenario, args)
    _print(Colors.BLUE, f"🔍 Running {scenario.id} ({scenario.kind})...")
    result = ScenarioEngine(args.threads).run(scenario)
    paths = handler.save_result(result)
    print_result(result, paths)
    return EXIT_OK if result.passed else EXIT_GATE_FAILURE


def cmd_suite(args: argparse.Namespace) -> int:
    handler = ResultFileHandler(args.out, timestamped=args.timestamped)
    validator = ScenarioValidator()
    files = handler.suite_files(args.directory)
    scenarios: List[Scenario] = []
    for path in files:
        scenario = _load_checked(handler, validator, str(path))
        if scenario is None:
            return EXIT_ERROR
        scenarios.append(prepare(scenario, args))

    _print(Colors.BLUE, f"🔄 Running {len(scenarios)} scenarios...")
    engine = ScenarioEngine(args.threads)
    results = engine.run_suite(scenarios)
    for result in results:
        print_result(result, handler.save_result(result))
    summary = engine.get_run_summary()
    handler.save_summary(summary)
    if summary["failed"]:
        _print(Colors.RED, f"❌ {len(summary['failed'])} of {summary['scenarios']} scenarios failed")
        return EXIT_GATE_FAILURE
    _print(Colors.GREEN, f"✅ All {summary['scenarios']} scenarios passed")
    return EXIT_OK


def cmd_list_kinds(args: argparse.Namespace) -> int:
    for kind in KINDS:
        doc = (getattr(ScenarioEngine, f"run_{kind}").__doc__ or "").strip()
        print(f"{Colors.YELLOW}{kind:<24}{Colors.RESET}{doc}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    handler = ResultFileHandler(args.out)
    data = handler.read_scenario_data(args.scenario)
    is_valid, message, stats = ScenarioValidator().validate_scenario_data(data)
    if not is_valid:
        _print(Colors.RED, f"❌ ERROR: {message}")
        return EXIT_ERROR
    _print(Colors.GREEN, f"✅ {message}")
    for key, value in stats.items():
        print(f"  {key}: {value}")
    return EXIT_OK


HANDLERS = {
    "run": cmd_run,
    "suite": cmd_suite,
    "list-kinds": cmd_list_kinds,
    "validate": cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_level(args.log_level.upper())
    try:
        return HANDLERS[args.command](args)
    except LabError as e:
        _print(Colors.RED, f"❌ ERROR: {type(e).__name__}: {e.message}")
        return EXIT_ERROR
    except Exception as e:
        logger.exception("unexpected failure")
        _print(Colors.RED, f"❌ ERROR: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
