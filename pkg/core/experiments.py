"""Scenario engine: every report kind, its rows and its acceptance gates"""
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from core.config import DEFAULT_GATES, KERNEL_NORMALIZATION_TOLERANCE, SUPPORT_THRESHOLD
from core.errors import InvalidScenario, LabError, TailUnknown
from core.fields import (BOUNDED, ScalarField, ball_torsion, barrier, bump, classical_torsion, constant,
                         cos_theta, distance_power, field_from_descriptor, gaussian, optimality_profile,
                         paraboloid_test, radial_extension)
from core.geometry import Ball, Domain, Interval, as_points, domain_from_dict, sample_inside, whitney_cover
from core.measures import (StableOperatorSpec, ellipticity_constant, measure_report, sphere_area, symmetrize,
                           total_mass)
from core.norms import (COAREA, EnergyReport, boundary_L2, decade_classification, exterior_gaps,
                        exterior_L2_tau, gagliardo, l2_distance, l2_norm, mu_energy, transmission_energy,
                        weighted_energy, weighted_L2)
from core.operators import (apply_As, apply_As_many, carre_du_champ, folded_nodes, gauss_green_residual,
                            normal_derivative_values, nu_star, scaling_check, tau_s, translation_check)
from core.quadrature import QuadratureSpec, decade_rule
from core.solver import (DirichletProblem, harmonic_field, poisson_ball_radial, poisson_ball_solve,
                         refinement_study, solve, torsion_function, very_weak_residual)
from utils.logger import failure, get_logger, success, warn
from utils.parallel import ordered_map, resolve_jobs, spawn_rngs

logger = get_logger("lab.experiments")

KINDS = (
    "main_estimate",
    "hopf",
    "normal_derivative_bound",
    "distance_estimate",
    "optimality",
    "nonlocal_to_local",
    "barrier",
    "whitney",
    "identity_suite",
)

K_STEP = 2.0 ** 0.25
A_GRID = (1.25, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0)


@dataclass
class Scenario:
    """One reproducible experiment: operator, domain, data descriptors and resolutions"""

    id: str
    kind: str
    operator: Dict
    domain: Domain
    s_list: List[float] = field(default_factory=lambda: [0.5])
    data: Dict = field(default_factory=dict)
    grid: Dict = field(default_factory=dict)
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    seed: int = 0
    gates: Dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise InvalidScenario("scenario id must be non-empty")
        if self.kind not in KINDS:
            raise InvalidScenario(f"unknown scenario kind {self.kind!r}", {"id": self.id})
        if not self.s_list or any(not 0.0 < float(s) < 1.0 for s in self.s_list):
            raise InvalidScenario("s_list must hold values in (0, 1)", {"id": self.id, "s_list": list(self.s_list)})
        unknown = sorted(set(self.gates) - set(DEFAULT_GATES))
        if unknown:
            raise InvalidScenario("unknown gate names", {"id": self.id, "gates": unknown})
        measure_d = dict(self.operator.get("measure", {})).get("d")
        if measure_d is not None and int(measure_d) != self.domain.dimension:
            raise InvalidScenario("operator and domain dimensions differ",
                                  {"id": self.id, "operator": measure_d, "domain": self.domain.dimension})

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def h(self) -> float:
        return float(self.grid.get("h", 1.0 / 64.0))

    @property
    def cells(self) -> Optional[int]:
        return int(self.grid["cells"]) if "cells" in self.grid else None

    def spec(self, s: float) -> StableOperatorSpec:
        return StableOperatorSpec.from_dict(self.operator, float(s))

    def gate(self, name: str) -> float:
        return self.gates.get(name, DEFAULT_GATES[name])

    def make_field(self, descriptor, s: Optional[float] = None) -> ScalarField:
        return field_from_descriptor(descriptor, self.dimension, s, self.domain)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=int(seed))

    def quick(self) -> "Scenario":
        """Same scenario at half the resolution everywhere"""
        grid = dict(self.grid)
        grid["h"] = 2.0 * self.h
        if "cells" in grid:
            grid["cells"] = max(8, int(grid["cells"]) // 2)
        return replace(self, grid=grid, quadrature=self.quadrature.coarsened())

    def to_dict(self) -> Dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "operator": self.operator,
            "domain": self.domain.to_dict(),
            "s_list": [float(s) for s in self.s_list],
            "data": self.data,
            "grid": self.grid,
            "quadrature": self.quadrature.to_dict(),
            "seed": self.seed,
            "gates": self.gates,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Scenario":
        missing = [key for key in ("id", "kind", "operator", "domain") if key not in data]
        if missing:
            raise InvalidScenario("scenario is missing required fields", {"missing": missing})
        try:
            domain = domain_from_dict(data["domain"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidScenario(f"malformed domain: {exc}", {"domain": data["domain"]})
        return cls(
            id=str(data["id"]),
            kind=str(data["kind"]),
            operator=dict(data["operator"]),
            domain=domain,
            s_list=[float(s) for s in data.get("s_list", [0.5])],
            data=dict(data.get("data", {})),
            grid=dict(data.get("grid", {})),
            quadrature=QuadratureSpec.from_dict(data.get("quadrature")),
            seed=int(data.get("seed", 0)),
            gates=dict(data.get("gates", {})),
        )


@dataclass
class ScenarioResult:
    scenario: Scenario
    frame: pd.DataFrame
    gates: Dict[str, bool] = field(default_factory=dict)
    summary: Dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.gates.values())

    @property
    def failed_gates(self) -> List[str]:
        return [name for name, ok in self.gates.items() if not ok]

    def error_estimates(self) -> Dict[str, float]:
        """Largest value of every error column"""
        out = {}
        for column in self.frame.columns:
            if column.endswith("_error") and pd.api.types.is_numeric_dtype(self.frame[column]):
                values = self.frame[column].dropna()
                out[column] = float(values.max()) if len(values) else float("nan")
        return out


@dataclass
class DistanceEstimateReport:
    """Rows (x, d_x, d_x^(-2s), annulus integral, ratio) for boundary-layer points with d_x <= rho"""

    s: float
    a: float
    rho: float
    rows: pd.DataFrame

    @property
    def fitted_constant(self) -> float:
        ratios = self.rows.loc[self.rows["rhs"] > 0, "ratio"]
        return float(ratios.max()) if len(ratios) else float("nan")

    def to_dict(self) -> Dict:
        return {"s": self.s, "a": self.a, "rho": self.rho, "points": len(self.rows),
                "fitted_constant": self.fitted_constant}


# ---------------------------------------------------------------------------
# row and gate helpers
# ---------------------------------------------------------------------------

def _guarded_rows(base: Dict, compute: Callable[[], List[Dict]]) -> List[Dict]:
    """Rows from compute(); a lab error becomes one annotated row"""
    try:
        rows = compute()
    except LabError as err:
        warn(logger, f"{type(err).__name__}: {err.message}")
        return [{**base, "status": "error", "error": f"{type(err).__name__}: {err.message}"}]
    out = []
    for row in rows:
        merged = {**base, **row}
        merged.setdefault("status", "ok")
        out.append(merged)
    return out


def _guarded(base: Dict, compute: Callable[[], Dict]) -> Dict:
    return _guarded_rows(base, lambda: [compute()])[0]


def _ok(frame: pd.DataFrame) -> pd.DataFrame:
    if "status" not in frame:
        return frame
    return frame[frame["status"] == "ok"]


def _rows_computed(frame: pd.DataFrame) -> bool:
    return bool(len(frame)) and ("status" not in frame or not (frame["status"] == "error").any())


def _spread(values) -> float:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if not len(values) or np.min(values) <= 0:
        return float("nan")
    return float(np.max(values) / np.min(values))


def _stable(values, tolerance: float) -> bool:
    """Every value within the relative tolerance of their mean"""
    values = np.asarray(values, dtype=float)
    if not len(values) or not np.all(np.isfinite(values)):
        return False
    mean = float(np.mean(values))
    return mean > 0 and bool(np.all(np.abs(values / mean - 1.0) <= tolerance))


def _strictly_decreasing(values) -> bool:
    values = np.asarray(values, dtype=float)
    return bool(np.all(np.isfinite(values))) and bool(np.all(np.diff(values) < 0))


def _report(progress_callback, fraction: float) -> None:
    if progress_callback:
        progress_callback(min(1.0, fraction))


def _subsample(points: np.ndarray, count: int) -> np.ndarray:
    step = max(1, len(points) // max(count, 1))
    return points[::step][:count]


def _level_points(domain: Domain, levels, side: str, per_level: int) -> List[np.ndarray]:
    out = []
    for t in levels:
        points, _ = domain.level_set_nodes(float(t), side, max(4 * per_level, 64))
        out.append(_subsample(points, per_level))
    return out


def _is_unit_centered(domain: Domain) -> bool:
    if isinstance(domain, Ball):
        return bool(np.allclose(domain.center, 0.0)) and abs(domain.radius - 1.0) < 1e-12
    if isinstance(domain, Interval):
        return bool(np.allclose(domain.lo, -1.0) and np.allclose(domain.hi, 1.0))
    return False


def _round_ball(domain: Domain):
    """(center, radius) for balls and intervals, None otherwise"""
    if isinstance(domain, Ball):
        return domain.center, domain.radius
    if isinstance(domain, Interval):
        return 0.5 * (domain.lo + domain.hi), float(0.5 * (domain.hi - domain.lo)[0])
    return None


def _ones(points: np.ndarray) -> np.ndarray:
    return np.ones(len(np.atleast_2d(points)))


def _unit_datum(rho: float) -> float:
    return 1.0


def _identity_row(identity: str, lhs: float, rhs: float, error: float, factor: float,
                  scale: Optional[float] = None) -> Dict:
    difference = abs(lhs - rhs)
    scale = max(1.0, abs(lhs), abs(rhs)) if scale is None else max(scale, 1e-300)
    tolerance = factor * error + 1e-9 * scale
    return {"identity": identity, "lhs": lhs, "rhs": rhs, "difference": difference,
            "quadrature_error": error, "tolerance": tolerance, "passed": bool(difference <= tolerance)}


# ---------------------------------------------------------------------------
# distance estimate and radial optimality helpers
# ---------------------------------------------------------------------------

def annulus_integrals(spec: StableOperatorSpec, domain: Domain, points, a_values,
                      q: Optional[QuadratureSpec] = None) -> np.ndarray:
    """Mass of |r|^(-1-2s) mu(dtheta) dr on {|r| < a d_x, x + r theta outside}, one row per a"""
    q = q or QuadratureSpec()
    s = spec.s
    points = as_points(points, domain.dimension)
    a_values = np.atleast_1d(np.asarray(a_values, dtype=float))
    reach = a_values[:, None] * domain.dist(points)[None, :]
    out = np.zeros((len(a_values), len(points)))
    dirs, weights = folded_nodes(spec, q.angular_nodes)
    for theta, weight in zip(dirs, weights):
        for sign in (1.0, -1.0):
            for lo, hi in exterior_gaps(domain.chords(points, sign * theta)):
                lo_b = lo[None, :]
                hi_b = np.minimum(hi[None, :], reach)
                live = np.isfinite(lo_b) & (lo_b > 0) & (hi_b > lo_b)
                safe_lo = np.where(live, lo_b, 1.0)
                safe_hi = np.where(live, hi_b, 1.0)
                out += weight * np.where(live, (safe_lo ** (-2.0 * s) - safe_hi ** (-2.0 * s)) / (2.0 * s), 0.0)
    return out


def interval_annulus_integral(spec: StableOperatorSpec, domain: Interval, x: np.ndarray, a: float) -> np.ndarray:
    """Closed form of annulus_integrals on an interval"""
    s = spec.s
    x = np.asarray(x, dtype=float).ravel()
    total = np.zeros(len(x))
    reach = a * np.minimum(x - domain.lo[0], domain.hi[0] - x)
    for gap in (x - domain.lo[0], domain.hi[0] - x):
        live = gap < reach
        total += np.where(live, (gap ** (-2.0 * s) - reach ** (-2.0 * s)) / (2.0 * s), 0.0)
    return total_mass(spec.measure) * total


def recipe_a(spec: StableOperatorSpec, s_min: float) -> float:
    """(8 Lambda / lambda + 1)^(1/(2 s_min)) + 1"""
    lam = ellipticity_constant(spec.measure, spec.s)
    return float((8.0 * total_mass(spec.measure) / lam + 1.0) ** (1.0 / (2.0 * s_min)) + 1.0)


def recipe_constant(spec: StableOperatorSpec, a: float) -> float:
    """4s / (lambda ((a-1)^(-2s) - a^(-2s))) from the annulus lower bound"""
    s = spec.s
    lam = ellipticity_constant(spec.measure, s)
    return float(4.0 * s / (lam * ((a - 1.0) ** (-2.0 * s) - a ** (-2.0 * s))))


def distance_estimate(spec: StableOperatorSpec, domain: Domain, points, a: float, rho: float,
                      q: Optional[QuadratureSpec] = None) -> DistanceEstimateReport:
    points = as_points(points, domain.dimension)
    inside, d, _ = domain.distance(points)
    keep = inside & (d <= rho)
    points, d = points[keep], d[keep]
    rhs = annulus_integrals(spec, domain, points, [a], q)[0]
    lhs = d ** (-2.0 * spec.s)
    frame = pd.DataFrame(points, columns=[f"x{k + 1}" for k in range(domain.dimension)])
    frame["d_x"] = d
    frame["lhs"] = lhs
    frame["rhs"] = rhs
    with np.errstate(divide="ignore"):
        frame["ratio"] = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.inf)
    return DistanceEstimateReport(s=spec.s, a=a, rho=rho, rows=frame)


def radial_weighted_L2(s: float, d: int, eps: float, gamma_exponent: float, decades: int = 12,
                       order: int = 8) -> EnergyReport:
    """int over the unit ball of u^2 d_x^(-gamma), u harmonic for the collar datum (|y|-1)^(-1+s+eps)"""
    area = sphere_area(d)
    edge = -1.0 + s + eps
    increments = []
    for nodes, weights in decade_rule(1.0, decades, order):
        u = poisson_ball_radial(s, d, _unit_datum, 1.0 - nodes, edge_exponent=edge, cut=2.0)
        increments.append(float(weights @ (area * (1.0 - nodes) ** (d - 1) * u ** 2 * nodes ** (-gamma_exponent))))
    divergent, tail = decade_classification(increments)
    value = float("inf") if divergent else float(sum(increments) + tail)
    return EnergyReport(value, COAREA, float("inf") if divergent else abs(tail),
                        {"s": s, "eps": eps, "gamma": gamma_exponent, "increments": increments}, divergent)


def _classified(report: EnergyReport, expected_divergent: bool) -> Dict:
    return {"value": report.value, "divergent": bool(report.divergent),
            "expected_divergent": bool(expected_divergent),
            "matches": bool(report.divergent) == bool(expected_divergent),
            "value_error": report.error_estimate}


def _classical_solution(domain: Domain, datum: Callable[[np.ndarray], np.ndarray], n: int) -> ScalarField:
    if isinstance(domain, Ball):
        return harmonic_field(domain, datum, n)
    left = float(datum(np.array([[-1.0]]))[0])
    right = float(datum(np.array([[1.0]]))[0])
    mean, slope = 0.5 * (right + left), 0.5 * (right - left)
    return ScalarField(func=lambda p: mean + slope * np.clip(p[:, 0], -1.0, 1.0), dimension=1,
                       decay=BOUNDED, bound=abs(mean) + abs(slope),
                       laplacian=lambda p: np.zeros(len(p)), name="linear_interpolant")


def _torsion_oracle(spec: StableOperatorSpec, domain: Domain) -> Optional[ScalarField]:
    ball = _round_ball(domain)
    if ball is None or spec.label != "fractional_laplacian":
        return None
    return ball_torsion(domain.dimension, spec.s, ball[0], ball[1])


def _classical_oracle(spec: StableOperatorSpec, domain: Domain) -> Optional[ScalarField]:
    ball = _round_ball(domain)
    if ball is None or spec.label != "fractional_laplacian":
        return None
    return classical_torsion(domain.dimension, ball[0], ball[1])


def _collocation_ball(x0: np.ndarray, radius: float, count: int) -> np.ndarray:
    d = len(x0)
    if d == 1:
        return x0 + radius * np.linspace(-1.0, 1.0, count)[:, None]
    angles = 2.0 * np.pi * np.arange(count) / count
    ring = np.column_stack([np.cos(angles), np.sin(angles)])
    return np.vstack([x0[None, :], x0 + 0.5 * radius * ring, x0 + radius * ring])


def _next_power(value: float, step: float = K_STEP) -> float:
    """Smallest step^j >= value"""
    if value <= 0:
        return 1.0
    return float(step ** np.ceil(np.log(value) / np.log(step) - 1e-12))


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

class ScenarioEngine:
    """Runs scenarios kind by kind and keeps their results by id"""

    def __init__(self, n_jobs: Optional[int] = None):
        self.n_jobs = n_jobs
        self.results: Dict[str, ScenarioResult] = {}
        self.processing_status = "idle"

    def run(self, scenario: Scenario, progress_callback=None) -> ScenarioResult:
        runner = getattr(self, f"run_{scenario.kind}")
        self.processing_status = f"running {scenario.id}"
        logger.info(f"running {scenario.id} ({scenario.kind}, s={list(scenario.s_list)})")
        started = time.perf_counter()
        result = runner(scenario, progress_callback)
        result.summary["elapsed_seconds"] = round(time.perf_counter() - started, 3)
        result.summary["gate_values"] = {name: scenario.gate(name) for name in DEFAULT_GATES}
        result.summary["operator"] = [measure_report(scenario.spec(s)) for s in scenario.s_list]
        self.results[scenario.id] = result
        if result.passed:
            success(logger, f"{scenario.id}: all {len(result.gates)} gates passed")
        else:
            failure(logger, f"{scenario.id}: failed gates {', '.join(result.failed_gates)}")
        self.processing_status = "idle"
        return result

    def run_suite(self, scenarios: List[Scenario], progress_callback=None) -> List[ScenarioResult]:
        """Independent scenarios in parallel, results ordered by id"""
        ids = [sc.id for sc in scenarios]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise InvalidScenario("scenario ids must be unique", {"duplicates": duplicates})
        ordered = sorted(scenarios, key=lambda sc: sc.id)
        jobs = resolve_jobs(self.n_jobs)
        inner_jobs = 1 if jobs > 1 and len(ordered) > 1 else self.n_jobs
        self.processing_status = f"running {len(ordered)} scenarios"
        results = ordered_map(lambda sc: ScenarioEngine(inner_jobs).run(sc), ordered, jobs, backend="threading")
        for i, result in enumerate(results):
            self.results[result.scenario.id] = result
            _report(progress_callback, (i + 1) / len(results))
        self.processing_status = "idle"
        return results

    def get_run_summary(self) -> Dict:
        passed = [sid for sid, r in self.results.items() if r.passed]
        failed = [sid for sid, r in self.results.items() if not r.passed]
        return {
            "scenarios": len(self.results),
            "passed": sorted(passed),
            "failed": sorted(failed),
            "gates": {sid: r.gates for sid, r in sorted(self.results.items())},
        }

    # -- main estimate ------------------------------------------------------

    def run_main_estimate(self, sc: Scenario, progress_callback=None) -> ScenarioResult:
        """Empirical constant of the energy estimate per s and data pair"""
        pairs = sc.data.get("pairs") or [{"f": {"kind": "constant", "value": 1.0}, "g": {"kind": "zero"}}]
        with_transmission = bool(sc.data.get("transmission", False))
        rows = []
        total = len(pairs) * len(sc.s_list)
        for i, s in enumerate(sc.s_list):
            spec = sc.spec(s)
            for j, pair in enumerate(pairs):
                rows.append(_guarded({"s": s, "pair": j, "h": sc.h},
                                     lambda: self._main_estimate_row(sc, spec, pair, with_transmission)))
                _report(progress_callback, (i * len(pairs) + j + 1) / total)
        frame = pd.DataFrame(rows)
        ok = _ok(frame)
        spreads, l2_spreads = {}, {}
        for pair_id, group in ok.groupby("pair"):
            spreads[int(pair_id)] = _spread(group["C_s"])
            l2_spreads[int(pair_id)] = _spread(group["l2_ratio"])
        gates = {
            "rows_computed": _rows_computed(frame),
            "constants_finite": bool(np.isfinite(ok["C_s"]).all()) if len(ok) else True,
            "s_uniform_constant": all(v <= sc.gate("main_estimate_spread") for v in spreads.values()),
        }
        summary = {"spread": spreads, "l2_spread": l2_spreads,
                   "degenerate_rows": int((frame.get("status") == "degenerate").sum())}
        return ScenarioResult(sc, frame, gates, summary)

    def _main_estimate_row(self, sc: Scenario, spec: StableOperatorSpec, pair: Dict, with_transmission: bool) -> Dict:
        f = sc.make_field(pair.get("f", 0.0), spec.s)
        g = sc.make_field(pair.get("g", 0.0), spec.s)
        out = {"f": f.name, "g": g.name}
        if f.is_zero and g.is_zero:
            out.update({"l2_sq": 0.0, "sobolev_sq": 0.0, "weighted_sq": 0.0, "lhs": 0.0,
                        "f_weighted_sq": 0.0, "g_tau_sq": 0.0, "rhs": 0.0,
                        "C_s": float("nan"), "l2_ratio": float("nan"), "status": "degenerate"})
            return out
        solution = solve(DirichletProblem(spec, sc.domain, f, g, sc.h), estimate_error=True, n_jobs=self.n_jobs)
        u = solution.as_field()
        l2_sq = l2_norm(u, sc.domain) ** 2
        sobolev = gagliardo(u, sc.domain, spec.s / 2.0, cells=sc.cells)
        weighted = weighted_energy(u, sc.domain, spec.s, cells=sc.cells)
        f_weighted = weighted_L2(f, sc.domain, 2.0 * spec.s)
        g_tau = exterior_L2_tau(spec, g, sc.domain, q=sc.quadrature)
        lhs = l2_sq + max(sobolev.value, weighted.value)
        rhs = f_weighted.value + g_tau.value
        out.update({
            "l2_sq": l2_sq,
            "sobolev_sq": sobolev.value,
            "weighted_sq": weighted.value,
            "lhs": lhs,
            "f_weighted_sq": f_weighted.value,
            "g_tau_sq": g_tau.value,
            "rhs": rhs,
            "weight_ratio": sobolev.value / weighted.value if weighted.value > 0 else float("nan"),
            "solve_error": solution.error_estimate,
            "energy_error": sobolev.error_estimate + weighted.error_estimate,
            "rhs_error": f_weighted.error_estimate + g_tau.error_estimate,
        })
        if with_transmission:
            out["transmission"] = transmission_energy(spec, u, g, sc.domain).value
        if f_weighted.divergent or g_tau.divergent or not rhs > 0:
            out.update({"C_s": float("nan"), "l2_ratio": float("nan"), "status": "rhs_divergent"})
            return out
        out["C_s"] = float(np.sqrt(lhs / rhs))
        out["l2_ratio"] = float(np.sqrt(l2_sq) / (np.sqrt(f_weighted.value) + np.sqrt(g_tau.value)))
        return out

    # -- torsion boundary behaviour -------------------------------------------

    def run_hopf(self, sc: Scenario, progress_callback=None) -> ScenarioResult:
        """phi / d^s over nodes away from the boundary, per s"""
        rows = []
        for i, s in enumerate(sc.s_list):
            spec = sc.spec(s)
            rows.append(_guarded({"s": s, "h": sc.h}, lambda: self._hopf_row(sc, spec)))
            _report(progress_callback, (i + 1) / len(sc.s_list))
        frame = pd.DataFrame(rows)
        ok = _ok(frame)
        spreads = ok["spread"] if "spread" in ok else pd.Series(dtype=float)
        gates = {
            "rows_computed": _rows_computed(frame),
            "hopf_spread": bool(len(spreads)) and bool((spreads <= sc.gate("hopf_spread")).all()),
            "stable_in_s": _stable(spreads, sc.gate("stability")),
        }
        if "oracle_error" in ok and sc.data.get("oracle_gate", True):
            gates["torsion_oracle"] = bool((ok["oracle_error"] <= sc.gate("torsion_relative_error")).all())
        if sc.data.get("classical_limit") and "classical_gap" in ok:
            gates["classical_limit"] = _strictly_decreasing(ok.sort_values("s")["classical_gap"])
        summary = {"spread": _spread(spreads) if len(spreads) else float("nan")}
        levels = int(sc.data.get("refinement_levels", 0))
        if levels > 1:
            d = sc.dimension
            problem = DirichletProblem(sc.spec(sc.s_list[0]), sc.domain, constant(1.0, d), constant(0.0, d), sc.h)
            study = refinement_study(problem, levels, self.n_jobs)
            summary["refinement"] = study.to_dict("records")
            gates["refinement_converging"] = bool((study["ratio"].dropna() < 1.0).all())
        return ScenarioResult(sc, frame, gates, summary)

    def _hopf_row(self, sc: Scenario, spec: StableOperatorSpec) -> Dict:
        solution = torsion_function(spec, sc.domain, sc.h, estimate_error=True, n_jobs=self.n_jobs)
        grid = solution.grid
        idx = solution.nodes_away_from_boundary(4.0)
        if not len(idx):
            raise InvalidScenario("no nodes at distance 4h from the boundary", {"h": sc.h})
        phi = solution.values[idx]
        ratio = phi / grid.distances[idx] ** spec.s
        out = {
            "nodes": len(idx),
            "min_ratio": float(np.min(ratio)),
            "max_ratio": float(np.max(ratio)),
            "spread": float(np.max(ratio) / np.min(ratio)),
            "solve_error": solution.error_estimate,
            "residual": solution.residual,
        }
        oracle = _torsion_oracle(spec, sc.domain)
        if oracle is not None:
            exact = oracle(grid.nodes[idx])
            out["oracle_error"] = float(np.max(np.abs(phi - exact) / exact))
        classical = _classical_oracle(spec, sc.domain)
        if classical is not None:
            limit = classical(grid.nodes[idx])
            out["classical_gap"] = float(np.max(np.abs(phi - limit)) / np.max(limit))
        return out

    # -- normal derivative of d^s -----------------------------------------------

    def run_normal_derivative_bound(self, sc: Scenario, progress_callback=None) -> ScenarioResult:
        """s (-N_s d^s) / tau_s at exterior points in the collar and the far field"""
        per_level = int(sc.data.get("points_per_level", 8))
        levels = [("collar", float(t)) for t in sc.data.get("collar", [0.05, 0.1, 0.25, 0.5, 0.9])]
        levels += [("far", float(t)) for t in sc.data.get("far", [2.0, 5.0])]
        chunks = _level_points(sc.domain, [t for _, t in levels], "outside", per_level)
        tags = [(tag, t) for (tag, t), chunk in zip(levels, chunks) for _ in range(len(chunk))]
        points = np.vstack(chunks)
        rows, constant_checks = [], {}
        margin = sc.gate("normal_derivative_margin")
        for i, s in enumerate(sc.s_list):
            spec = sc.spec(s)
            rows.extend(_guarded_rows({"s": s}, lambda: self._normal_rows(sc, spec, points, tags, margin)))
            const, _ = normal_derivative_values(spec, sc.domain, constant(1.0, sc.dimension), points[:1], sc.quadrature)
            constant_checks[s] = float(np.max(np.abs(const)))
            _report(progress_callback, (i + 1) / len(sc.s_list))
        frame = pd.DataFrame(rows)
        ok = _ok(frame)
        collar = ok[ok["level_kind"] == "collar"] if "level_kind" in ok else ok
        off = frame[frame.get("status") == "off_support"] if "status" in frame else frame.iloc[0:0]
        gates = {
            "rows_computed": _rows_computed(frame),
            "collar_bound": bool(len(collar)) and bool(((collar["ratio"] - collar["ratio_error"]) <= collar["bound"]).all()),
            "constant_zero": all(v == 0.0 for v in constant_checks.values()),
            "off_support_zero": bool((off["minus_N"].abs() <= SUPPORT_THRESHOLD).all()) if len(off) else True,
        }
        summary = {
            "max_collar_ratio": float(collar["ratio"].max()) if len(collar) else float("nan"),
            "off_support_rows": int(len(off)),
            "constant_N": constant_checks,
        }
        return ScenarioResult(sc, frame, gates, summary)

    def _normal_rows(self, sc: Scenario, spec: StableOperatorSpec, points: np.ndarray, tags, margin: float) -> List[Dict]:
        s = spec.s
        u = distance_power(sc.domain, s)
        values, errors = normal_derivative_values(spec, sc.domain, u, points, sc.quadrature)
        tau = np.atleast_1d(tau_s(spec, sc.domain, points, sc.quadrature))
        nu = np.atleast_1d(nu_star(spec, sc.domain, points, sc.quadrature))
        dist = sc.domain.dist(points)
        bound = 2.0 * total_mass(spec.measure) * margin
        rows = []
        for k, (tag, level) in enumerate(tags):
            row = {"level_kind": tag, "level": level}
            row.update({f"x{j + 1}": float(points[k, j]) for j in range(points.shape[1])})
            row.update({"d_x": float(dist[k]), "minus_N": float(-values[k]), "N_error": float(errors[k]),
                        "tau": float(tau[k]), "nu_star": float(nu[k]), "bound": bound})
            if tau[k] > SUPPORT_THRESHOLD:
                row["ratio"] = float(s * -values[k] / tau[k])
                row["ratio_error"] = float(s * errors[k] / tau[k])
            else:
                row.update({"ratio": float("nan"), "ratio_error": float("nan"), "status": "off_support"})
            rows.append(row)
        return rows

    # -- distance estimate ------------------------------------------------------

    def run_distance_estimate(self, sc: Scenario, progress_callback=None) -> ScenarioResult:
        """d_x^(-2s) against the exterior mass seen within a d_x"""
        domain = sc.domain
        rho = float(sc.data.get("rho", 0.25 * domain.max_inner_distance()))
        if "points" in sc.data:
            points = as_points(sc.data["points"], domain.dimension)
        else:
            layers = np.geomspace(rho / 16.0, rho, int(sc.data.get("levels", 8)))
            points = np.vstack(_level_points(domain, layers, "inside", int(sc.data.get("points_per_level", 8))))
        s_min = min(sc.s_list)
        a_recipe = recipe_a(sc.spec(s_min), s_min)
        a = float(sc.data.get("a", a_recipe))
        rows, constants = [], []
        for i, s in enumerate(sc.s_list):
            spec = sc.spec(s)
            found = {}

            def compute(spec=spec, found=found):
                report = distance_estimate(spec, domain, points, a, rho, sc.quadrature)
                frame = report.rows.copy()
                if isinstance(domain, Interval):
                    frame["closed_form"] = interval_annulus_integral(spec, domain, frame["x1"].to_numpy(), a)
                coords = frame[[f"x{k + 1}" for k in range(domain.dimension)]].to_numpy()
                grid_a = np.array(sorted(set(A_GRID) | {a}))
                integrals = annulus_integrals(spec, domain, coords, grid_a, sc.quadrature)
                positive = np.all(integrals > 0, axis=1)
                best = float(grid_a[np.argmax(positive)]) if positive.any() else float("nan")
                found.update({"s": s, "a": a, "rho": rho, "fitted_constant": report.fitted_constant,
                              "recipe_constant": recipe_constant(spec, a), "best_a": best})
                if positive.any():
                    lhs = frame["lhs"].to_numpy()
                    found["constant_at_best_a"] = float(np.max(lhs / integrals[np.argmax(positive)]))
                return frame.to_dict("records")

            rows.extend(_guarded_rows({"s": s, "a": a}, compute))
            if found:
                constants.append(found)
            _report(progress_callback, (i + 1) / len(sc.s_list))
        frame = pd.DataFrame(rows)
        ok = _ok(frame)
        gates = {"rows_computed": _rows_computed(frame)}
        if sc.data.get("expect_zero"):
            gates["rhs_vanishes"] = bool(len(ok)) and bool((ok["rhs"] == 0.0).all())
        else:
            gates["rhs_positive"] = bool(len(ok)) and bool((ok["rhs"] > 0).all())
            gates["fitted_constant_stable"] = _stable([c["fitted_constant"] for c in constants], sc.gate("stability"))
        if "closed_form" in ok:
            gap = (ok["rhs"] - ok["closed_form"]).abs() <= 1e-10 * np.maximum(1.0, ok["closed_form"].abs())
            gates["closed_form"] = bool(gap.all())
        summary = {"a_recipe": a_recipe, "a_used": a, "rho": rho, "constants": constants}
        return ScenarioResult(sc, frame, gates, summary)

    # -- optimality thresholds ----------------------------------------------------

    def run_optimality(self, sc: Scenario, progress_callback=None) -> ScenarioResult:
        """Finiteness of the tau norm and of weighted L2 norms of u around eps = (1-s)/2"""
        domain = sc.domain
        if not (isinstance(domain, Ball) and _is_unit_centered(domain)):
            raise InvalidScenario("optimality runs on the unit ball", {"id": sc.id})
        d = domain.dimension
        eps_list = [float(e) for e in sc.data.get("eps", [0.15, 0.35])]
        delta = float(sc.data.get("delta", 0.1))
        decades = int(sc.data.get("decades", 12))
        order = int(sc.data.get("order", 8))
        rows = []
        for i, s in enumerate(sc.s_list):
            spec = sc.spec(s)
            threshold = 0.5 * (1.0 - s)
            for eps in eps_list:
                g = optimality_profile(domain, s, eps)
                rows.append(_guarded(
                    {"s": s, "quantity": "tau_norm", "eps": eps, "gamma": float("nan")},
                    lambda: _classified(exterior_L2_tau(spec, g, domain, decades, order, q=sc.quadrature),
                                        eps <= threshold)))
                rows.append(_guarded(
                    {"s": s, "quantity": "u_weighted", "eps": eps, "gamma": s},
                    lambda: _classified(radial_weighted_L2(s, d, eps, s, decades, order), eps <= threshold)))
            eps_mid = threshold + 0.5 * delta
            for gamma_exponent, expected in ((s, False), (s + 2.0 * delta, True)):
                rows.append(_guarded(
                    {"s": s, "quantity": "u_weighted", "eps": eps_mid, "gamma": gamma_exponent},
                    lambda: _classified(radial_weighted_L2(s, d, eps_mid, gamma_exponent, decades, order), expected)))
            rows.append(_guarded({"s": s, "quantity": "kernel_normalization"}, lambda: self._kernel_row(s, d)))
            rows.append(_guarded({"s": s, "quantity": "radial_crosscheck"}, lambda: self._radial_row(domain, s, d)))
            _report(progress_callback, (i + 1) / len(sc.s_list))
        frame = pd.DataFrame(rows)
        ok = _ok(frame)
        classified = ok[ok["quantity"].isin(["tau_norm", "u_weighted"])]
        gates = {
            "rows_computed": _rows_computed(frame),
            "classification": bool(len(classified)) and bool(classified["matches"].astype(bool).all()),
            "kernel_normalization": bool(ok.loc[ok["quantity"] == "kernel_normalization", "matches"].astype(bool).all()),
            "radial_crosscheck": bool(ok.loc[ok["quantity"] == "radial_crosscheck", "matches"].astype(bool).all()),
        }
        summary = {"threshold": {s: 0.5 * (1.0 - s) for s in sc.s_list}, "delta": delta}
        return ScenarioResult(sc, frame, gates, summary)

    @staticmethod
    def _kernel_row(s: float, d: int) -> Dict:
        x = np.zeros(d)
        x[0] = 0.5
        estimate = poisson_ball_solve(s, d, constant(1.0, d), x)
        return {"value": estimate.value, "value_error": estimate.error,
                "matches": bool(estimate.error <= KERNEL_NORMALIZATION_TOLERANCE)}

    @staticmethod
    def _radial_row(domain: Ball, s: float, d: int) -> Dict:
        """Full Poisson integral against the radial fast path for the collar indicator"""
        x = np.zeros(d)
        x[0] = 0.5
        full = poisson_ball_solve(s, d, optimality_profile(domain, s, 1.0 - s), x)
        radial = poisson_ball_radial(s, d, _unit_datum, 0.5, edge_exponent=0.0, cut=2.0)
        difference = abs(full.value - radial)
        return {"value": radial, "value_error": full.error, "difference": difference,
                "matches": bool(difference <= 1e-4 * max(1.0, abs(radial)) + 3.0 * full.error)}

    # -- nonlocal to local ----------------------------------------------------------

    def run_nonlocal_to_local(self, sc: Scenario, progress_callback=None) -> ScenarioResult:
        """Nonlocal solutions against the harmonic extension as s -> 1"""
        domain = sc.domain
        if not _is_unit_centered(domain):
            raise InvalidScenario("nonlocal_to_local runs on the unit ball or (-1, 1)", {"id": sc.id})
        d = domain.dimension
        n = int(sc.data.get("n_boundary", 1024))
        boundary = sc.data.get("boundary", "cos_theta")
        if boundary == "one":
            datum, extension = _ones, constant(1.0, d)
        elif boundary == "cos_theta":
            cutoff = sc.data.get("cutoff", [1.5, 2.0])
            datum = cos_theta
            extension = radial_extension(cos_theta, d, None if cutoff is None else tuple(cutoff), "E[cos]")
        else:
            raise InvalidScenario(f"unknown boundary datum {boundary!r}", {"id": sc.id})
        f = sc.make_field(sc.data.get("f", {"kind": "zero"}))
        classical = _classical_solution(domain, datum, n)
        boundary_sq = boundary_L2(datum, domain, n)
        s_values = sorted(float(s) for s in sc.s_list)
        rows = []
        for i, s in enumerate(s_values):
            rows.append(_guarded({"s": s, "h": sc.h}, lambda: self._limit_row(
                sc, sc.spec(s), f, extension, datum, classical, boundary_sq, s == s_values[-1])))
            _report(progress_callback, (i + 1) / len(s_values))
        frame = pd.DataFrame(rows)
        ok = _ok(frame)
        gates = {"rows_computed": _rows_computed(frame)}
        if boundary == "one":
            gates["constant_reproduced"] = bool(len(ok)) and bool((ok["max_nodal_deviation"] <= 1e-6).all())
        else:
            gates["l2_error_decreasing"] = _strictly_decreasing(ok["l2_error"]) if len(ok) > 1 else False
            gates["tau_gap_decreasing"] = _strictly_decreasing(ok["tau_gap"]) if len(ok) > 1 else False
        last = frame.iloc[-1]
        gates["very_weak"] = bool(last.get("status") == "ok") and bool(last["very_weak_residual"] <= last["very_weak_bound"])
        summary = {"boundary_norm": float(np.sqrt(boundary_sq)), "datum": boundary}
        return ScenarioResult(sc, frame, gates, summary)

    def _limit_row(self, sc: Scenario, spec: StableOperatorSpec, f: ScalarField, extension: ScalarField,
                   datum, classical: ScalarField, boundary_sq: float, last: bool) -> Dict:
        domain = sc.domain
        s = spec.s
        f_s = f if f.is_zero else f.times(distance_power(domain, 1.0 - s))
        solution = solve(DirichletProblem(spec, domain, f_s, extension, sc.h), estimate_error=True, n_jobs=self.n_jobs)
        u = solution.as_field()
        interior = solution.grid.interior
        out = {
            "l2_error": l2_distance(u, classical, domain),
            "max_nodal_deviation": float(np.max(np.abs(solution.values[interior]
                                                       - classical(solution.grid.nodes[interior])))),
            "solve_error": solution.error_estimate,
            "boundary_norm": float(np.sqrt(boundary_sq)),
        }
        try:
            tau = exterior_L2_tau(spec, extension, domain, q=sc.quadrature)
            out["tau_norm"] = float(np.sqrt(tau.value))
            out["tau_gap"] = abs(out["tau_norm"] - out["boundary_norm"])
        except TailUnknown:
            out["tau_norm"] = float("nan")
            out["tau_gap"] = float("nan")
        if last:
            report = very_weak_residual(u, f, datum, paraboloid_test(domain.dimension, 1.0), domain,
                                        n_boundary=int(sc.data.get("n_boundary", 1024)))
            error = solution.error_estimate if np.isfinite(solution.error_estimate) else 0.0
            out["very_weak_residual"] = report.residual
            out["very_weak_bound"] = sc.gate("very_weak_factor") * max(error, out["l2_error"]) + 1e-8 * report.scale
        return out

    # -- barrier ------------------------------------------------------------------------

    def run_barrier(self, sc: Scenario, progress_callback=None) -> ScenarioResult:
        """Smallest K with A_s v <= 1 on B(x0, delta/2), then phi >= v on the nodes"""
        domain = sc.domain
        d = domain.dimension
        delta = float(sc.data.get("delta", 0.5))
        lo, hi = domain.bounding_box()
        x0 = np.asarray(sc.data.get("x0", 0.5 * (lo + hi)), dtype=float).ravel()
        inside, dist, _ = domain.distance(x0[None, :])
        if not inside[0] or dist[0] < delta:
            raise InvalidScenario("x0 must lie at distance >= delta from the boundary",
                                  {"x0": x0.tolist(), "delta": delta})
        points = _collocation_ball(x0, 0.5 * delta, int(sc.data.get("collocation", 9 if d == 1 else 8)))
        rows = []
        for i, s in enumerate(sc.s_list):
            spec = sc.spec(s)
            rows.append(_guarded({"s": s, "delta": delta}, lambda: self._barrier_row(sc, spec, x0, delta, points)))
            _report(progress_callback, (i + 1) / len(sc.s_list))
        frame = pd.DataFrame(rows)
        ok = _ok(frame)
        gates = {
            "rows_computed": _rows_computed(frame),
            "comparison": bool(len(ok)) and bool((ok["margin"] >= sc.gate("barrier_margin")).all()),
            "K_bounded": bool(len(ok)) and _spread(ok["K"]) <= sc.gate("barrier_variation"),
            "large_K": bool(len(ok)) and bool((ok["large_K_Av"] <= 1.0).all()),
        }
        summary = {"x0": x0.tolist(), "collocation_points": len(points)}
        return ScenarioResult(sc, frame, gates, summary)

    def _barrier_row(self, sc: Scenario, spec: StableOperatorSpec, x0: np.ndarray, delta: float,
                     points: np.ndarray) -> Dict:
        d = sc.dimension
        estimates = apply_As_many(spec, barrier(d, x0, delta, 1.0), points, sc.quadrature, self.n_jobs)
        k_star = max(e.value + e.error for e in estimates)
        K = _next_power(k_star)
        v = barrier(d, x0, delta, K)
        phi = torsion_function(spec, sc.domain, sc.h, n_jobs=self.n_jobs)
        nodes = phi.grid.nodes[phi.grid.interior]
        large = apply_As(spec, barrier(d, x0, delta, 1e12), x0, sc.quadrature)
        return {
            "K_star": k_star,
            "K": K,
            "max_Av": k_star / K,
            "Av_error": max(e.error for e in estimates) / K,
            "margin": float(np.min(phi.interior_values - v(nodes))),
            "large_K_Av": large.value,
        }

    # -- Whitney covers --------------------------------------------------------------------

    def run_whitney(self, sc: Scenario, progress_callback=None) -> ScenarioResult:
        """Radius invariant, overlap and coverage of Whitney covers"""
        samples = int(sc.data.get("samples", 10_000))
        radii = [float(r) for r in sc.data.get("min_radii", [0.02])]
        rows = []
        covers = []
        for i, min_radius in enumerate(radii):
            rows.append(_guarded({"min_radius": min_radius},
                                 lambda: self._whitney_row(sc, min_radius, samples, covers)))
            _report(progress_callback, (i + 1) / len(radii))
        frame = pd.DataFrame(rows)
        ok = _ok(frame)
        gates = {
            "rows_computed": _rows_computed(frame),
            "radius_invariant": bool(len(ok)) and bool((ok["radius_violations"] == 0).all()),
            "overlap": bool(len(ok)) and bool((ok["overlap"] <= sc.gate("whitney_overlap")).all()),
            "coverage": bool(len(ok)) and bool((ok["covered_fraction"] == 1.0).all()),
        }
        summary = {}
        if "localized" in sc.data and covers:
            summary["localized"] = self._localized_energies(sc, covers[-1], sc.data["localized"])
        return ScenarioResult(sc, frame, gates, summary)

    def _whitney_row(self, sc: Scenario, min_radius: float, samples: int, covers: List) -> Dict:
        domain = sc.domain
        cover = whitney_cover(domain, min_radius, samples, sc.seed)
        covers.append(cover)
        dist = domain.dist(cover.centers)
        bad = (dist < 2.0 * cover.radii - 1e-12) | (dist > 4.0 * cover.radii + 1e-12)
        points = sample_inside(domain, samples, sc.seed + 1)
        points = points[domain.dist(points) > 8.0 * min_radius]
        return {
            "balls": len(cover.radii),
            "radius_violations": int(np.sum(bad)),
            "overlap": cover.overlap_bound,
            "checked_points": len(points),
            "covered_fraction": float(np.mean(cover.covers(points))) if len(points) else 1.0,
        }

    def _localized_energies(self, sc: Scenario, cover, options: Dict) -> Dict:
        """Gagliardo energy against the directional energy on the largest Whitney ball"""
        s = float(options.get("s", sc.s_list[0]))
        k = int(np.argmax(cover.radii))
        ball = Ball(cover.centers[k], float(cover.radii[k]))
        u = sc.make_field(options.get("field", {"kind": "gaussian"}), s)
        try:
            full = gagliardo(u, ball, s, factor_one_minus_t=True, cells=sc.cells)
            directional = mu_energy(sc.spec(s), u, ball, 0.0)
        except LabError as err:
            return {"status": "error", "error": f"{type(err).__name__}: {err.message}"}
        return {"s": s, "center": ball.center.tolist(), "radius": ball.radius, "gagliardo": full.value,
                "directional": directional.value,
                "ratio": full.value / directional.value if directional.value > 0 else float("nan")}

    # -- identities -------------------------------------------------------------------------

    def run_identity_suite(self, sc: Scenario, progress_callback=None) -> ScenarioResult:
        """Operator identities on seeded random smooth fields"""
        n_fields = int(sc.data.get("fields", 10))
        gauss_green_fields = int(sc.data.get("gauss_green_fields", n_fields))
        max_principle_fields = int(sc.data.get("max_principle_fields", n_fields))
        panels = int(sc.data.get("panels", 2))
        order = int(sc.data.get("order", 6))
        factor = sc.gate("identity_factor")
        rows = []
        total = len(sc.s_list) * n_fields
        for i, s in enumerate(sc.s_list):
            spec = sc.spec(s)
            for k, rng in enumerate(spawn_rngs(sc.seed, n_fields)):
                fields = self._random_fields(sc, rng)
                base = {"s": s, "field": k}
                rows.extend(_guarded_rows(base, lambda: self._identity_rows(sc, spec, fields, factor)))
                if k < gauss_green_fields:
                    rows.append(_guarded(base, lambda: self._gauss_green_row(sc, spec, fields, factor, panels, order)))
                if k < max_principle_fields:
                    rows.append(_guarded(base, lambda: self._max_principle_row(sc, spec, fields)))
                _report(progress_callback, (i * n_fields + k + 1) / total)
        frame = pd.DataFrame(rows)
        ok = _ok(frame)
        gates = {
            "rows_computed": _rows_computed(frame),
            "identities": bool(len(ok)) and bool(ok["passed"].astype(bool).all()),
        }
        summary = {identity: int(group["passed"].astype(bool).sum()) for identity, group in ok.groupby("identity")}
        return ScenarioResult(sc, frame, gates, {"passed_by_identity": summary, "fields": n_fields,
                                                 "gauss_green_fields": min(gauss_green_fields, n_fields),
                                                 "max_principle_fields": min(max_principle_fields, n_fields)})

    @staticmethod
    def _random_fields(sc: Scenario, rng: np.random.Generator) -> Dict:
        domain = sc.domain
        d = domain.dimension
        lo, hi = domain.bounding_box()
        candidates = sample_inside(domain, 64, int(rng.integers(2 ** 31)))
        depth = domain.dist(candidates)
        deepest = candidates[int(np.argmax(depth))]
        return {
            "u": gaussian(d, lo + (hi - lo) * rng.random(d), 0.2 + 0.3 * rng.random(), 0.5 + rng.random()),
            "x": candidates[int(rng.integers(len(candidates)))],
            "shift": 0.1 * rng.standard_normal(d),
            "lam": 0.75 + 0.75 * rng.random(),
            "phi": bump(d, deepest, 0.9 * float(np.max(depth)), 0.5 + rng.random()),
            "source": bump(d, deepest, 0.9 * float(np.max(depth)), rng.random()),
            "data": gaussian(d, lo + (hi - lo) * rng.random(d), 0.3, rng.random()),
        }

    @staticmethod
    def _identity_rows(sc: Scenario, spec: StableOperatorSpec, fields: Dict, factor: float) -> List[Dict]:
        q = sc.quadrature
        u, x = fields["u"], fields["x"]
        gamma = carre_du_champ(spec, u, x, q)
        a_sq = apply_As(spec, u.squared(), x, q)
        a_u = apply_As(spec, u, x, q)
        ux = u.value(x)
        rows = [_identity_row("carre_du_champ", gamma.value, -a_sq.value + 2.0 * ux * a_u.value,
                              gamma.error + a_sq.error + 2.0 * abs(ux) * a_u.error, factor)]
        sym = StableOperatorSpec(spec.s, symmetrize(spec.measure), spec.nondegenerate, spec.label)
        mirrored = apply_As(sym, u, x, q)
        rows.append(_identity_row("symmetrization", mirrored.value, a_u.value, mirrored.error + a_u.error, factor))
        moved, still = translation_check(spec, u, x, fields["shift"], q)
        rows.append(_identity_row("translation", moved.value, still.value, moved.error + still.error, factor))
        dilated, rescaled = scaling_check(spec, u, x, fields["lam"], q)
        rows.append(_identity_row("scaling", dilated.value, rescaled.value, dilated.error + rescaled.error, factor))
        return rows

    def _gauss_green_row(self, sc: Scenario, spec: StableOperatorSpec, fields: Dict, factor: float,
                         panels: int, order: int) -> Dict:
        report = gauss_green_residual(spec, sc.domain, fields["phi"], fields["u"], sc.quadrature, panels, order,
                                      self.n_jobs)
        return _identity_row("gauss_green", report.residual, 0.0, report.error, factor, report.scale)

    def _max_principle_row(self, sc: Scenario, spec: StableOperatorSpec, fields: Dict) -> Dict:
        problem = DirichletProblem(spec, sc.domain, fields["source"], fields["data"], sc.h)
        lowest = float(np.min(solve(problem, n_jobs=self.n_jobs).interior_values))
        return {"identity": "max_principle", "lhs": lowest, "rhs": 0.0, "difference": max(0.0, -lowest),
                "quadrature_error": 0.0, "tolerance": 1e-10, "passed": bool(lowest >= -1e-10)}
