"""Seminorms, weighted norms and energies of the regularity estimates"""
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import gamma

from core.config import BLOWUP_FACTOR
from core.errors import LabError, TailUnknown
from core.fields import ScalarField
from core.geometry import Domain, sample_inside
from core.measures import StableOperatorSpec, sphere_area
from core.operators import folded_nodes, tau_s
from core.quadrature import QuadratureSpec, decade_rule, gauss_jacobi_left, geometric_edges, panel_rule
from utils.logger import get_logger, warn
from utils.parallel import spawn_rngs

logger = get_logger("lab.norms")

TENSOR_GRID = "tensor-grid"
MONTE_CARLO = "monte-carlo"
COAREA = "coarea"
CHORDS = "chords"

# growth per halving above which a grid energy is not settling (10 over 8 halvings)
GROWTH_PER_HALVING = BLOWUP_FACTOR ** (1.0 / 8.0)


@dataclass
class EnergyReport:
    value: float
    method: str
    error_estimate: float = 0.0
    parameters: Dict = field(default_factory=dict)
    divergent: bool = False

    def __post_init__(self):
        if self.value < 0 and self.value > -1e-14:
            self.value = 0.0
        self.error_estimate = abs(self.error_estimate)

    def __float__(self) -> float:
        return self.value

    def to_dict(self) -> Dict:
        return asdict(self)


def _sphere_measure(d: int) -> float:
    return 2.0 if d == 1 else sphere_area(d)


def _unit_ball_volume(d: int) -> float:
    return np.pi ** (d / 2.0) / gamma(d / 2.0 + 1.0)


def _random_directions(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    if d == 1:
        return rng.choice([-1.0, 1.0], size=(count, 1))
    v = rng.standard_normal((count, d))
    return v / np.linalg.norm(v, axis=1)[:, None]


def _central_gradient(u: ScalarField, points: np.ndarray, step: float) -> np.ndarray:
    grad = np.zeros_like(points)
    for k in range(u.dimension):
        e = np.zeros(u.dimension)
        e[k] = step
        grad[:, k] = (u(points + e) - u(points - e)) / (2.0 * step)
    return grad


# ---------------------------------------------------------------------------
# double integrals over the domain
# ---------------------------------------------------------------------------

def _lattice_energy(u: ScalarField, domain: Domain, t: float, weight_power: float, h: float,
                    chunk: int = 512) -> float:
    """Midpoint pair sum off the diagonal plus the band correction for the self cells"""
    points, cell = domain.cell_midpoints(h)
    if not len(points):
        return 0.0
    d = domain.dimension
    values = u(points)
    dist = domain.dist(points)
    total = 0.0
    for start in range(0, len(points), chunk):
        block = slice(start, start + chunk)
        diff = values[block, None] - values[None, :]
        gap = np.linalg.norm(points[block, None, :] - points[None, :, :], axis=2)
        off = gap > 0
        kernel = np.where(off, np.where(off, gap, 1.0) ** (-d - 2.0 * t), 0.0)
        weight = np.minimum(dist[block, None], dist[None, :]) ** weight_power if weight_power else 1.0
        total += float(np.sum(weight * diff ** 2 * kernel))
    total *= cell * cell
    radius = (cell / _unit_ball_volume(d)) ** (1.0 / d)
    grad = _central_gradient(u, points, h / 4.0)
    band = _sphere_measure(d) / d * radius ** (2.0 - 2.0 * t) / (2.0 - 2.0 * t)
    local = np.sum(grad ** 2, axis=1) * (dist ** weight_power if weight_power else 1.0)
    return total + cell * band * float(np.sum(local))


def _grid_report(u: ScalarField, domain: Domain, t: float, weight_power: float, factor: float,
                 cells: int) -> EnergyReport:
    lo, hi = domain.bounding_box()
    extent = float(np.max(hi - lo))
    levels = [max(4, cells // 4), max(4, cells // 2), cells]
    values = [factor * _lattice_energy(u, domain, t, weight_power, extent / n) for n in levels]
    growth = [values[k + 1] / values[k] if values[k] > 0 else 1.0 for k in range(2)]
    divergent = all(g > GROWTH_PER_HALVING for g in growth)
    if divergent:
        warn(logger, f"grid energy keeps growing under refinement (t={t:g}, growth {growth})")
    return EnergyReport(
        value=values[-1],
        method=TENSOR_GRID,
        error_estimate=abs(values[-1] - values[-2]),
        parameters={"cells": levels, "values": values, "t": t, "weight_power": weight_power},
        divergent=divergent,
    )


def _monte_carlo_report(u: ScalarField, domain: Domain, t: float, weight_power: float, factor: float,
                        samples: int, seed: int) -> EnergyReport:
    """x uniform in the domain, theta uniform, r with density ~ r^(1-2t) on (0, diam)"""
    d = domain.dimension
    rng = spawn_rngs(seed, 1)[0]
    x = sample_inside(domain, samples, seed)
    theta = _random_directions(rng, samples, d)
    diam = domain.diameter
    r = diam * rng.random(samples) ** (1.0 / (2.0 - 2.0 * t))
    y = x + r[:, None] * theta
    hit = domain.contains(y)
    diff = np.zeros(samples)
    if hit.any():
        diff[hit] = (u(x[hit]) - u(y[hit])) ** 2 / r[hit] ** 2
        if weight_power:
            diff[hit] *= np.minimum(domain.dist(x[hit]), domain.dist(y[hit])) ** weight_power
    prefactor = factor * domain.volume * _sphere_measure(d) * diam ** (2.0 - 2.0 * t) / (2.0 - 2.0 * t)
    return EnergyReport(
        value=prefactor * float(np.mean(diff)),
        method=MONTE_CARLO,
        error_estimate=prefactor * float(np.std(diff)) / np.sqrt(samples),
        parameters={"samples": samples, "seed": seed, "t": t, "weight_power": weight_power},
    )


def _pair_energy(u: ScalarField, domain: Domain, t: float, weight_power: float, factor: float,
                 method: str, cells: Optional[int], samples: int, seed: int) -> EnergyReport:
    if not 0.0 < t < 1.0:
        raise LabError("order t must lie in (0, 1)", {"t": t})
    if u.is_constant:
        return EnergyReport(0.0, method, 0.0, {"t": t, "constant": True})
    if method == MONTE_CARLO:
        return _monte_carlo_report(u, domain, t, weight_power, factor, samples, seed)
    if method != TENSOR_GRID:
        raise LabError(f"unknown energy method {method!r}")
    cells = cells or (512 if domain.dimension == 1 else 48)
    return _grid_report(u, domain, t, weight_power, factor, cells)


def gagliardo(u: ScalarField, domain: Domain, t: float, factor_one_minus_t: bool = False,
              method: str = TENSOR_GRID, cells: Optional[int] = None, samples: int = 200_000,
              seed: int = 0) -> EnergyReport:
    """(1-t) optional times the double integral of |u(x)-u(y)|^2/|x-y|^(d+2t) over the domain"""
    factor = 1.0 - t if factor_one_minus_t else 1.0
    return _pair_energy(u, domain, t, 0.0, factor, method, cells, samples, seed)


def weighted_energy(u: ScalarField, domain: Domain, s: float, method: str = TENSOR_GRID,
                    cells: Optional[int] = None, samples: int = 200_000, seed: int = 0) -> EnergyReport:
    """(1-s) times the double integral of (d_x ^ d_y)^s |u(x)-u(y)|^2/|x-y|^(d+2s)"""
    return _pair_energy(u, domain, s, s, 1.0 - s, method, cells, samples, seed)


def sobolev_weight_ratio(u: ScalarField, domain: Domain, s: float, method: str = TENSOR_GRID,
                         cells: Optional[int] = None) -> float:
    """Unweighted H^(s/2)-type energy over the (d_x ^ d_y)^s weighted energy"""
    top = gagliardo(u, domain, s / 2.0, False, method, cells)
    bottom = weighted_energy(u, domain, s, method, cells)
    if bottom.value <= 0:
        return float("nan")
    return top.value / bottom.value


# ---------------------------------------------------------------------------
# directional energies along chords
# ---------------------------------------------------------------------------

def _log_rule(a: np.ndarray, b: np.ndarray, order: int, panels: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss rule in log r on [a, b] (a > 0), arrays of shape (n, panels * order)"""
    v, w = panel_rule(np.linspace(0.0, 1.0, panels + 1), order)
    ratio = np.log(np.maximum(b, a) / a)
    r = a[:, None] * np.exp(ratio[:, None] * v[None, :])
    return r, r * ratio[:, None] * w[None, :]


def _origin_rule(b: np.ndarray, s: float, order: int, share: float = 0.125) -> Tuple[np.ndarray, np.ndarray]:
    """Rule on (0, b] whose first panel carries the r^(1-2s) behaviour at the origin"""
    tj, wj = gauss_jacobi_left(order, 1.0 - 2.0 * s)
    c = share * b
    r_in = c[:, None] * tj[None, :]
    w_in = (c[:, None] ** (2.0 - 2.0 * s)) * wj[None, :] * r_in ** (-(1.0 - 2.0 * s))
    r_out, w_out = _log_rule(c, b, order)
    return np.hstack([r_in, r_out]), np.hstack([w_in, w_out])


def _chord_sides(r0: np.ndarray, r1: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray, np.ndarray, float]]:
    """Split a chord piece into positive and negative r parts as (a, b, singular, sign)"""
    parts = []
    for sign, lo, hi in ((1.0, np.maximum(r0, 0.0), np.maximum(r1, 0.0)),
                         (-1.0, np.maximum(-r1, 0.0), np.maximum(-r0, 0.0))):
        parts.append((lo, hi, (lo == 0.0) & (hi > 0.0), sign))
    return parts


def mu_energy(spec: StableOperatorSpec, u: ScalarField, domain: Domain, beta: float,
              q: Optional[QuadratureSpec] = None, panels: int = 4, order: int = 6) -> EnergyReport:
    """(1-s) int_O int_S int_R (d_x ^ d_y)^beta |u(x)-u(x+r theta)|^2 |r|^(-1-2s) 1_O(x+r theta)

    Passing a Ball contained in a larger domain gives the localized energy on that ball.
    """
    q = q or QuadratureSpec(angular_nodes=64, gauss_order=12)
    if u.is_constant:
        return EnergyReport(0.0, CHORDS, 0.0, {"beta": beta, "constant": True})
    s = spec.s
    x, wx = domain.volume_nodes(panels, order)
    ux = u(x)
    dx = domain.dist(x)
    dirs, weights = folded_nodes(spec, q.angular_nodes)

    def directional(gauss_order: int) -> float:
        total = 0.0
        for theta, weight in zip(dirs, weights):
            acc = np.zeros(len(x))
            for r0, r1 in domain.chords(x, theta):
                for a, b, singular, sign in _chord_sides(r0, r1):
                    live = b > a
                    if not live.any():
                        continue
                    idx = np.flatnonzero(live)
                    for mask, make in ((singular[idx], "origin"), (~singular[idx], "log")):
                        rows = idx[mask]
                        if not len(rows):
                            continue
                        if make == "origin":
                            r, w = _origin_rule(b[rows], s, gauss_order)
                        else:
                            r, w = _log_rule(a[rows], b[rows], gauss_order)
                        y = x[rows, None, :] + sign * r[..., None] * theta[None, None, :]
                        flat = y.reshape(-1, domain.dimension)
                        diff = (ux[rows, None] - u(flat).reshape(r.shape)) ** 2
                        if beta:
                            dy = domain.dist(flat).reshape(r.shape)
                            diff = diff * np.minimum(dx[rows, None], dy) ** beta
                        acc[rows] += np.sum(diff * r ** (-1.0 - 2.0 * s) * w, axis=1)
            total += weight * float(wx @ acc)
        return (1.0 - s) * total

    fine = directional(q.gauss_order)
    coarse = directional(max(4, q.gauss_order - 4))
    return EnergyReport(fine, CHORDS, abs(fine - coarse),
                        {"beta": beta, "s": s, "panels": panels, "order": order, "nodes": len(x)})


# ---------------------------------------------------------------------------
# level-set (coarea) integrals in the distance to the boundary
# ---------------------------------------------------------------------------

def decade_classification(increments: List[float]) -> Tuple[bool, float]:
    """(divergent, extrapolated tail) from the decade increments, deepest last"""
    if len(increments) < 3:
        return False, 0.0
    flags = []
    for prev, last in ((increments[-3], increments[-2]), (increments[-2], increments[-1])):
        if prev <= 0:
            flags.append(last > 0)
            continue
        ratio = last / prev
        flags.append(ratio >= 1.0 or ratio / (1.0 - ratio) > BLOWUP_FACTOR)
    if all(flags):
        return True, float("inf")
    prev, last = increments[-2], increments[-1]
    ratio = last / prev if prev > 0 else 0.0
    return False, last * ratio / (1.0 - ratio) if 0 <= ratio < 1 else 0.0


def _coarea(domain: Domain, side: str, t_top: float, decades: int, order: int, n: int,
            integrand: Callable[[np.ndarray, float], np.ndarray]) -> List[float]:
    """Per-decade integrals of integrand over {d_x = t} times dt"""
    increments = []
    for nodes, weights in decade_rule(t_top, decades, order):
        part = 0.0
        for t, wt in zip(nodes, weights):
            points, ws = domain.level_set_nodes(float(t), side, n)
            if len(points):
                part += wt * float(ws @ integrand(points, float(t)))
        increments.append(part)
    return increments


def weighted_L2(u: ScalarField, domain: Domain, gamma_exponent: float, decades: int = 12, order: int = 8,
                n: int = 256) -> EnergyReport:
    """int_O u^2 d_x^gamma, integrated over level sets of d in decades toward the boundary"""
    t_top = domain.max_inner_distance()

    def integrand(points, t):
        return u(points) ** 2 * t ** gamma_exponent

    increments = _coarea(domain, "inside", t_top, decades, order, n, integrand)
    divergent, tail = decade_classification(increments)
    value = float("inf") if divergent else float(sum(increments) + tail)
    if divergent:
        warn(logger, f"weighted L2 integral diverges at the boundary (gamma={gamma_exponent:g})")
    return EnergyReport(value, COAREA, abs(tail) if not divergent else float("inf"),
                        {"gamma": gamma_exponent, "decades": decades, "increments": increments},
                        divergent)


def exterior_L2_tau(spec: StableOperatorSpec, g: ScalarField, domain: Domain, decades: int = 12, order: int = 8,
                    n: int = 256, far_panels: int = 8, q: Optional[QuadratureSpec] = None) -> EnergyReport:
    """int over the complement of g^2 tau_s: collar by decades, far field by level-set panels"""
    if g.is_zero:
        return EnergyReport(0.0, COAREA, 0.0, {"s": spec.s})
    far = g.far_radius()
    if far is None:
        raise TailUnknown("exterior norm needs compact or vanishing data", {"field": g.name})
    q = q or QuadratureSpec()

    def integrand(points, t):
        return g(points) ** 2 * np.atleast_1d(tau_s(spec, domain, points, q))

    increments = _coarea(domain, "outside", 1.0, decades, order, n, integrand)
    divergent, tail = decade_classification(increments)
    lo, hi = domain.bounding_box()
    reach = far + float(max(np.linalg.norm(lo), np.linalg.norm(hi)))
    outer = 0.0
    if reach > 1.0:
        t_nodes, t_weights = panel_rule(np.geomspace(1.0, reach, far_panels + 1), order)
        for t, wt in zip(t_nodes, t_weights):
            points, ws = domain.level_set_nodes(float(t), "outside", n)
            if len(points):
                outer += wt * float(ws @ integrand(points, float(t)))
    if divergent:
        warn(logger, f"exterior tau norm diverges at the boundary (s={spec.s:g}, data {g.name})")
        value = float("inf")
    else:
        value = float(sum(increments) + tail + outer)
    return EnergyReport(value, COAREA, abs(tail) if not divergent else float("inf"),
                        {"s": spec.s, "decades": decades, "increments": increments, "far": outer},
                        divergent)


def boundary_L2(g_boundary: Callable[[np.ndarray], np.ndarray], domain: Domain, n: int = 1024) -> float:
    """Squared L2 norm of boundary data over the boundary rule"""
    z, w = domain.boundary_nodes(n)
    return float(w @ np.asarray(g_boundary(z), dtype=float) ** 2)


# ---------------------------------------------------------------------------
# transmission energy across the boundary
# ---------------------------------------------------------------------------

def exterior_gaps(pieces: List[Tuple[np.ndarray, np.ndarray]]) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Gaps between chord pieces on r > 0; the last gap is unbounded"""
    starts = np.column_stack([np.maximum(r0, 0.0) for r0, _ in pieces])
    stops = np.column_stack([np.maximum(r1, 0.0) for _, r1 in pieces])
    empty = stops <= starts
    starts = np.where(empty, np.inf, starts)
    stops = np.where(empty, np.inf, stops)
    order = np.argsort(starts, axis=1)
    starts = np.take_along_axis(starts, order, axis=1)
    stops = np.take_along_axis(stops, order, axis=1)
    gaps = []
    for k in range(starts.shape[1] - 1):
        # no later piece on this row: the unbounded gap below covers it
        closed = np.isfinite(starts[:, k + 1])
        gaps.append((np.where(closed, stops[:, k], np.inf), np.where(closed, starts[:, k + 1], np.inf)))
    last = np.max(np.where(np.isfinite(stops), stops, 0.0), axis=1)
    gaps.append((last, np.full(len(last), np.inf)))
    return gaps


def transmission_energy(spec: StableOperatorSpec, u: ScalarField, g: ScalarField, domain: Domain,
                        q: Optional[QuadratureSpec] = None, panels: int = 4, order: int = 6) -> EnergyReport:
    """(1-s) int_O d_x^s int int 1_{O^c}(x+r theta) (u(x) - g(x+r theta))^2 |r|^(-1-2s) mu(dtheta) dr dx"""
    q = q or QuadratureSpec(angular_nodes=64, gauss_order=12)
    s = spec.s
    x, wx = domain.volume_nodes(panels, order)
    ux = u(x)
    weight_x = wx * domain.dist(x) ** s
    dirs, weights = folded_nodes(spec, q.angular_nodes)
    far = g.far_radius()
    reach = None if far is None else far + float(np.max(np.linalg.norm(x, axis=1)))
    t_edges = geometric_edges(0.0, 1.0, "left", levels=20, ratio=0.35)

    def segment(rows, lo, hi, unbounded, theta, sign, t_base, tw_base, gauss_order) -> float:
        if unbounded:
            if reach is None:
                t = np.broadcast_to(t_base, (len(rows), len(t_base)))
                wt = np.broadcast_to(tw_base, (len(rows), len(t_base)))
            else:
                t_min = np.clip((lo / reach) ** (2.0 * s), 0.0, 1.0)[:, None]
                t = t_min + (1.0 - t_min) * t_base[None, :]
                wt = (1.0 - t_min) * tw_base[None, :]
            r = lo[:, None] * t ** (-1.0 / (2.0 * s))
            kernel_w = lo[:, None] ** (-2.0 * s) / (2.0 * s) * wt
        else:
            r, w = _log_rule(lo, hi, gauss_order)
            kernel_w = r ** (-1.0 - 2.0 * s) * w
        y = x[rows, None, :] + sign * r[..., None] * theta[None, None, :]
        gy = g(y.reshape(-1, domain.dimension)).reshape(r.shape)
        acc = np.sum((ux[rows, None] - gy) ** 2 * kernel_w, axis=1)
        return float(weight_x[rows] @ acc)

    def directional(gauss_order: int) -> float:
        total = 0.0
        t_base, tw_base = panel_rule(t_edges, gauss_order // 2 + 2)
        for theta, weight in zip(dirs, weights):
            for sign in (1.0, -1.0):
                pieces = domain.chords(x, sign * theta)
                for a, b in exterior_gaps(pieces):
                    live = np.isfinite(a) & (b > a) & (a > 0)
                    if not live.any():
                        continue
                    for unbounded in (True, False):
                        rows = np.flatnonzero(live & (np.isinf(b) == unbounded))
                        if len(rows):
                            total += 0.5 * weight * segment(rows, a[rows], b[rows], unbounded, theta, sign,
                                                            t_base, tw_base, gauss_order)
        return (1.0 - s) * total

    fine = directional(q.gauss_order)
    coarse = directional(max(4, q.gauss_order - 4))
    return EnergyReport(fine, CHORDS, abs(fine - coarse), {"s": s, "panels": panels, "order": order})


def l2_distance(u: ScalarField, v: ScalarField, domain: Domain, panels: int = 8, order: int = 8) -> float:
    """||u - v||_{L2(domain)}"""
    x, w = domain.volume_nodes(panels, order)
    return float(np.sqrt(w @ (u(x) - v(x)) ** 2))


def l2_norm(u: ScalarField, domain: Domain, panels: int = 8, order: int = 8) -> float:
    x, w = domain.volume_nodes(panels, order)
    return float(np.sqrt(w @ u(x) ** 2))
