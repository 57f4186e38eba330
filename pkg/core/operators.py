from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.config import SUPPORT_THRESHOLD
from core.errors import InsufficientRegularity, PointInsideDomain, SupportViolation, TailUnknown
from core.fields import C0, VANISHING, ScalarField
from core.geometry import Domain, as_points
from core.measures import StableOperatorSpec, measure_nodes
from core.quadrature import (QuadratureSpec, gauss_jacobi_left, geometric_edges, panel_rule,
                             radial_rule)
from utils.logger import get_logger
from utils.parallel import ordered_map

logger = get_logger("lab.operators")


@dataclass(frozen=True)
class Estimate:
    """Refined value plus the change under one refinement step"""

    value: float
    error: float = 0.0

    def __float__(self) -> float:
        return self.value

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class GaussGreenReport:
    residual: float
    scale: float
    error: float
    terms: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return asdict(self)


def folded_nodes(spec: StableOperatorSpec, angular_nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """One direction per +-theta pair with the pair's total weight

    Every integrand used here is even under (theta, r) -> (-theta, -r), so the
    symmetrized measure can be folded onto a half sphere.
    """
    dirs, weights = measure_nodes(spec.measure, angular_nodes)
    nonzero = np.abs(dirs) > 1e-14
    first = np.argmax(nonzero, axis=1)
    keep = dirs[np.arange(len(dirs)), first] > 0
    return dirs[keep], 2.0 * weights[keep]


def _unit_rule(q: QuadratureSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Rule on [0, 1] graded toward both ends"""
    return panel_rule(geometric_edges(0.0, 1.0, "both", levels=6 + q.panels_per_dyad, ratio=0.25), q.gauss_order)


def _far_cut(u: ScalarField, x: np.ndarray, q: QuadratureSpec) -> Tuple[float, bool]:
    """Outer radius R and whether the field vanishes identically past it"""
    far = u.far_radius()
    norm_x = float(np.linalg.norm(x))
    if far is not None:
        return max(norm_x + far, q.inner_cut), True
    if u.decay == VANISHING:
        R = q.outer_cut
        probe_dirs = np.eye(u.dimension)
        while R < 2.0 ** 30:
            probe = np.vstack([x + R * probe_dirs, x - R * probe_dirs])
            if np.max(np.abs(u(probe))) <= 1e-16 * max(1.0, abs(u.value(x))):
                return R, True
            R *= 2.0
        raise TailUnknown("vanishing field does not decay within 2^30", {"field": u.name})
    return max(q.outer_cut, 2.0 * norm_x), False


def _d2_integral(u: ScalarField, x: np.ndarray, ux: float, dirs: np.ndarray, weights: np.ndarray,
                 s: float, R: float, q: QuadratureSpec) -> float:
    """Sum over directions of the integral over (0, R) of D2(r) r^(-1-2s)"""
    t, wt = gauss_jacobi_left(q.gauss_order, 1.0 - 2.0 * s)

    def second_difference(theta_rows: np.ndarray, r: np.ndarray) -> np.ndarray:
        steps = r[None, :, None] * theta_rows[:, None, :]
        plus = u((x + steps).reshape(-1, len(x))).reshape(len(theta_rows), len(r))
        minus = u((x - steps).reshape(-1, len(x))).reshape(len(theta_rows), len(r))
        return plus + minus - 2.0 * ux

    if u.breaks is None:
        delta = min(q.inner_cut, R)
        r_in = delta * t
        inner = delta ** (2.0 - 2.0 * s) * (second_difference(dirs, r_in) / r_in ** 2) @ wt
        nodes, w = radial_rule(delta, R, q)
        middle = (second_difference(dirs, nodes) * nodes ** (-1.0 - 2.0 * s)) @ w if len(nodes) else 0.0
        return float(weights @ (inner + middle))

    total = 0.0
    for theta, weight in zip(dirs, weights):
        breaks = u.break_points(x, theta)
        breaks = breaks[breaks > 0]
        delta = min(q.inner_cut, R, 0.5 * float(breaks.min()) if breaks.size else np.inf)
        r_in = delta * t
        inner = delta ** (2.0 - 2.0 * s) * float((second_difference(theta[None, :], r_in)[0] / r_in ** 2) @ wt)
        nodes, w = radial_rule(delta, R, q, breaks)
        middle = float((second_difference(theta[None, :], nodes)[0] * nodes ** (-1.0 - 2.0 * s)) @ w) \
            if len(nodes) else 0.0
        total += weight * (inner + middle)
    return total


def _apply_once(spec: StableOperatorSpec, u: ScalarField, x: np.ndarray, q: QuadratureSpec) -> Tuple[float, float]:
    s = spec.s
    dirs, weights = folded_nodes(spec, q.angular_nodes)
    ux = u.value(x)
    R, vanishes = _far_cut(u, x, q)
    if not vanishes and u.tail is not None:
        # tail hooks are exact for any R
        R = min(R, max(4.0, 4.0 * q.inner_cut))
    body = _d2_integral(u, x, ux, dirs, weights, s, R, q)
    constant_tail = -2.0 * ux * R ** (-2.0 * s) / (2.0 * s) * float(np.sum(weights))
    tail_error = 0.0
    if vanishes:
        tail = constant_tail
    elif u.tail is not None:
        tail = constant_tail + sum(w * u.tail(x, th, R, s) for th, w in zip(dirs, weights))
    elif u.bound is not None:
        tail = constant_tail
        tail_error = (1.0 - s) * 2.0 * u.bound * R ** (-2.0 * s) / (2.0 * s) * float(np.sum(weights))
    else:
        raise TailUnknown("bounded field without tail data or bound", {"field": u.name, "R": R})
    return -(1.0 - s) * (body + tail), tail_error


def apply_As(spec: StableOperatorSpec, u: ScalarField, x, q: Optional[QuadratureSpec] = None) -> Estimate:
    """Principal value of A_s u at x by symmetric second differences"""
    q = q or QuadratureSpec()
    x = as_points(x, u.dimension)[0]
    if u.regularity == C0:
        raise InsufficientRegularity("apply_As needs a field that is C^2 near x", {"field": u.name})
    if u.is_constant:
        return Estimate(0.0, 0.0)
    base, _ = _apply_once(spec, u, x, q)
    refined, tail_error = _apply_once(spec, u, x, q.refined())
    return Estimate(refined, abs(refined - base) + tail_error)


def apply_As_many(spec: StableOperatorSpec, u: ScalarField, points, q: Optional[QuadratureSpec] = None,
                  n_jobs: Optional[int] = None) -> List[Estimate]:
    points = as_points(points, u.dimension)
    return ordered_map(lambda x: apply_As(spec, u, x, q), list(points), n_jobs)


def scaling_check(spec: StableOperatorSpec, u: ScalarField, x, lam: float,
                  q: Optional[QuadratureSpec] = None) -> Tuple[Estimate, Estimate]:
    """(A_s[u(lam .)](x), lam^{2s} A_s u(lam x))"""
    x = as_points(x, u.dimension)[0]
    left = apply_As(spec, u.dilated(lam), x, q)
    right = apply_As(spec, u, lam * x, q)
    factor = lam ** (2.0 * spec.s)
    return left, Estimate(factor * right.value, factor * right.error)


def translation_check(spec: StableOperatorSpec, u: ScalarField, x, h,
                      q: Optional[QuadratureSpec] = None) -> Tuple[Estimate, Estimate]:
    """(A_s[u(. - h)](x + h), A_s u(x))"""
    x = as_points(x, u.dimension)[0]
    h = np.asarray(h, dtype=float).ravel()
    return apply_As(spec, u.shifted(h), x + h, q), apply_As(spec, u, x, q)


def _carre_once(spec: StableOperatorSpec, u: ScalarField, x: np.ndarray, q: QuadratureSpec) -> Tuple[float, float]:
    s = spec.s
    dirs, weights = folded_nodes(spec, q.angular_nodes)
    ux = u.value(x)
    R, vanishes = _far_cut(u, x, q)
    smooth = u.regularity != C0
    beta = 1.0 - 2.0 * s if smooth else -2.0 * s
    power = 2.0 if smooth else 1.0
    t, wt = gauss_jacobi_left(q.gauss_order, beta)
    total = 0.0
    for theta, weight in zip(dirs, weights):
        def squares(r):
            plus = u(x + r[:, None] * theta)
            minus = u(x - r[:, None] * theta)
            return (ux - plus) ** 2 + (ux - minus) ** 2

        breaks = u.break_points(x, theta)
        breaks = breaks[breaks > 0]
        delta = min(q.inner_cut, R, 0.5 * float(breaks.min()) if breaks.size else np.inf)
        r_in = delta * t
        inner = delta ** (beta + 1.0) * float((squares(r_in) / r_in ** power) @ wt)
        nodes, w = radial_rule(delta, R, q, breaks)
        middle = float((squares(nodes) * nodes ** (-1.0 - 2.0 * s)) @ w) if len(nodes) else 0.0
        total += weight * (inner + middle)
    mass = float(np.sum(weights)) * R ** (-2.0 * s) / (2.0 * s)
    if vanishes:
        return (1.0 - s) * (total + 2.0 * ux ** 2 * mass), 0.0
    if u.bound is None:
        raise TailUnknown("carre_du_champ needs a bound for non-compact fields", {"field": u.name})
    upper = 2.0 * (abs(ux) + u.bound) ** 2 * mass
    return (1.0 - s) * (total + 0.5 * upper), (1.0 - s) * 0.5 * upper


def carre_du_champ(spec: StableOperatorSpec, u: ScalarField, x, q: Optional[QuadratureSpec] = None) -> Estimate:
    """Gamma_s(u)(x), the kernel integral of (u(x) - u(x + h))^2"""
    q = q or QuadratureSpec()
    x = as_points(x, u.dimension)[0]
    if u.regularity == C0 and spec.s >= 0.5:
        raise InsufficientRegularity("C0 fields need s < 1/2 for the carre du champ", {"s": spec.s})
    if u.is_constant:
        return Estimate(0.0, 0.0)
    base, _ = _carre_once(spec, u, x, q)
    refined, tail_error = _carre_once(spec, u, x, q.refined())
    return Estimate(max(refined, 0.0), abs(refined - base) + tail_error)


def _require_exterior(domain: Domain, points: np.ndarray, what: str) -> Tuple[np.ndarray, np.ndarray]:
    inside, d, _ = domain.distance(points)
    bad = inside | (d <= 0.0)
    if np.any(bad):
        raise PointInsideDomain(f"{what} needs points outside the closed domain",
                                {"point": points[int(np.argmax(bad))].tolist()})
    return inside, d


def _normal_derivative_once(spec: StableOperatorSpec, domain: Domain, u: ScalarField, points: np.ndarray,
                            q: QuadratureSpec) -> np.ndarray:
    s = spec.s
    dirs, weights = folded_nodes(spec, q.angular_nodes)
    t, wt = _unit_rule(q)
    ux = u(points)
    total = np.zeros(len(points))
    for theta, weight in zip(dirs, weights):
        for r0, r1 in domain.chords(points, theta):
            hit = r1 > r0
            if not np.any(hit):
                continue
            idx = np.nonzero(hit)[0]
            a = np.minimum(np.abs(r0[idx]), np.abs(r1[idx]))
            b = np.maximum(np.abs(r0[idx]), np.abs(r1[idx]))
            sign = np.where(r1[idx] > 0, 1.0, -1.0)
            log_ratio = np.log(b / a)
            rho = a[:, None] * np.exp(log_ratio[:, None] * t[None, :])
            targets = points[idx][:, None, :] + (sign[:, None] * rho)[:, :, None] * theta
            values = u(targets.reshape(-1, points.shape[1])).reshape(rho.shape)
            integrand = (ux[idx][:, None] - values) * rho ** (-2.0 * s)
            total[idx] += weight * log_ratio * (integrand @ wt)
    return (1.0 - s) * total


def normal_derivative_values(spec: StableOperatorSpec, domain: Domain, u: ScalarField, points,
                             q: Optional[QuadratureSpec] = None) -> Tuple[np.ndarray, np.ndarray]:
    """N_s u and its refinement error at many exterior points"""
    q = q or QuadratureSpec()
    points = as_points(points, domain.dimension)
    _require_exterior(domain, points, "normal_derivative")
    if u.is_constant:
        return np.zeros(len(points)), np.zeros(len(points))
    base = _normal_derivative_once(spec, domain, u, points, q)
    refined = _normal_derivative_once(spec, domain, u, points, q.refined())
    return refined, np.abs(refined - base)


def normal_derivative(spec: StableOperatorSpec, domain: Domain, u: ScalarField, x,
                      q: Optional[QuadratureSpec] = None) -> Estimate:
    """Nonlocal normal derivative at one exterior point"""
    values, errors = normal_derivative_values(spec, domain, u, as_points(x, domain.dimension)[:1], q)
    return Estimate(float(values[0]), float(errors[0]))


def _tail_antiderivative(r: np.ndarray, s: float) -> np.ndarray:
    """Odd antiderivative of (1 + |r|)^(-1-2s)"""
    return np.sign(r) * (1.0 - (1.0 + np.abs(r)) ** (-2.0 * s)) / (2.0 * s)


def nu_star(spec: StableOperatorSpec, domain: Domain, x, q: Optional[QuadratureSpec] = None):
    """Tail weight: chord mass of (1 + |r|)^(-1-2s), exact in r"""
    q = q or QuadratureSpec()
    points = as_points(x, domain.dimension)
    s = spec.s
    dirs, weights = folded_nodes(spec, q.angular_nodes)
    total = np.zeros(len(points))
    for theta, weight in zip(dirs, weights):
        for r0, r1 in domain.chords(points, theta):
            hit = r1 > r0
            total += weight * np.where(hit, _tail_antiderivative(r1, s) - _tail_antiderivative(r0, s), 0.0)
    total *= 1.0 - s
    return float(total[0]) if np.ndim(x) <= 1 and len(points) == 1 else total


def tau_s(spec: StableOperatorSpec, domain: Domain, x, q: Optional[QuadratureSpec] = None):
    """Exterior weight: collar singularity (1-s) d^-s on the support of nu_star, plus nu_star"""
    points = as_points(x, domain.dimension)
    _, d = _require_exterior(domain, points, "tau_s")
    nu = np.atleast_1d(nu_star(spec, domain, points, q))
    collar = (d < 1.0) & (nu > SUPPORT_THRESHOLD)
    value = (1.0 - spec.s) * np.where(collar, d, 1.0) ** (-spec.s) * collar + nu
    return float(value[0]) if np.ndim(x) <= 1 and len(points) == 1 else value


def gauss_green_residual(spec: StableOperatorSpec, domain: Domain, phi: ScalarField, w: ScalarField,
                         q: Optional[QuadratureSpec] = None, panels: int = 8, order: int = 8,
                         n_jobs: Optional[int] = None) -> GaussGreenReport:
    """|int_O (A phi) w - int_O phi A w + int_{O^c} N(phi) w| and its error estimate"""
    q = q or QuadratureSpec()
    if phi.is_zero or w.is_zero:
        return GaussGreenReport(0.0, 0.0, 0.0, {"T1": 0.0, "T2": 0.0, "T3": 0.0})
    far = w.far_radius()
    lo, hi = domain.bounding_box()
    extent = float(np.max(np.abs(np.concatenate([lo, hi]))))
    radius = max(far if far is not None else q.outer_cut, extent) * 1.05 + 1e-3
    ext_nodes, ext_weights = domain.exterior_nodes(radius, panels, order)
    if np.max(np.abs(phi(ext_nodes))) > SUPPORT_THRESHOLD:
        raise SupportViolation("phi must vanish outside the domain", {"field": phi.name})

    def terms(n_panels: int):
        nodes, weights = domain.volume_nodes(n_panels, order)
        a_phi = apply_As_many(spec, phi, nodes, q, n_jobs)
        a_w = apply_As_many(spec, w, nodes, q, n_jobs)
        w_vals, phi_vals = w(nodes), phi(nodes)
        t1 = float(weights @ (np.array([e.value for e in a_phi]) * w_vals))
        t2 = float(weights @ (phi_vals * np.array([e.value for e in a_w])))
        inner = float(np.abs(weights) @ (np.array([e.error for e in a_phi]) * np.abs(w_vals)
                                          + np.abs(phi_vals) * np.array([e.error for e in a_w])))
        scale = float(np.abs(weights) @ (np.abs(np.array([e.value for e in a_phi]) * w_vals)
                                          + np.abs(phi_vals * np.array([e.value for e in a_w]))))
        return t1, t2, inner, scale

    t1, t2, inner_error, scale = terms(panels)
    t1_coarse, t2_coarse, _, _ = terms(max(1, panels // 2))
    n_vals, n_err = normal_derivative_values(spec, domain, phi, ext_nodes, q)
    w_ext = w(ext_nodes)
    t3 = float(ext_weights @ (n_vals * w_ext))
    t3_error = float(np.abs(ext_weights) @ (n_err * np.abs(w_ext)))
    scale += float(np.abs(ext_weights) @ np.abs(n_vals * w_ext))
    outer_error = abs(t1 - t1_coarse) + abs(t2 - t2_coarse)
    residual = abs(t1 - t2 + t3)
    logger.debug(f"gauss-green T1={t1:.6e} T2={t2:.6e} T3={t3:.6e}")
    return GaussGreenReport(residual, scale, inner_error + outer_error + t3_error,
                            {"T1": t1, "T2": t2, "T3": t3})
