from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma

from core.errors import InvalidScenario, TailUnknown
from core.geometry import Domain, as_points

SMOOTH = "smooth"
C2_NEAR_X = "C2-near-x"
C0 = "C0"
REGULARITY_ORDER = {C0: 0, C2_NEAR_X: 1, SMOOTH: 2}

COMPACT = "compact"
BOUNDED = "bounded"
VANISHING = "vanishing"

PointFn = Callable[[np.ndarray], np.ndarray]
TailFn = Callable[[np.ndarray, np.ndarray, float, float], float]
BreakFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class ScalarField:
    """Point-evaluable function on R^d with the metadata the integrators rely on

    tail(x, theta, R, s) must return the integral over r > R of
    (u(x + r theta) + u(x - r theta)) r^(-1-2s); breaks(x, theta) returns the |r|
    where r -> u(x + r theta) or u(x - r theta) is not smooth.
    """

    func: PointFn
    dimension: int
    regularity: str = SMOOTH
    support_radius: Optional[float] = None
    decay: str = BOUNDED
    bound: Optional[float] = None
    effective_radius: Optional[float] = None
    tail: Optional[TailFn] = None
    breaks: Optional[BreakFn] = None
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    laplacian: Optional[PointFn] = None
    constant_value: Optional[float] = None
    name: str = "field"

    def __post_init__(self):
        if self.regularity not in REGULARITY_ORDER:
            raise InvalidScenario(f"unknown regularity tag {self.regularity!r}")
        if self.decay not in (COMPACT, BOUNDED, VANISHING):
            raise InvalidScenario(f"unknown decay tag {self.decay!r}")
        if self.decay == COMPACT and self.support_radius is None:
            raise InvalidScenario("compact fields need a support_radius", {"field": self.name})

    def __call__(self, points) -> np.ndarray:
        p = as_points(points, self.dimension)
        return np.asarray(self.func(p), dtype=float).reshape(len(p))

    def value(self, x) -> float:
        return float(self(as_points(x, self.dimension)[:1])[0])

    @property
    def is_constant(self) -> bool:
        return self.constant_value is not None

    @property
    def is_zero(self) -> bool:
        return self.constant_value == 0.0

    def far_radius(self) -> Optional[float]:
        """Radius outside which the field is (numerically) zero"""
        if self.decay == COMPACT:
            return self.support_radius
        if self.decay == VANISHING:
            return self.effective_radius
        return None

    def break_points(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        if self.breaks is None:
            return np.zeros(0)
        return np.abs(np.asarray(self.breaks(x, theta), dtype=float).ravel())

    def scaled(self, c: float) -> "ScalarField":
        c = float(c)
        return replace(
            self,
            func=lambda p: c * self.func(p),
            bound=None if self.bound is None else abs(c) * self.bound,
            tail=None if self.tail is None else (lambda x, th, R, s: c * self.tail(x, th, R, s)),
            gradient=None if self.gradient is None else (lambda p: c * self.gradient(p)),
            laplacian=None if self.laplacian is None else (lambda p: c * self.laplacian(p)),
            constant_value=None if self.constant_value is None else c * self.constant_value,
            name=f"{c:g}*{self.name}",
        )

    def plus(self, other: "ScalarField") -> "ScalarField":
        decay, support = _combined_decay(self, other, product=False)
        tail = None
        if self.tail is not None and other.tail is not None:
            tail = lambda x, th, R, s: self.tail(x, th, R, s) + other.tail(x, th, R, s)
        return ScalarField(
            func=lambda p: self.func(p) + other.func(p),
            dimension=self.dimension,
            regularity=_min_regularity(self, other),
            support_radius=support,
            decay=decay,
            bound=_sum_or_none(self.bound, other.bound),
            effective_radius=_max_or_none(self.far_radius(), other.far_radius()) if decay == VANISHING else None,
            tail=tail,
            breaks=_merged_breaks(self, other),
            gradient=None if self.gradient is None or other.gradient is None
            else (lambda p: self.gradient(p) + other.gradient(p)),
            laplacian=None if self.laplacian is None or other.laplacian is None
            else (lambda p: self.laplacian(p) + other.laplacian(p)),
            constant_value=_sum_or_none(self.constant_value, other.constant_value),
            name=f"({self.name}+{other.name})",
        )

    def times(self, other: "ScalarField") -> "ScalarField":
        decay, support = _combined_decay(self, other, product=True)
        gradient = laplacian = None
        if self.gradient is not None and other.gradient is not None:
            gradient = lambda p: (self.gradient(p) * other.func(p)[:, None]
                                  + other.gradient(p) * self.func(p)[:, None])
            if self.laplacian is not None and other.laplacian is not None:
                laplacian = lambda p: (self.laplacian(p) * other.func(p) + other.laplacian(p) * self.func(p)
                                       + 2.0 * np.sum(self.gradient(p) * other.gradient(p), axis=1))
        return ScalarField(
            func=lambda p: self.func(p) * other.func(p),
            dimension=self.dimension,
            regularity=_min_regularity(self, other),
            support_radius=support,
            decay=decay,
            bound=None if self.bound is None or other.bound is None else self.bound * other.bound,
            effective_radius=_min_or_none(self.effective_radius, other.effective_radius),
            breaks=_merged_breaks(self, other),
            gradient=gradient,
            laplacian=laplacian,
            constant_value=None if self.constant_value is None or other.constant_value is None
            else self.constant_value * other.constant_value,
            name=f"{self.name}*{other.name}",
        )

    def squared(self) -> "ScalarField":
        return self.times(self)

    def dilated(self, lam: float) -> "ScalarField":
        """x -> u(lam x)"""
        lam = float(lam)
        tail = None
        if self.tail is not None:
            tail = lambda x, th, R, s: lam ** (2.0 * s) * self.tail(lam * x, th, lam * R, s)
        return replace(
            self,
            func=lambda p: self.func(lam * p),
            support_radius=None if self.support_radius is None else self.support_radius / lam,
            effective_radius=None if self.effective_radius is None else self.effective_radius / lam,
            tail=tail,
            breaks=None if self.breaks is None else (lambda x, th: self.break_points(lam * x, th) / lam),
            gradient=None if self.gradient is None else (lambda p: lam * self.gradient(lam * p)),
            laplacian=None if self.laplacian is None else (lambda p: lam ** 2 * self.laplacian(lam * p)),
            name=f"{self.name}({lam:g}x)",
        )

    def shifted(self, h) -> "ScalarField":
        """x -> u(x - h)"""
        h = np.asarray(h, dtype=float).ravel()
        shift = float(np.linalg.norm(h))
        return replace(
            self,
            func=lambda p: self.func(p - h),
            support_radius=None if self.support_radius is None else self.support_radius + shift,
            effective_radius=None if self.effective_radius is None else self.effective_radius + shift,
            tail=None if self.tail is None else (lambda x, th, R, s: self.tail(x - h, th, R, s)),
            breaks=None if self.breaks is None else (lambda x, th: self.break_points(x - h, th)),
            gradient=None if self.gradient is None else (lambda p: self.gradient(p - h)),
            laplacian=None if self.laplacian is None else (lambda p: self.laplacian(p - h)),
            name=f"{self.name}(x-h)",
        )

    def describe(self) -> Dict:
        return {
            "name": self.name,
            "regularity": self.regularity,
            "decay": self.decay,
            "support_radius": self.support_radius,
        }


def _min_regularity(a: ScalarField, b: ScalarField) -> str:
    return a.regularity if REGULARITY_ORDER[a.regularity] <= REGULARITY_ORDER[b.regularity] else b.regularity


def _sum_or_none(a, b):
    return None if a is None or b is None else a + b


def _max_or_none(a, b):
    if a is None:
        return b
    return a if b is None else max(a, b)


def _min_or_none(a, b):
    if a is None:
        return b
    return a if b is None else min(a, b)


def _combined_decay(a: ScalarField, b: ScalarField, product: bool):
    if product:
        if a.decay == COMPACT or b.decay == COMPACT:
            radii = [f.support_radius for f in (a, b) if f.decay == COMPACT]
            return COMPACT, min(radii)
        if a.decay == VANISHING or b.decay == VANISHING:
            return VANISHING, None
        return BOUNDED, None
    if a.decay == COMPACT and b.decay == COMPACT:
        return COMPACT, max(a.support_radius, b.support_radius)
    if a.decay == BOUNDED or b.decay == BOUNDED:
        return BOUNDED, None
    return VANISHING, None


def _merged_breaks(a: ScalarField, b: ScalarField) -> Optional[BreakFn]:
    if a.breaks is None and b.breaks is None:
        return None
    return lambda x, th: np.concatenate([a.break_points(x, th), b.break_points(x, th)])


def _sphere_breaks(center: np.ndarray, radius: float) -> BreakFn:
    """|r| where x +- r theta crosses the sphere |y - center| = radius"""

    def breaks(x, theta):
        offset = np.asarray(x, dtype=float).ravel() - center
        b = float(offset @ theta)
        c = float(offset @ offset) - radius ** 2
        disc = b * b - c
        if disc <= 0:
            return np.zeros(0)
        root = np.sqrt(disc)
        return np.abs(np.array([-b - root, -b + root]))

    return breaks


def constant(value: float, dimension: int) -> ScalarField:
    value = float(value)
    if value == 0.0:
        return zero(dimension)
    return ScalarField(
        func=lambda p: np.full(len(p), value),
        dimension=dimension,
        decay=BOUNDED,
        bound=abs(value),
        tail=lambda x, th, R, s: 2.0 * value * R ** (-2.0 * s) / (2.0 * s),
        gradient=lambda p: np.zeros_like(p),
        laplacian=lambda p: np.zeros(len(p)),
        constant_value=value,
        name=f"const({value:g})",
    )


def zero(dimension: int) -> ScalarField:
    return ScalarField(
        func=lambda p: np.zeros(len(p)),
        dimension=dimension,
        support_radius=0.0,
        decay=COMPACT,
        bound=0.0,
        tail=lambda x, th, R, s: 0.0,
        gradient=lambda p: np.zeros_like(p),
        laplacian=lambda p: np.zeros(len(p)),
        constant_value=0.0,
        name="zero",
    )


def gaussian(dimension: int, center=None, sigma: float = 0.25, amplitude: float = 1.0) -> ScalarField:
    """amplitude * exp(-|x - center|^2 / sigma^2)"""
    c = np.zeros(dimension) if center is None else np.asarray(center, dtype=float).ravel()

    def func(p):
        return amplitude * np.exp(-np.sum((p - c) ** 2, axis=1) / sigma ** 2)

    def gradient(p):
        return func(p)[:, None] * (-2.0 * (p - c) / sigma ** 2)

    def laplacian(p):
        q = np.sum((p - c) ** 2, axis=1) / sigma ** 2
        return func(p) * (4.0 * q - 2.0 * dimension) / sigma ** 2

    return ScalarField(
        func=func,
        dimension=dimension,
        decay=VANISHING,
        bound=abs(amplitude),
        # exp(-40) is below double precision relative to the peak
        effective_radius=float(np.linalg.norm(c) + sigma * np.sqrt(40.0)),
        gradient=gradient,
        laplacian=laplacian,
        name=f"gaussian({sigma:g})",
    )


def bump(dimension: int, center=None, radius: float = 0.5, amplitude: float = 1.0) -> ScalarField:
    """amplitude * exp(1 - 1/(1 - |x - c|^2/radius^2)) inside the ball, 0 outside"""
    c = np.zeros(dimension) if center is None else np.asarray(center, dtype=float).ravel()

    def parts(p):
        q = np.sum((p - c) ** 2, axis=1) / radius ** 2
        inside = q < 1.0
        safe = np.where(inside, q, 0.0)
        value = np.where(inside, amplitude * np.exp(1.0 - 1.0 / (1.0 - safe)), 0.0)
        return q, inside, safe, value

    def func(p):
        return parts(p)[3]

    def gradient(p):
        _, inside, safe, value = parts(p)
        dq = np.where(inside, -value / (1.0 - safe) ** 2, 0.0)
        return dq[:, None] * 2.0 * (p - c) / radius ** 2

    def laplacian(p):
        _, inside, safe, value = parts(p)
        one_minus = np.where(inside, 1.0 - safe, 1.0)
        first = -value / one_minus ** 2
        second = value * (2.0 * safe - 1.0) / one_minus ** 4
        return np.where(inside, second * 4.0 * safe / radius ** 2 + first * 2.0 * dimension / radius ** 2, 0.0)

    return ScalarField(
        func=func,
        dimension=dimension,
        support_radius=float(np.linalg.norm(c) + radius),
        decay=COMPACT,
        bound=abs(amplitude),
        gradient=gradient,
        laplacian=laplacian,
        name=f"bump({radius:g})",
    )


def plane_wave(xi, x0=None) -> ScalarField:
    """cos(xi . (x - x0)); the far tail is the oscillatory integral of r^(-1-2s)"""
    xi = np.asarray(xi, dtype=float).ravel()
    dimension = len(xi)
    x0 = np.zeros(dimension) if x0 is None else np.asarray(x0, dtype=float).ravel()

    def tail(x, theta, R, s):
        phase = float(np.cos(xi @ (np.asarray(x, dtype=float).ravel() - x0)))
        k = abs(float(xi @ theta))
        if k == 0.0:
            return 2.0 * phase * R ** (-2.0 * s) / (2.0 * s)
        oscillatory, _ = quad(lambda t: t ** (-1.0 - 2.0 * s), k * R, np.inf, weight="cos", wvar=1.0)
        return 2.0 * phase * k ** (2.0 * s) * oscillatory

    return ScalarField(
        func=lambda p: np.cos((p - x0) @ xi),
        dimension=dimension,
        decay=BOUNDED,
        bound=1.0,
        tail=tail,
        gradient=lambda p: -np.sin((p - x0) @ xi)[:, None] * xi,
        laplacian=lambda p: -float(xi @ xi) * np.cos((p - x0) @ xi),
        name="plane_wave",
    )


def linear(dimension: int, axis: int = 0) -> ScalarField:
    """x_axis; the classical harmonic extension of cos(theta) on the unit disc"""
    e = np.zeros(dimension)
    e[axis] = 1.0
    return ScalarField(
        func=lambda p: p[:, axis].copy(),
        dimension=dimension,
        decay=BOUNDED,
        gradient=lambda p: np.tile(e, (len(p), 1)),
        laplacian=lambda p: np.zeros(len(p)),
        name=f"x{axis + 1}",
    )


def capped_linear(dimension: int = 1, cap: float = 1.0) -> ScalarField:
    """Tent continuation of x_1: slope 1 on |x_1| <= cap, back to 0 at 2 cap"""

    def func(p):
        t = p[:, 0]
        a = np.abs(t)
        return np.sign(t) * np.where(a <= cap, a, np.maximum(2.0 * cap - a, 0.0))

    return ScalarField(
        func=func,
        dimension=dimension,
        regularity=C0,
        support_radius=2.0 * cap if dimension == 1 else None,
        decay=COMPACT if dimension == 1 else BOUNDED,
        bound=cap,
        name="capped_linear",
    )


def ball_torsion(dimension: int, s: float, center=None, radius: float = 1.0) -> ScalarField:
    """(R^2 - |x - c|^2)_+^s / kappa, the fractional-Laplacian torsion function of a ball"""
    c = np.zeros(dimension) if center is None else np.asarray(center, dtype=float).ravel()
    kappa = 4.0 ** s * gamma(1.0 + s) * gamma(dimension / 2.0 + s) / gamma(dimension / 2.0)
    return ScalarField(
        func=lambda p: np.maximum(radius ** 2 - np.sum((p - c) ** 2, axis=1), 0.0) ** s / kappa,
        dimension=dimension,
        regularity=C2_NEAR_X,
        support_radius=float(np.linalg.norm(c) + radius),
        decay=COMPACT,
        bound=radius ** (2.0 * s) / kappa,
        breaks=_sphere_breaks(c, radius),
        name=f"ball_torsion(s={s:g})",
    )


def classical_torsion(dimension: int, center=None, radius: float = 1.0) -> ScalarField:
    """(R^2 - |x - c|^2)/(2 d), the s -> 1 limit of the torsion function"""
    c = np.zeros(dimension) if center is None else np.asarray(center, dtype=float).ravel()
    return ScalarField(
        func=lambda p: np.maximum(radius ** 2 - np.sum((p - c) ** 2, axis=1), 0.0) / (2.0 * dimension),
        dimension=dimension,
        regularity=C2_NEAR_X,
        support_radius=float(np.linalg.norm(c) + radius),
        decay=COMPACT,
        breaks=_sphere_breaks(c, radius),
        name="classical_torsion",
    )


def distance_power(domain: Domain, p: float) -> ScalarField:
    """d_x^p inside the domain, 0 outside"""

    def func(points):
        inside, d, _ = domain.distance(points)
        return np.where(inside, d ** p, 0.0)

    def breaks(x, theta):
        pieces = domain.chords(np.asarray(x, dtype=float)[None, :], theta)
        ends = [np.array([r0[0], r1[0]]) for r0, r1 in pieces if r1[0] > r0[0]]
        return np.concatenate(ends) if ends else np.zeros(0)

    lo, hi = domain.bounding_box()
    return ScalarField(
        func=func,
        dimension=domain.dimension,
        regularity=C0,
        support_radius=float(max(np.linalg.norm(lo), np.linalg.norm(hi))),
        decay=COMPACT,
        breaks=breaks,
        name=f"d^{p:g}",
    )


def barrier(dimension: int, x0, delta: float, K: float = 1.0) -> ScalarField:
    """K^-1 max{(delta/2)^2 - |x - x0|^2, -2 delta}"""
    x0 = np.asarray(x0, dtype=float).ravel()
    floor = -2.0 * delta
    kink = float(np.sqrt((delta / 2.0) ** 2 + 2.0 * delta))

    def func(p):
        q = (delta / 2.0) ** 2 - np.sum((p - x0) ** 2, axis=1)
        return np.maximum(q, floor) / K

    def tail(x, theta, R, s):
        offset = float(np.linalg.norm(np.asarray(x, dtype=float).ravel() - x0))
        if R < offset + kink:
            raise TailUnknown("barrier tail requested inside the paraboloid cap", {"R": R})
        return 2.0 * (floor / K) * R ** (-2.0 * s) / (2.0 * s)

    def laplacian(p):
        inside = np.sum((p - x0) ** 2, axis=1) < kink ** 2
        return np.where(inside, -2.0 * dimension / K, 0.0)

    return ScalarField(
        func=func,
        dimension=dimension,
        regularity=C2_NEAR_X,
        decay=BOUNDED,
        bound=max(abs(floor), (delta / 2.0) ** 2) / K,
        tail=tail,
        breaks=_sphere_breaks(x0, kink),
        laplacian=laplacian,
        name=f"barrier(delta={delta:g},K={K:g})",
    )


def cutoff_profile(r: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """C-infinity step: 1 on r <= inner, 0 on r >= outer"""
    t = np.clip((np.asarray(r, dtype=float) - inner) / (outer - inner), 0.0, 1.0)

    def psi(z):
        return np.where(z > 0, np.exp(-1.0 / np.where(z > 0, z, 1.0)), 0.0)

    return psi(1.0 - t) / (psi(1.0 - t) + psi(t))


def radial_extension(boundary_datum: Callable[[np.ndarray], np.ndarray], dimension: int,
                     cutoff=(1.5, 2.0), name: str = "Eg") -> ScalarField:
    """g(x/|x|) times a smooth cutoff in |x| (no cutoff when cutoff is None)"""

    def func(p):
        norm = np.linalg.norm(p, axis=1)
        e1 = np.zeros(dimension)
        e1[0] = 1.0
        unit = np.where(norm[:, None] > 0, p / np.where(norm > 0, norm, 1.0)[:, None], e1)
        value = np.asarray(boundary_datum(unit), dtype=float)
        if cutoff is None:
            return value
        return value * cutoff_profile(norm, *cutoff)

    return ScalarField(
        func=func,
        dimension=dimension,
        regularity=C2_NEAR_X,
        support_radius=None if cutoff is None else float(cutoff[1]),
        decay=BOUNDED if cutoff is None else COMPACT,
        bound=1.0,
        name=name,
    )


def cos_theta(points: np.ndarray) -> np.ndarray:
    """Boundary datum cos(theta) = z_1/|z| on the unit circle"""
    points = np.atleast_2d(points)
    return points[:, 0] / np.linalg.norm(points, axis=1)


def optimality_profile(domain: Domain, s: float, eps: float) -> ScalarField:
    """1_{collar} d^(-1+s+eps): in L^2(tau_s) iff eps > (1-s)/2"""
    exponent = -1.0 + s + eps

    def func(points):
        inside, d, _ = domain.distance(points)
        collar = (~inside) & (d > 0) & (d < 1.0)
        return np.where(collar, np.where(collar, d, 1.0) ** exponent, 0.0)

    lo, hi = domain.bounding_box()
    return ScalarField(
        func=func,
        dimension=domain.dimension,
        regularity=C0,
        support_radius=float(max(np.linalg.norm(lo), np.linalg.norm(hi)) + 1.0),
        decay=COMPACT,
        name=f"collar_power(eps={eps:g})",
    )


def paraboloid_test(dimension: int, radius: float = 1.0) -> ScalarField:
    """R^2 - |x|^2: vanishes on the sphere, Laplacian -2d, normal derivative -2R"""
    return ScalarField(
        func=lambda p: radius ** 2 - np.sum(p * p, axis=1),
        dimension=dimension,
        decay=BOUNDED,
        gradient=lambda p: -2.0 * p,
        laplacian=lambda p: np.full(len(p), -2.0 * dimension),
        name="paraboloid",
    )


def field_from_descriptor(data: Dict, dimension: int, s: Optional[float] = None,
                          domain: Optional[Domain] = None) -> ScalarField:
    """Build a field from its JSON descriptor, e.g. {"kind": "bump", "radius": 0.5}"""
    if isinstance(data, (int, float)):
        return constant(float(data), dimension)
    kind = data.get("kind")
    scale = float(data.get("scale", 1.0))
    if kind == "constant":
        field = constant(float(data.get("value", 1.0)), dimension)
    elif kind == "zero":
        field = zero(dimension)
    elif kind == "gaussian":
        field = gaussian(dimension, data.get("center"), float(data.get("sigma", 0.25)),
                         float(data.get("amplitude", 1.0)))
    elif kind == "bump":
        field = bump(dimension, data.get("center"), float(data.get("radius", 0.5)),
                     float(data.get("amplitude", 1.0)))
    elif kind == "plane_wave":
        field = plane_wave(data["xi"], data.get("x0"))
    elif kind == "linear":
        field = linear(dimension, int(data.get("axis", 0)))
    elif kind == "cos_theta":
        cutoff = data.get("cutoff", [1.5, 2.0])
        field = radial_extension(cos_theta, dimension, None if cutoff is None else tuple(cutoff), "E[cos]")
    elif kind == "optimality_profile":
        if domain is None or s is None:
            raise InvalidScenario("optimality_profile needs the domain and s")
        field = optimality_profile(domain, s, float(data["eps"]))
    elif kind == "sum":
        terms = [field_from_descriptor(t, dimension, s, domain) for t in data["terms"]]
        field = terms[0]
        for term in terms[1:]:
            field = field.plus(term)
    else:
        raise InvalidScenario(f"unknown field kind {kind!r}", {"descriptor": data})
    return field if scale == 1.0 else field.scaled(scale)
