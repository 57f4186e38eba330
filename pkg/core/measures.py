from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.special import gamma, gammaln

from core.config import DEGENERACY_THRESHOLD, ELLIPTICITY_TOLERANCE
from core.errors import DegenerateMeasure, InvalidMeasure, LabError, ZeroFrequency
from core.quadrature import circle_directions, fibonacci_sphere
from utils.logger import get_logger, warn

logger = get_logger("lab.measures")

Atom = Tuple[Tuple[float, ...], float]


def sphere_area(d: int) -> float:
    """|S^{d-1}|; for d = 1 the counting measure of {-1, +1}"""
    return float(2.0 * np.pi ** (d / 2.0) / gamma(d / 2.0))


def uniform_moment(d: int, s: float) -> float:
    """Integral of |omega . theta|^{2s} over S^{d-1} against surface measure"""
    return float(2.0 * np.pi ** ((d - 1) / 2.0) * np.exp(gammaln(s + 0.5) - gammaln(d / 2.0 + s)))


@dataclass(frozen=True)
class SpectralMeasure:
    """Finite measure on the unit sphere: point masses plus a constant density"""

    dimension: int
    atoms: Tuple[Atom, ...] = ()
    uniform_density: float = 0.0

    def __post_init__(self):
        if self.dimension < 1:
            raise InvalidMeasure("dimension must be >= 1", {"dimension": self.dimension})
        normalized = []
        for direction, weight in self.atoms:
            vec = tuple(float(c) for c in np.atleast_1d(direction))
            if len(vec) != self.dimension:
                raise InvalidMeasure("atom direction has wrong dimension", {"direction": vec})
            if abs(float(np.linalg.norm(vec)) - 1.0) > 1e-12:
                raise InvalidMeasure("atom direction is not a unit vector", {"direction": vec})
            if not float(weight) > 0 or not np.isfinite(weight):
                raise InvalidMeasure("atom weights must be positive and finite", {"weight": weight})
            normalized.append((vec, float(weight)))
        object.__setattr__(self, "atoms", tuple(normalized))
        density = float(self.uniform_density)
        if density < 0 or not np.isfinite(density):
            raise InvalidMeasure("uniform_density must be finite and >= 0", {"uniform_density": density})
        object.__setattr__(self, "uniform_density", density)
        if not self.atoms and density == 0:
            raise InvalidMeasure("measure has neither atoms nor density")

    @property
    def directions(self) -> np.ndarray:
        if not self.atoms:
            return np.zeros((0, self.dimension))
        return np.array([a[0] for a in self.atoms], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms], dtype=float)

    def is_axis_atomic(self) -> bool:
        """True when every atom is a signed coordinate vector"""
        dirs = self.directions
        return bool(np.all(np.sum(np.abs(dirs) > 0, axis=1) == 1)) if len(dirs) else True

    def to_dict(self) -> Dict:
        return {
            "d": self.dimension,
            "atoms": [[list(direction), weight] for direction, weight in self.atoms],
            "uniform_density": self.uniform_density,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "SpectralMeasure":
        if "kind" in data:
            if data["kind"] == "fractional_laplacian":
                return frac_laplacian_measure(int(data["d"]), float(data["s"]))
            if data["kind"] == "axes":
                return axis_measure(int(data["d"]), float(data.get("weight", 1.0)))
            raise InvalidMeasure(f"unknown measure kind {data['kind']}")
        atoms = tuple((tuple(a[0]), float(a[1])) for a in data.get("atoms", []))
        return cls(int(data["d"]), atoms, float(data.get("uniform_density", 0.0)))


@dataclass(frozen=True)
class StableOperatorSpec:
    """Order s and spectral measure; the (1 - s) normalization is always applied"""

    s: float
    measure: SpectralMeasure
    nondegenerate: bool = True
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise LabError("s must lie in (0, 1)", {"s": self.s})

    @property
    def dimension(self) -> int:
        return self.measure.dimension

    def with_s(self, s: float) -> "StableOperatorSpec":
        """Same directional law at another order; fractional Laplacians are renormalized"""
        if self.label == "fractional_laplacian":
            return fractional_laplacian(self.dimension, s)
        return StableOperatorSpec(s, self.measure, self.nondegenerate, self.label)

    def to_dict(self) -> Dict:
        return {"s": self.s, "measure": self.measure.to_dict(), "label": self.label}

    @classmethod
    def from_dict(cls, data: Dict, s: float = None) -> "StableOperatorSpec":
        s = float(data.get("s", s) if s is None else s)
        measure_data = dict(data["measure"])
        if measure_data.get("kind") == "fractional_laplacian":
            return fractional_laplacian(int(measure_data["d"]), s)
        return cls(s, SpectralMeasure.from_dict(measure_data), label=data.get("label", ""))


def total_mass(measure: SpectralMeasure) -> float:
    """Lambda: atom weights plus density times the sphere area"""
    return float(np.sum(measure.weights)) + measure.uniform_density * sphere_area(measure.dimension)


def directional_moment(measure: SpectralMeasure, s: float, omega: np.ndarray) -> np.ndarray:
    """Integral of |omega . theta|^{2s} mu(d theta) for each row of omega"""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    value = np.zeros(len(omega))
    if measure.atoms:
        dots = np.abs(omega @ measure.directions.T)
        value += (dots ** (2.0 * s)) @ measure.weights
    if measure.uniform_density:
        norms = np.linalg.norm(omega, axis=1) ** (2.0 * s)
        value += measure.uniform_density * uniform_moment(measure.dimension, s) * norms
    return value


def _angle_vector(alpha: float) -> np.ndarray:
    return np.array([np.cos(alpha), np.sin(alpha)])


def _polar_vector(polar: float, azimuth: float) -> np.ndarray:
    return np.array([np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth), np.cos(polar)])


def _minimum_on_grid(measure: SpectralMeasure, s: float, resolution: int) -> Tuple[float, np.ndarray]:
    d = measure.dimension
    if d == 1:
        candidates = np.array([[1.0]])
    elif d == 2:
        n = 4 * int(np.ceil(resolution / 4))
        angles = np.arange(n) * np.pi / n
        candidates = np.column_stack([np.cos(angles), np.sin(angles)])
        # atom normals are the only places a kink minimum can hide
        if measure.atoms:
            normals = measure.directions @ np.array([[0.0, 1.0], [-1.0, 0.0]])
            candidates = np.vstack([candidates, normals])
    else:
        candidates = fibonacci_sphere(resolution * resolution)
        if measure.atoms:
            dirs = measure.directions
            normals = [np.cross(a, b) for i, a in enumerate(dirs) for b in dirs[i + 1:]]
            normals = [n / np.linalg.norm(n) for n in normals if np.linalg.norm(n) > 1e-12]
            if normals:
                candidates = np.vstack([candidates, np.array(normals)])
    values = directional_moment(measure, s, candidates)
    k = int(np.argmin(values))
    return float(values[k]), candidates[k]


def _polish(measure: SpectralMeasure, s: float, best: np.ndarray, width: float) -> float:
    d = measure.dimension
    if d == 2:
        alpha0 = float(np.arctan2(best[1], best[0]))
        result = minimize_scalar(
            lambda a: float(directional_moment(measure, s, _angle_vector(a))[0]),
            bounds=(alpha0 - width, alpha0 + width), method="bounded",
            options={"xatol": 1e-12},
        )
        return float(result.fun)
    polar = float(np.arccos(np.clip(best[2], -1.0, 1.0)))
    azimuth = float(np.arctan2(best[1], best[0]))
    value = float(directional_moment(measure, s, best)[0])
    for _ in range(2):
        res = minimize_scalar(
            lambda p: float(directional_moment(measure, s, _polar_vector(p, azimuth))[0]),
            bounds=(polar - width, polar + width), method="bounded", options={"xatol": 1e-12},
        )
        polar = float(res.x)
        res = minimize_scalar(
            lambda a: float(directional_moment(measure, s, _polar_vector(polar, a))[0]),
            bounds=(azimuth - width, azimuth + width), method="bounded", options={"xatol": 1e-12},
        )
        azimuth = float(res.x)
        value = min(value, float(res.fun))
    return value


@lru_cache(maxsize=256)
def _ellipticity(measure: SpectralMeasure, s: float, resolution: int) -> Tuple[float, float]:
    d = measure.dimension
    if d > 3:
        raise LabError("ellipticity_constant supports d <= 3", {"d": d})
    estimates = []
    best = None
    for level in range(3):
        value, best = _minimum_on_grid(measure, s, resolution * 2 ** level)
        estimates.append(value)
    value = estimates[-1]
    if d >= 2:
        width = np.pi / (resolution * 2 ** 2) if d == 2 else 2.0 / (resolution * 2 ** 2)
        value = min(value, _polish(measure, s, best, width))
    scale = max(abs(estimates[-2]), 1e-300)
    tolerance = abs(estimates[-1] - estimates[-2]) / scale
    if tolerance > ELLIPTICITY_TOLERANCE:
        warn(logger, f"ellipticity constant not converged at s={s}: grid levels differ by {tolerance:.2e}")
    return value, tolerance


def ellipticity_constant(measure: SpectralMeasure, s: float, resolution: int = 64,
                         with_tolerance: bool = False):
    """lambda = min over unit omega of the directional moment"""
    if resolution < 8:
        raise LabError("resolution must be >= 8", {"resolution": resolution})
    value, tolerance = _ellipticity(measure, float(s), int(resolution))
    if value < DEGENERACY_THRESHOLD:
        raise DegenerateMeasure(
            "measure is supported on a hyperplane", {"lambda": value, "s": s}
        )
    return (value, tolerance) if with_tolerance else value


def symmetrize(measure: SpectralMeasure) -> SpectralMeasure:
    """(mu + mu o (-id)) / 2, atoms merged in first-seen order"""
    merged: List[List] = []
    for direction, weight in measure.atoms:
        for vec in (direction, tuple(-c + 0.0 for c in direction)):
            for entry in merged:
                if np.allclose(entry[0], vec, rtol=0.0, atol=1e-12):
                    entry[1] += 0.5 * weight
                    break
            else:
                merged.append([vec, 0.5 * weight])
    atoms = tuple((tuple(v), w) for v, w in merged)
    return SpectralMeasure(measure.dimension, atoms, measure.uniform_density)


def fractional_constant(d: int, s: float) -> float:
    """C(d, s) = 4^s Gamma(d/2 + s) / (pi^{d/2} |Gamma(-s)|)"""
    return float(4.0 ** s * gamma(d / 2.0 + s) / (np.pi ** (d / 2.0) * abs(gamma(-s))))


def frac_laplacian_measure(d: int, s: float) -> SpectralMeasure:
    """Uniform density making A_s the standard fractional Laplacian"""
    if d < 1 or not 0.0 < s < 1.0:
        raise InvalidMeasure("need d >= 1 and s in (0, 1)", {"d": d, "s": s})
    density = fractional_constant(d, s) / (2.0 * (1.0 - s))
    if d == 1:
        return SpectralMeasure(1, (((1.0,), density), ((-1.0,), density)))
    return SpectralMeasure(d, (), density)


def fractional_laplacian(d: int, s: float) -> StableOperatorSpec:
    return StableOperatorSpec(s, frac_laplacian_measure(d, s), label="fractional_laplacian")


def axis_measure(d: int, weight: float = 1.0) -> SpectralMeasure:
    """Point masses on +-e_k, the standard nondegenerate but singular example"""
    atoms = []
    for k in range(d):
        e = [0.0] * d
        e[k] = 1.0
        atoms.append((tuple(e), weight))
        e_neg = [0.0] * d
        e_neg[k] = -1.0
        atoms.append((tuple(e_neg), weight))
    return SpectralMeasure(d, tuple(atoms))


@lru_cache(maxsize=256)
def symbol_constant(s: float) -> float:
    """c(s) = 2(1-s) * integral of (1 - cos t) t^{-1-2s} over (0, inf), by quadrature"""
    # (0, 1): 2 sin^2(t/2)/t^2 is smooth, the weight t^{1-2s} is handled exactly
    near, _ = quad(lambda t: 2.0 * np.sin(0.5 * t) ** 2 / t ** 2 if t > 0 else 0.5,
                   0.0, 1.0, weight="alg", wvar=(1.0 - 2.0 * s, 0.0), epsabs=1e-14, epsrel=1e-13)
    oscillatory, _ = quad(lambda t: t ** (-1.0 - 2.0 * s), 1.0, np.inf, weight="cos", wvar=1.0,
                          epsabs=1e-14)
    return float(2.0 * (1.0 - s) * (near + 1.0 / (2.0 * s) - oscillatory))


def fourier_symbol(spec: StableOperatorSpec, xi: Sequence[float]) -> float:
    """psi(xi) = c(s) * directional moment at xi/|xi| * |xi|^{2s}"""
    xi = np.asarray(xi, dtype=float).ravel()
    norm = float(np.linalg.norm(xi))
    if norm == 0.0:
        raise ZeroFrequency("Fourier symbol is undefined at xi = 0")
    omega = xi / norm
    moment = float(directional_moment(spec.measure, spec.s, omega)[0])
    return symbol_constant(spec.s) * moment * norm ** (2.0 * spec.s)


def measure_nodes(measure: SpectralMeasure, angular_nodes: int = 256) -> Tuple[np.ndarray, np.ndarray]:
    """Directions and weights of the symmetrized measure, density part discretized"""
    sym = symmetrize(measure) if measure.atoms else measure
    dirs = [sym.directions] if sym.atoms else []
    weights = [sym.weights] if sym.atoms else []
    rho = sym.uniform_density
    d = measure.dimension
    if rho:
        if d == 1:
            dirs.append(np.array([[1.0], [-1.0]]))
            weights.append(np.array([rho, rho]))
        elif d == 2:
            n = 2 * int(np.ceil(angular_nodes / 2))
            dirs.append(circle_directions(n))
            weights.append(np.full(n, rho * 2.0 * np.pi / n))
        else:
            n = 2 * int(np.ceil(angular_nodes / 2))
            half = fibonacci_sphere(n)[: n // 2]
            dirs.append(np.vstack([half, -half]))
            weights.append(np.full(n, rho * 4.0 * np.pi / n))
    return np.vstack(dirs), np.concatenate(weights)


def measure_report(spec: StableOperatorSpec) -> Dict:
    """Constants carried by every report: Lambda, lambda, density and c(s)"""
    report = {
        "s": spec.s,
        "Lambda": total_mass(spec.measure),
        "uniform_density": spec.measure.uniform_density,
        "frac_laplacian_density": fractional_constant(spec.dimension, spec.s) / (2.0 * (1.0 - spec.s)),
        "symbol_constant": symbol_constant(spec.s),
    }
    try:
        report["lambda"] = ellipticity_constant(spec.measure, spec.s)
    except DegenerateMeasure:
        report["lambda"] = 0.0
    return report
