from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from core.errors import LabError


@dataclass(frozen=True)
class QuadratureSpec:
    """Radial and angular resolution for the singular integrals"""

    inner_cut: float = 1.0 / 16.0
    outer_cut: float = 64.0
    panels_per_dyad: int = 4
    gauss_order: int = 16
    angular_nodes: int = 256

    def __post_init__(self):
        if not self.inner_cut > 0:
            raise LabError("inner_cut must be positive", {"inner_cut": self.inner_cut})
        if not self.outer_cut > self.inner_cut:
            raise LabError("outer_cut must exceed inner_cut", {"outer_cut": self.outer_cut})
        if self.gauss_order < 4:
            raise LabError("gauss_order must be at least 4", {"gauss_order": self.gauss_order})
        if self.panels_per_dyad < 1 or self.angular_nodes < 4:
            raise LabError("panels_per_dyad >= 1 and angular_nodes >= 4 required")

    def refined(self) -> "QuadratureSpec":
        """One refinement step, used for error estimates"""
        return replace(
            self,
            panels_per_dyad=2 * self.panels_per_dyad,
            gauss_order=self.gauss_order + 4,
            angular_nodes=2 * self.angular_nodes,
        )

    def coarsened(self) -> "QuadratureSpec":
        return replace(
            self,
            panels_per_dyad=max(1, self.panels_per_dyad // 2),
            gauss_order=max(4, self.gauss_order - 4),
            angular_nodes=max(8, self.angular_nodes // 2),
        )

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> "QuadratureSpec":
        return cls(**(data or {}))


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]"""
    x, w = roots_legendre(order)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=128)
def gauss_jacobi_left(order: int, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, 1] for the weight t**beta (beta > -1)"""
    x, w = roots_jacobi(order, 0.0, beta)
    return 0.5 * (x + 1.0), w * 2.0 ** (-1.0 - beta)


def panel_rule(edges: Iterable[float], order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on consecutive edges"""
    edges = np.asarray(list(edges), dtype=float)
    if edges.size < 2:
        return np.zeros(0), np.zeros(0)
    t, w = gauss_legendre(order)
    lengths = np.diff(edges)
    keep = lengths > 0
    left, lengths = edges[:-1][keep], lengths[keep]
    nodes = (left[:, None] + lengths[:, None] * t[None, :]).ravel()
    weights = (lengths[:, None] * w[None, :]).ravel()
    return nodes, weights


def geometric_edges(a: float, b: float, toward: str, levels: int = 12, ratio: float = 0.2) -> List[float]:
    """Edges on [a, b] graded geometrically toward one or both endpoints"""
    length = b - a
    if length <= 0:
        return [a, b]
    if toward == "both":
        mid = 0.5 * (a + b)
        left = geometric_edges(a, mid, "left", levels, ratio)
        right = geometric_edges(mid, b, "right", levels, ratio)
        return left[:-1] + right
    offsets = [length * ratio ** k for k in range(levels, 0, -1)]
    if toward == "left":
        return [a] + [a + o for o in offsets] + [b]
    return [a] + [b - o for o in reversed(offsets)] + [b]


def dyadic_edges(start: float, stop: float, panels_per_dyad: int) -> np.ndarray:
    """Edges from start to stop, panels_per_dyad uniform panels per doubling"""
    if stop <= start:
        return np.array([start])
    dyads = int(np.ceil(np.log2(stop / start) - 1e-12))
    dyads = max(dyads, 1)
    ratio = (stop / start) ** (1.0 / dyads)
    edges = [start]
    for k in range(dyads):
        lo = start * ratio ** k
        hi = stop if k == dyads - 1 else start * ratio ** (k + 1)
        edges.extend(np.linspace(lo, hi, panels_per_dyad + 1)[1:])
    return np.asarray(edges)


def radial_rule(start: float, stop: float, q: QuadratureSpec,
                breaks: Optional[np.ndarray] = None, max_graded: int = 16) -> Tuple[np.ndarray, np.ndarray]:
    """Panels on [start, stop]; graded refinement on both sides of each break

    Past max_graded breaks (grid lines of an interpolant) the breaks become plain
    panel edges.
    """
    edges = dyadic_edges(start, stop, q.panels_per_dyad)
    if breaks is not None and len(breaks):
        breaks = np.asarray(breaks, dtype=float)
        inside = np.sort(breaks[(breaks > start) & (breaks < stop)])
        # a break sitting on an end point still grades its panel
        marks = breaks[(breaks >= start) & (breaks <= stop)]
        if inside.size > max_graded:
            return panel_rule(np.unique(np.concatenate([edges, inside])), q.gauss_order)
        if marks.size:
            edges = np.unique(np.concatenate([edges, inside]))
            graded = [edges[0]]
            for lo, hi in zip(edges[:-1], edges[1:]):
                at_lo = np.any(np.isclose(marks, lo, rtol=0, atol=1e-14))
                at_hi = np.any(np.isclose(marks, hi, rtol=0, atol=1e-14))
                if at_lo and at_hi:
                    graded.extend(geometric_edges(lo, hi, "both")[1:])
                elif at_lo:
                    graded.extend(geometric_edges(lo, hi, "left")[1:])
                elif at_hi:
                    graded.extend(geometric_edges(lo, hi, "right")[1:])
                else:
                    graded.append(hi)
            edges = np.asarray(graded)
    return panel_rule(edges, q.gauss_order)


def decade_rule(t_top: float, decades: int, order: int = 8) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Gauss rules in log t on [t_top 10^-(k+1), t_top 10^-k], k = 0..decades-1"""
    x, w = gauss_legendre(order)
    rules = []
    span = np.log(10.0)
    for k in range(decades):
        log_hi = np.log(t_top) - k * span
        logs = log_hi - span + span * x
        nodes = np.exp(logs)
        rules.append((nodes, w * span * nodes))
    return rules


def fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform unit vectors in R^3"""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    radius = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = np.pi * (1.0 + np.sqrt(5.0)) * k
    return np.column_stack([radius * np.cos(phi), radius * np.sin(phi), z])


def circle_directions(n: int, offset: float = 0.5) -> np.ndarray:
    angles = (np.arange(n) + offset) * 2.0 * np.pi / n
    return np.column_stack([np.cos(angles), np.sin(angles)])
