from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from core.errors import InvalidDomain
from core.quadrature import fibonacci_sphere, geometric_edges, panel_rule

Chord = Tuple[np.ndarray, np.ndarray]


def as_points(x, dimension: int) -> np.ndarray:
    """Coerce scalars, vectors and lists of points to an (n, d) array"""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(-1, 1) if dimension == 1 else arr.reshape(1, -1)
    return arr


def _lex_less(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    less = np.zeros(len(a), dtype=bool)
    decided = np.zeros(len(a), dtype=bool)
    for k in range(a.shape[1]):
        lt = a[:, k] < b[:, k]
        gt = a[:, k] > b[:, k]
        less |= ~decided & lt
        decided |= lt | gt
    return less


def _pick(best_d, best_z, cand_d, cand_z, tol=1e-14):
    """Keep the closer candidate; on ties the lexicographically smaller point"""
    closer = cand_d < best_d - tol
    tie = np.abs(cand_d - best_d) <= tol
    take = closer | (tie & _lex_less(cand_z, best_z))
    best_d = np.where(take, np.minimum(cand_d, np.where(tie, best_d, cand_d)), best_d)
    best_z = np.where(take[:, None], cand_z, best_z)
    return best_d, best_z


def _slab_chord(points: np.ndarray, theta: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                closed: bool = False) -> Chord:
    n = len(points)
    t_lo = np.full(n, -np.inf)
    t_hi = np.full(n, np.inf)
    empty = np.zeros(n, dtype=bool)
    for k in range(points.shape[1]):
        if theta[k] == 0.0:
            if closed:
                empty |= (points[:, k] < lo[k]) | (points[:, k] > hi[k])
            else:
                empty |= (points[:, k] <= lo[k]) | (points[:, k] >= hi[k])
            continue
        a = (lo[k] - points[:, k]) / theta[k]
        b = (hi[k] - points[:, k]) / theta[k]
        t_lo = np.maximum(t_lo, np.minimum(a, b))
        t_hi = np.minimum(t_hi, np.maximum(a, b))
    empty |= t_lo >= t_hi if not closed else t_lo > t_hi
    t_lo = np.where(empty, 0.0, t_lo)
    t_hi = np.where(empty, 0.0, t_hi)
    return t_lo, t_hi


class Domain(ABC):
    """Bounded open set with exact distance and ray-intersection queries"""

    variant = "domain"
    dimension: int

    @abstractmethod
    def contains(self, points) -> np.ndarray:
        ...

    @abstractmethod
    def distance(self, points) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(inside, d_x, z_x) for each point"""

    @abstractmethod
    def chords(self, points, theta) -> List[Chord]:
        """r-intervals with x + r theta in the domain, one (r0, r1) array pair per piece"""

    @abstractmethod
    def boundary_nodes(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        ...

    @abstractmethod
    def level_set_nodes(self, t: float, side: str, n: int = 256) -> Tuple[np.ndarray, np.ndarray]:
        """Rule on {x on the given side : d_x = t}"""

    @abstractmethod
    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        ...

    @abstractmethod
    def rectangles(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Disjoint axis boxes whose union is the domain (polar domains return [])"""

    @abstractmethod
    def to_dict(self) -> Dict:
        ...

    @property
    def diameter(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def max_inner_distance(self) -> float:
        lo, hi = self.bounding_box()
        h = float(np.max(hi - lo)) / 256.0
        points, _ = self.cell_midpoints(h)
        _, d, _ = self.distance(points)
        return float(np.max(d)) + h

    def dist(self, points) -> np.ndarray:
        return self.distance(points)[1]

    def ray_chords(self, x, theta) -> List[Tuple[float, float]]:
        """Sorted chord list for one point and one direction"""
        x = as_points(x, self.dimension)[:1]
        theta = np.asarray(theta, dtype=float).ravel()
        pieces = []
        for r0, r1 in self.chords(x, theta):
            if r1[0] > r0[0]:
                pieces.append((float(r0[0]), float(r1[0])))
        return sorted(pieces)

    def cell_midpoints(self, h: float) -> Tuple[np.ndarray, float]:
        """Midpoints of the h-lattice cells whose centre lies in the domain"""
        lo, hi = self.bounding_box()
        axes = [np.arange(lo[k] + 0.5 * h, hi[k], h) for k in range(self.dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.column_stack([m.ravel() for m in mesh])
        return points[self.contains(points)], h ** self.dimension

    def volume_nodes(self, panels: int = 8, order: int = 8) -> Tuple[np.ndarray, np.ndarray]:
        """Tensor Gauss rule graded toward every edge of every rectangle piece"""
        nodes, weights = [], []
        for lo, hi in self.rectangles():
            rules = [_graded_interval(lo[k], hi[k], panels, order) for k in range(self.dimension)]
            mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
            wmesh = np.meshgrid(*[r[1] for r in rules], indexing="ij")
            nodes.append(np.column_stack([m.ravel() for m in mesh]))
            weights.append(np.prod(np.column_stack([w.ravel() for w in wmesh]), axis=1))
        return np.vstack(nodes), np.concatenate(weights)

    def exterior_nodes(self, radius: float, panels: int = 8, order: int = 8) -> Tuple[np.ndarray, np.ndarray]:
        """Rule on the complement of the domain inside the cube [-radius, radius]^d"""
        big_lo = np.full(self.dimension, -radius)
        big_hi = np.full(self.dimension, radius)
        outer_lo, outer_hi = self.bounding_box()
        pieces = _box_difference(big_lo, big_hi, outer_lo, outer_hi)
        pieces += self.holes()
        nodes, weights = [], []
        for lo, hi in pieces:
            rules = [_graded_interval(lo[k], hi[k], panels, order) for k in range(self.dimension)]
            mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
            wmesh = np.meshgrid(*[r[1] for r in rules], indexing="ij")
            nodes.append(np.column_stack([m.ravel() for m in mesh]))
            weights.append(np.prod(np.column_stack([w.ravel() for w in wmesh]), axis=1))
        return np.vstack(nodes), np.concatenate(weights)

    def holes(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Parts of the bounding box outside the domain, as disjoint boxes"""
        return []

    def outward_normals(self, points, step: float = 1e-7) -> np.ndarray:
        """Unit outward normals at boundary points from the signed distance"""
        p = as_points(points, self.dimension)
        grad = np.zeros_like(p)
        for k in range(self.dimension):
            e = np.zeros(self.dimension)
            e[k] = step
            grad[:, k] = (self._signed(p + e) - self._signed(p - e)) / (2.0 * step)
        return grad / np.linalg.norm(grad, axis=1)[:, None]

    def _signed(self, points) -> np.ndarray:
        inside, d, _ = self.distance(points)
        return np.where(inside, -d, d)

    def collar_contains(self, points) -> np.ndarray:
        """Membership in the exterior collar {x outside : d_x < 1}"""
        inside, d, _ = self.distance(points)
        return (~inside) & (d < 1.0) & (d > 0.0)


def _graded_interval(a: float, b: float, panels: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    edges = list(np.linspace(a, b, panels + 1))
    first = geometric_edges(edges[0], edges[1], "left", levels=8, ratio=0.25)
    last = geometric_edges(edges[-2], edges[-1], "right", levels=8, ratio=0.25)
    middle = edges[1:-1] if panels > 1 else []
    if panels == 1:
        full = geometric_edges(a, b, "both", levels=8, ratio=0.25)
        return panel_rule(full, order)
    return panel_rule(first[:-1] + middle + last[1:], order)


def _box_difference(big_lo, big_hi, lo, hi) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Split big minus [lo, hi] into disjoint boxes (slabs peeled axis by axis)"""
    pieces = []
    cur_lo, cur_hi = big_lo.astype(float).copy(), big_hi.astype(float).copy()
    for k in range(len(lo)):
        if lo[k] > cur_lo[k]:
            p_lo, p_hi = cur_lo.copy(), cur_hi.copy()
            p_hi[k] = lo[k]
            pieces.append((p_lo, p_hi))
        if hi[k] < cur_hi[k]:
            p_lo, p_hi = cur_lo.copy(), cur_hi.copy()
            p_lo[k] = hi[k]
            pieces.append((p_lo, p_hi))
        cur_lo[k] = max(cur_lo[k], lo[k])
        cur_hi[k] = min(cur_hi[k], hi[k])
    return pieces


class Box(Domain):
    variant = "box"

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise InvalidDomain("box needs lo < hi componentwise", {"lo": self.lo.tolist(), "hi": self.hi.tolist()})
        self.dimension = len(self.lo)

    def contains(self, points) -> np.ndarray:
        p = as_points(points, self.dimension)
        return np.all((p > self.lo) & (p < self.hi), axis=1)

    def closed_contains(self, points) -> np.ndarray:
        p = as_points(points, self.dimension)
        return np.all((p >= self.lo) & (p <= self.hi), axis=1)

    def distance(self, points):
        p = as_points(points, self.dimension)
        inside = self.contains(p)
        z_out = np.clip(p, self.lo, self.hi)
        d_out = np.linalg.norm(p - z_out, axis=1)
        best_d = np.full(len(p), np.inf)
        best_z = np.full_like(p, np.inf)
        for k in range(self.dimension):
            for face in (self.lo[k], self.hi[k]):
                z = p.copy()
                z[:, k] = face
                best_d, best_z = _pick(best_d, best_z, np.abs(p[:, k] - face), z)
        d = np.where(inside, best_d, d_out)
        z = np.where(inside[:, None], best_z, z_out)
        return inside, d, z

    def chords(self, points, theta):
        p = as_points(points, self.dimension)
        return [_slab_chord(p, np.asarray(theta, dtype=float).ravel(), self.lo, self.hi)]

    def segments(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        (x0, y0), (x1, y1) = self.lo, self.hi
        corners = [np.array(c) for c in [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]]
        return [(corners[i], corners[(i + 1) % 4]) for i in range(4)]

    def boundary_nodes(self, n: int):
        if self.dimension == 1:
            return np.array([[self.lo[0]], [self.hi[0]]]), np.ones(2)
        if self.dimension == 2:
            return _segment_nodes(self.segments(), n)
        return _box_face_nodes(self.lo, self.hi, n)

    def level_set_nodes(self, t: float, side: str, n: int = 256):
        if self.dimension == 1:
            return _interval_level_set(self.lo[0], self.hi[0], t, side)
        if self.dimension != 2:
            raise InvalidDomain("level sets are available for d <= 2 boxes")
        return _polygon_level_set(self, self.segments(), t, side, n)

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    def rectangles(self):
        return [(self.lo.copy(), self.hi.copy())]

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @property
    def perimeter(self) -> float:
        if self.dimension == 1:
            return 2.0
        w = self.hi - self.lo
        if self.dimension == 2:
            return float(2.0 * (w[0] + w[1]))
        return float(2.0 * (w[0] * w[1] + w[1] * w[2] + w[0] * w[2]))

    def max_inner_distance(self) -> float:
        return float(np.min(self.hi - self.lo) / 2.0)

    def to_dict(self):
        return {"variant": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class Interval(Box):
    variant = "interval"

    def __init__(self, a: float, b: float):
        super().__init__([a], [b])
        self.a, self.b = float(a), float(b)

    def to_dict(self):
        return {"variant": "interval", "a": self.a, "b": self.b}


class Ball(Domain):
    variant = "ball"

    def __init__(self, center, radius: float):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        if not self.radius > 0:
            raise InvalidDomain("ball radius must be positive", {"radius": radius})
        self.dimension = len(self.center)

    def contains(self, points):
        p = as_points(points, self.dimension)
        return np.linalg.norm(p - self.center, axis=1) < self.radius

    def distance(self, points):
        p = as_points(points, self.dimension)
        offset = p - self.center
        norm = np.linalg.norm(offset, axis=1)
        e1 = np.zeros(self.dimension)
        e1[0] = -1.0
        safe = np.where(norm[:, None] > 0, offset / np.where(norm > 0, norm, 1.0)[:, None], e1)
        z = self.center + self.radius * safe
        return norm < self.radius, np.abs(self.radius - norm), z

    def chords(self, points, theta):
        p = as_points(points, self.dimension) - self.center
        theta = np.asarray(theta, dtype=float).ravel()
        b = p @ theta
        c = np.sum(p * p, axis=1) - self.radius ** 2
        disc = b * b - c
        hit = disc > 0
        root = np.sqrt(np.where(hit, disc, 0.0))
        return [(np.where(hit, -b - root, 0.0), np.where(hit, -b + root, 0.0))]

    def boundary_nodes(self, n: int):
        if self.dimension == 1:
            return np.array([[self.center[0] - self.radius], [self.center[0] + self.radius]]), np.ones(2)
        return _sphere_nodes(self.center, self.radius, n)

    def level_set_nodes(self, t: float, side: str, n: int = 256):
        if self.dimension == 1:
            c = self.center[0]
            return _interval_level_set(c - self.radius, c + self.radius, t, side)
        radius = self.radius - t if side == "inside" else self.radius + t
        if radius <= 0:
            return np.zeros((0, self.dimension)), np.zeros(0)
        return _sphere_nodes(self.center, radius, n)

    def volume_nodes(self, panels: int = 8, order: int = 8):
        if self.dimension == 1:
            c = self.center[0]
            nodes, weights = _graded_interval(c - self.radius, c + self.radius, panels, order)
            return nodes[:, None], weights
        r, wr = _graded_interval(0.0, self.radius, panels, order)
        dirs, wd = _sphere_nodes(np.zeros(self.dimension), 1.0, 8 * panels * order)
        points = self.center + (r[:, None, None] * dirs[None, :, :]).reshape(-1, self.dimension)
        weights = (wr[:, None] * r[:, None] ** (self.dimension - 1) * wd[None, :]).ravel()
        return points, weights

    def exterior_nodes(self, radius: float, panels: int = 8, order: int = 8):
        if self.dimension == 1:
            c = self.center[0]
            left = _graded_interval(c - radius, c - self.radius, panels, order)
            right = _graded_interval(c + self.radius, c + radius, panels, order)
            return np.concatenate([left[0], right[0]])[:, None], np.concatenate([left[1], right[1]])
        r, wr = _graded_interval(self.radius, radius, panels, order)
        dirs, wd = _sphere_nodes(np.zeros(self.dimension), 1.0, 8 * panels * order)
        points = self.center + (r[:, None, None] * dirs[None, :, :]).reshape(-1, self.dimension)
        weights = (wr[:, None] * r[:, None] ** (self.dimension - 1) * wd[None, :]).ravel()
        return points, weights

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def rectangles(self):
        return []

    @property
    def volume(self) -> float:
        from core.measures import sphere_area
        return sphere_area(self.dimension) * self.radius ** self.dimension / self.dimension

    @property
    def perimeter(self) -> float:
        from core.measures import sphere_area
        if self.dimension == 1:
            return 2.0
        return sphere_area(self.dimension) * self.radius ** (self.dimension - 1)

    def max_inner_distance(self) -> float:
        return self.radius

    def to_dict(self):
        return {"variant": "ball", "center": self.center.tolist(), "radius": self.radius}


class LShape(Domain):
    """Outer open box minus a closed axis-aligned box"""

    variant = "lshape"

    def __init__(self, outer: Box, removed: Box):
        if outer.dimension != 2 or removed.dimension != 2:
            raise InvalidDomain("LShape is two-dimensional")
        if np.any(removed.lo < outer.lo) or np.any(removed.hi > outer.hi):
            raise InvalidDomain("removed box must lie inside the outer box")
        if np.all(removed.lo <= outer.lo) and np.all(removed.hi >= outer.hi):
            raise InvalidDomain("removed box swallows the domain")
        self.outer = outer
        self.removed = removed
        self.dimension = 2
        self._segments = self._boundary_segments()

    def contains(self, points):
        p = as_points(points, 2)
        return self.outer.contains(p) & ~self.removed.closed_contains(p)

    def _boundary_segments(self):
        xs = sorted(set(np.concatenate([self.outer.lo, self.outer.hi, self.removed.lo, self.removed.hi])[[0, 2, 4, 6]]))
        ys = sorted(set(np.concatenate([self.outer.lo, self.outer.hi, self.removed.lo, self.removed.hi])[[1, 3, 5, 7]]))
        eps = 1e-9 * self.outer.diameter
        segments = []
        for box in (self.outer, self.removed):
            for a, b in box.segments():
                cuts = xs if a[1] == b[1] else ys
                axis = 0 if a[1] == b[1] else 1
                lo, hi = sorted((a[axis], b[axis]))
                points = [lo] + [c for c in cuts if lo < c < hi] + [hi]
                for u, v in zip(points[:-1], points[1:]):
                    p, q = a.copy(), a.copy()
                    p[axis], q[axis] = u, v
                    mid = 0.5 * (p + q)
                    normal = np.array([0.0, 1.0]) if axis == 0 else np.array([1.0, 0.0])
                    plus = self.contains(mid + eps * normal)[0]
                    minus = self.contains(mid - eps * normal)[0]
                    if plus != minus:
                        segments.append((p, q))
        return segments

    def segments(self):
        return list(self._segments)

    def distance(self, points):
        p = as_points(points, 2)
        best_d = np.full(len(p), np.inf)
        best_z = np.full_like(p, np.inf)
        for a, b in self._segments:
            ab = b - a
            t = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
            z = a + t[:, None] * ab
            best_d, best_z = _pick(best_d, best_z, np.linalg.norm(p - z, axis=1), z)
        return self.contains(p), best_d, best_z

    def chords(self, points, theta):
        p = as_points(points, 2)
        theta = np.asarray(theta, dtype=float).ravel()
        o0, o1 = _slab_chord(p, theta, self.outer.lo, self.outer.hi)
        q0, q1 = _slab_chord(p, theta, self.removed.lo, self.removed.hi, closed=True)
        has_q = q1 > q0
        has_q |= (q0 == q1) & self.removed.closed_contains(p + q0[:, None] * theta)
        first_hi = np.where(has_q, np.minimum(o1, q0), o1)
        second_lo = np.where(has_q, np.maximum(o0, q1), o1)
        first = (o0, np.maximum(o0, first_hi))
        second = (np.minimum(second_lo, o1), o1)
        return [first, second]

    def boundary_nodes(self, n: int):
        return _segment_nodes(self._segments, n)

    def level_set_nodes(self, t: float, side: str, n: int = 256):
        return _polygon_level_set(self, self._segments, t, side, n)

    def bounding_box(self):
        return self.outer.lo.copy(), self.outer.hi.copy()

    def rectangles(self):
        return _box_difference(self.outer.lo, self.outer.hi, self.removed.lo, self.removed.hi)

    def holes(self):
        return [(self.removed.lo.copy(), self.removed.hi.copy())]

    @property
    def volume(self) -> float:
        return self.outer.volume - self.removed.volume

    @property
    def perimeter(self) -> float:
        return float(sum(np.linalg.norm(b - a) for a, b in self._segments))

    def to_dict(self):
        return {
            "variant": "lshape",
            "outer": {"lo": self.outer.lo.tolist(), "hi": self.outer.hi.tolist()},
            "removed": {"lo": self.removed.lo.tolist(), "hi": self.removed.hi.tolist()},
        }


def domain_from_dict(data: Dict) -> Domain:
    variant = data.get("variant")
    if variant == "interval":
        return Interval(data["a"], data["b"])
    if variant == "ball":
        return Ball(data["center"], data["radius"])
    if variant == "box":
        return Box(data["lo"], data["hi"])
    if variant == "lshape":
        return LShape(Box(**data["outer"]), Box(**data["removed"]))
    raise InvalidDomain(f"unknown domain variant {variant!r}")


def dist_to_boundary(domain: Domain, x) -> Tuple[bool, float, np.ndarray]:
    """Exact distance to the boundary with a lexicographic tie-break"""
    inside, d, z = domain.distance(as_points(x, domain.dimension)[:1])
    return bool(inside[0]), float(d[0]), z[0]


def _interval_level_set(a: float, b: float, t: float, side: str):
    if side == "inside":
        if a + t < b - t:
            return np.array([[a + t], [b - t]]), np.ones(2)
        if a + t == b - t:
            return np.array([[a + t]]), np.ones(1)
        return np.zeros((0, 1)), np.zeros(0)
    return np.array([[a - t], [b + t]]), np.ones(2)


def _sphere_nodes(center: np.ndarray, radius: float, n: int):
    from core.measures import sphere_area
    d = len(center)
    if d == 2:
        angles = 2.0 * np.pi * np.arange(n) / n
        points = center + radius * np.column_stack([np.cos(angles), np.sin(angles)])
        return points, np.full(n, 2.0 * np.pi * radius / n)
    dirs = fibonacci_sphere(n)
    return center + radius * dirs, np.full(n, sphere_area(d) * radius ** (d - 1) / n)


def _segment_nodes(segments, n: int):
    lengths = np.array([np.linalg.norm(b - a) for a, b in segments])
    total = lengths.sum()
    points, weights = [], []
    for (a, b), length in zip(segments, lengths):
        m = max(1, int(round(n * length / total)))
        t = (np.arange(m) + 0.5) / m
        points.append(a + t[:, None] * (b - a))
        weights.append(np.full(m, length / m))
    return np.vstack(points), np.concatenate(weights)


def _box_face_nodes(lo, hi, n: int):
    d = len(lo)
    m = max(1, int(round(np.sqrt(n / (2 * d)))))
    points, weights = [], []
    for k in range(d):
        others = [j for j in range(d) if j != k]
        axes = [lo[j] + (np.arange(m) + 0.5) * (hi[j] - lo[j]) / m for j in others]
        mesh = np.meshgrid(*axes, indexing="ij")
        area = np.prod([(hi[j] - lo[j]) / m for j in others])
        for face in (lo[k], hi[k]):
            block = np.zeros((mesh[0].size, d))
            block[:, k] = face
            for idx, j in enumerate(others):
                block[:, j] = mesh[idx].ravel()
            points.append(block)
            weights.append(np.full(len(block), area))
    return np.vstack(points), np.concatenate(weights)


def _polygon_level_set(domain: Domain, segments, t: float, side: str, n: int):
    """Offset segments plus vertex arcs, filtered to the points at distance exactly t"""
    if t <= 0:
        return domain.boundary_nodes(n)
    perimeter = sum(np.linalg.norm(b - a) for a, b in segments)
    candidates, weights = [], []
    for a, b in segments:
        length = np.linalg.norm(b - a)
        m = max(4, int(round(n * length / perimeter)))
        tangent = (b - a) / length
        normal = np.array([-tangent[1], tangent[0]])
        base = a + ((np.arange(m) + 0.5) / m)[:, None] * (b - a)
        for sign in (1.0, -1.0):
            candidates.append(base + sign * t * normal)
            weights.append(np.full(m, length / m))
    vertices = np.unique(np.vstack([np.vstack([a, b]) for a, b in segments]), axis=0)
    m_arc = max(16, n // 2)
    angles = 2.0 * np.pi * (np.arange(m_arc) + 0.5) / m_arc
    ring = t * np.column_stack([np.cos(angles), np.sin(angles)])
    for v in vertices:
        candidates.append(v + ring)
        weights.append(np.full(m_arc, 2.0 * np.pi * t / m_arc))
    points = np.vstack(candidates)
    w = np.concatenate(weights)
    inside, d, _ = domain.distance(points)
    keep = np.abs(d - t) <= 1e-9 * max(1.0, t)
    keep &= inside if side == "inside" else ~inside
    return points[keep], w[keep]


@dataclass
class WhitneyCover:
    """Balls with 2 r <= dist(center, complement) <= 4 r and bounded dilate overlap"""

    centers: np.ndarray
    radii: np.ndarray
    dilation: float = 7.0 / 4.0
    overlap_bound: int = 0

    def contains_count(self, points: np.ndarray, dilated: bool = True, chunk: int = 2048) -> np.ndarray:
        factor = self.dilation if dilated else 1.0
        counts = np.zeros(len(points), dtype=int)
        for start in range(0, len(points), chunk):
            block = points[start:start + chunk]
            dist = np.linalg.norm(block[:, None, :] - self.centers[None, :, :], axis=2)
            counts[start:start + chunk] = np.sum(dist < factor * self.radii[None, :], axis=1)
        return counts

    def covers(self, points: np.ndarray) -> np.ndarray:
        return self.contains_count(points, dilated=False) > 0


def whitney_cover(domain: Domain, min_radius: float, samples: int = 10_000, seed: int = 0) -> WhitneyCover:
    """Dyadic cubes of the bounding cube; accepted cubes carry their circumscribed ball"""
    if not min_radius > 0:
        raise InvalidDomain("min_radius must be positive", {"min_radius": min_radius})
    d = domain.dimension
    lo, hi = domain.bounding_box()
    side = float(np.max(hi - lo))
    queue = deque([(lo.astype(float), side)])
    centers, radii = [], []
    offsets = np.array(np.meshgrid(*[[0.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
    while queue:
        corner, length = queue.popleft()
        center = corner + 0.5 * length
        r = 0.5 * length * np.sqrt(d)
        inside, dist, _ = domain.distance(center[None, :])
        if not inside[0] and dist[0] >= r:
            continue
        if inside[0] and dist[0] >= 2.0 * r:
            centers.append(center)
            radii.append(max(r, dist[0] / 4.0))
            continue
        if 0.5 * r >= min_radius:
            for off in offsets:
                queue.append((corner + off * 0.5 * length, 0.5 * length))
    cover = WhitneyCover(np.array(centers).reshape(-1, d), np.array(radii))
    rng = np.random.default_rng(seed)
    points = _sample_inside(domain, samples, rng)
    cover.overlap_bound = int(cover.contains_count(points).max()) if len(cover.radii) else 0
    return cover


def _sample_inside(domain: Domain, count: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = domain.bounding_box()
    accepted = []
    total = 0
    while total < count:
        batch = lo + (hi - lo) * rng.random((2 * count, domain.dimension))
        batch = batch[domain.contains(batch)]
        accepted.append(batch)
        total += len(batch)
    return np.vstack(accepted)[:count]


def sample_inside(domain: Domain, count: int, seed: int = 0) -> np.ndarray:
    return _sample_inside(domain, count, np.random.default_rng(seed))
