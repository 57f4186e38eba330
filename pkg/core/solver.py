"""Collocation solver for A_s u = f in a domain with exterior data u = g"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import lu_factor, lu_solve
from scipy.special import gamma

from core.config import (GRID_COARSENESS_BOUND, KERNEL_NORMALIZATION_TOLERANCE, MAX_GRID_NODES,
                         RESIDUAL_TOLERANCE, unknowns_cap)
from core.errors import (GridTooCoarse, GridTooLarge, InvalidScenario, KernelNotNormalized,
                         SingularSystem, UnsupportedOperator)
from core.fields import BOUNDED, C2_NEAR_X, COMPACT, VANISHING, ScalarField, constant, zero
from core.geometry import Ball, Domain, as_points, sample_inside
from core.measures import StableOperatorSpec, ellipticity_constant, measure_nodes, sphere_area
from core.operators import Estimate, apply_As
from core.quadrature import (QuadratureSpec, circle_directions, dyadic_edges, fibonacci_sphere,
                             gauss_jacobi_left, gauss_legendre, geometric_edges, panel_rule)
from utils.logger import get_logger, warn
from utils.parallel import chunked, ordered_map, resolve_jobs

logger = get_logger("lab.solver")

ROW_CHUNK = 128
ANGULAR_PER_SECTOR = 32


def _box_margin(domain: Domain, h: float) -> float:
    share = 0.25 if domain.dimension == 1 else 0.125
    return max(4.0 * h, share * domain.diameter)


@dataclass
class Grid:
    """Uniform node lattice on a box around the domain; nodes in the domain are unknowns"""

    lower: np.ndarray
    h: float
    shape: Tuple[int, ...]
    domain: Domain
    nodes: np.ndarray = field(init=False, repr=False)
    interior: np.ndarray = field(init=False, repr=False)
    distances: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidScenario("grid spacing must be positive", {"h": self.h})
        size = int(np.prod(self.shape))
        if size > MAX_GRID_NODES:
            raise GridTooLarge("grid exceeds the node cap", {"nodes": size, "cap": MAX_GRID_NODES})
        mesh = np.meshgrid(*self.axes, indexing="ij")
        self.nodes = np.column_stack([m.ravel() for m in mesh])
        inside, d, _ = self.domain.distance(self.nodes)
        self.interior = np.flatnonzero(inside & self.domain.contains(self.nodes))
        self.distances = d

    @classmethod
    def for_domain(cls, domain: Domain, h: float) -> "Grid":
        lo, hi = domain.bounding_box()
        pad = int(np.ceil(_box_margin(domain, h) / h - 1e-9))
        lower = lo - pad * h
        counts = np.ceil((hi - lo) / h - 1e-9).astype(int) + 2 * pad + 1
        return cls(lower=lower, h=float(h), shape=tuple(int(c) for c in counts), domain=domain)

    @property
    def dimension(self) -> int:
        return len(self.shape)

    @property
    def axes(self) -> List[np.ndarray]:
        return [self.lower[k] + self.h * np.arange(n) for k, n in enumerate(self.shape)]

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.h * (np.asarray(self.shape) - 1)

    @property
    def exterior(self) -> np.ndarray:
        mask = np.ones(len(self.nodes), dtype=bool)
        mask[self.interior] = False
        return np.flatnonzero(mask)

    def multi_index(self, flat: np.ndarray) -> np.ndarray:
        return np.column_stack(np.unravel_index(flat, self.shape))

    def locate(self, points, tol: float = 1e-9) -> Tuple[np.ndarray, np.ndarray]:
        """(on_node, flat index) for points that coincide with lattice nodes"""
        p = as_points(points, self.dimension)
        steps = (p - self.lower) / self.h
        rounded = np.rint(steps)
        on = np.all(np.abs(steps - rounded) < tol, axis=1)
        on &= np.all((rounded >= 0) & (rounded < np.asarray(self.shape)), axis=1)
        flat = np.zeros(len(p), dtype=int)
        if on.any():
            flat[on] = np.ravel_multi_index(tuple(rounded[on].astype(int).T), self.shape)
        return on, flat


@dataclass
class DirichletProblem:
    """A_s u = f in the domain, u = g outside, on a grid of spacing h"""

    spec: StableOperatorSpec
    domain: Domain
    f: ScalarField
    g: ScalarField
    h: float
    grid: Grid = field(init=False, repr=False)

    def __post_init__(self):
        d = self.domain.dimension
        if self.spec.dimension != d or self.f.dimension != d or self.g.dimension != d:
            raise InvalidScenario("spec, domain and data dimensions differ",
                                  {"spec": self.spec.dimension, "domain": d})
        if d > 2:
            raise UnsupportedOperator("grid solves are limited to d <= 2", {"dimension": d})
        ellipticity_constant(self.spec.measure, self.spec.s)
        self.grid = Grid.for_domain(self.domain, self.h)
        unknowns = len(self.grid.interior)
        cap = unknowns_cap(d)
        if unknowns > cap:
            raise GridTooLarge("too many unknowns for a dense solve", {"unknowns": unknowns, "cap": cap})

    def with_spacing(self, h: float) -> "DirichletProblem":
        return DirichletProblem(self.spec, self.domain, self.f, self.g, h)

    def to_dict(self) -> Dict:
        return {
            "spec": self.spec.to_dict(),
            "domain": self.domain.to_dict(),
            "f": self.f.describe(),
            "g": self.g.describe(),
            "h": self.h,
        }


@dataclass
class DiscreteSolution:
    problem: DirichletProblem
    values: np.ndarray
    residual: float
    error_estimate: float = float("nan")

    @property
    def grid(self) -> Grid:
        return self.problem.grid

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior]

    def nodes_away_from_boundary(self, multiple: float = 4.0) -> np.ndarray:
        """Interior node indices with d_x >= multiple * h"""
        interior = self.grid.interior
        return interior[self.grid.distances[interior] >= multiple * self.grid.h - 1e-12]

    def to_frame(self) -> pd.DataFrame:
        grid = self.grid
        idx = grid.interior
        frame = pd.DataFrame(grid.nodes[idx], columns=[f"x{k + 1}" for k in range(grid.dimension)])
        frame["value"] = self.values[idx]
        frame["d_x"] = grid.distances[idx]
        return frame

    def as_field(self) -> ScalarField:
        """Nodal interpolant inside the domain, exact exterior data outside"""
        grid, g, domain = self.grid, self.problem.g, self.problem.domain
        axes = grid.axes
        if grid.dimension == 1:
            def interpolate(p):
                return np.interp(p[:, 0], axes[0], self.values)
        else:
            table = RegularGridInterpolator(tuple(axes), self.values.reshape(grid.shape),
                                            method="linear", bounds_error=False, fill_value=None)

            def interpolate(p):
                return table(p)

        def func(p):
            out = np.array(g(p), dtype=float)
            inside = domain.contains(p)
            if inside.any():
                out[inside] = interpolate(p[inside])
            return out

        def breaks(x, theta):
            crossings = []
            for k in range(grid.dimension):
                if abs(theta[k]) > 1e-14:
                    crossings.append(np.abs((axes[k] - x[k]) / theta[k]))
            for direction in (theta, -theta):
                for r0, r1 in domain.ray_chords(x, direction):
                    crossings.append(np.abs([r0, r1]))
            extra = g.break_points(x, theta)
            if extra.size:
                crossings.append(extra)
            return np.unique(np.concatenate(crossings))

        box_radius = float(max(np.linalg.norm(grid.lower), np.linalg.norm(grid.upper)))
        far = g.far_radius()
        bound = float(np.max(np.abs(self.values)))
        if g.bound is not None:
            bound = max(bound, g.bound)
        return ScalarField(
            func=func,
            dimension=grid.dimension,
            regularity=C2_NEAR_X,
            support_radius=max(far, box_radius) if g.decay == COMPACT else None,
            decay=g.decay,
            bound=bound,
            effective_radius=max(far, box_radius) if g.decay == VANISHING and far is not None else None,
            breaks=breaks,
            name=f"I[{g.name}]",
        )


# ---------------------------------------------------------------------------
# kernel masses against hat functions
# ---------------------------------------------------------------------------

def _P(t: np.ndarray, s: float) -> np.ndarray:
    return -t ** (-2.0 * s) / (2.0 * s)


def _Q(t: np.ndarray, s: float) -> np.ndarray:
    if abs(1.0 - 2.0 * s) < 1e-8:
        return np.log(t)
    return t ** (1.0 - 2.0 * s) / (1.0 - 2.0 * s)


CLOSED_FORM_OFFSETS = 8


def hat_masses(count: int, s: float) -> Tuple[np.ndarray, np.ndarray]:
    """Kernel mass of each hat at offset m in units of h, for interior and box-edge hats

    full[m] integrates |tau|^(-1-2s) against the hat centred at m (m >= 2), the
    outer half of the neighbour hat at m = 1 plus the near-field quadratic term.
    edge[m] keeps only the half of the hat inside the box.
    """
    m = np.arange(count + 1, dtype=float)
    rising = np.zeros(count + 1)
    falling = np.zeros(count + 1)
    lo = m[2:CLOSED_FORM_OFFSETS]
    rising[2:CLOSED_FORM_OFFSETS] = _Q(lo, s) - _Q(lo - 1, s) - (lo - 1) * (_P(lo, s) - _P(lo - 1, s))
    lo = m[1:CLOSED_FORM_OFFSETS]
    falling[1:CLOSED_FORM_OFFSETS] = (lo + 1) * (_P(lo + 1, s) - _P(lo, s)) - (_Q(lo + 1, s) - _Q(lo, s))
    if count >= CLOSED_FORM_OFFSETS:
        # closed forms cancel badly at far offsets
        t, w = gauss_legendre(12)
        far = m[CLOSED_FORM_OFFSETS:, None]
        rising[CLOSED_FORM_OFFSETS:] = ((t * (far - 1 + t) ** (-1.0 - 2.0 * s)) @ w)
        falling[CLOSED_FORM_OFFSETS:] = (((1.0 - t) * (far + t) ** (-1.0 - 2.0 * s)) @ w)
    near = 1.0 / (2.0 - 2.0 * s)
    full = rising + falling
    full[1] += near
    edge = rising.copy()
    edge[1] = near
    full[0] = edge[0] = 0.0
    return full, edge


def near_window_constant(s: float) -> float:
    """Integral of |z|^(-2s) over [-1, 1]^2"""
    value, _ = quad(lambda phi: np.cos(phi) ** (2.0 * s - 2.0), 0.0, np.pi / 4.0)
    return 8.0 / (2.0 - 2.0 * s) * value


def cell_moments(shape: Tuple[int, int], s: float) -> np.ndarray:
    """Bilinear corner moments of |z|^(-2-2s) on unit cells with lower corner (a, b)

    Returns an array [corner_a, corner_b, a + n1, b + n2] for a in [-n1, n1),
    b in [-n2, n2); the four cells touching the origin are zeroed.
    """
    n1, n2 = shape
    A = np.arange(-n1, n1, dtype=float)
    B = np.arange(-n2, n2, dtype=float)

    def moments(a, b, order):
        t, w = gauss_legendre(order)
        z1 = a[:, None, None, None] + t[None, None, :, None]
        z2 = b[None, :, None, None] + t[None, None, None, :]
        kernel = (z1 ** 2 + z2 ** 2) ** (-1.0 - s) * (w[:, None] * w[None, :])
        xi = t[:, None]
        eta = t[None, :]
        out = np.empty((2, 2, len(a), len(b)))
        for ca, pa in ((0, 1.0 - xi), (1, xi)):
            for cb, pb in ((0, 1.0 - eta), (1, eta)):
                out[ca, cb] = np.sum(kernel * (pa * pb)[None, None], axis=(2, 3))
        return out

    with np.errstate(divide="ignore", invalid="ignore"):
        table = moments(A, B, 4)
        near_a = np.flatnonzero(np.maximum(np.abs(A), np.abs(A + 1)) <= 4)
        near_b = np.flatnonzero(np.maximum(np.abs(B), np.abs(B + 1)) <= 4)
        table[:, :, near_a[:, None], near_b[None, :]] = moments(A[near_a], B[near_b], 10)
    for a in (-1, 0):
        for b in (-1, 0):
            table[:, :, a + n1, b + n2] = 0.0
    return table


# ---------------------------------------------------------------------------
# exterior (outside the box) contributions
# ---------------------------------------------------------------------------

def _outer_t_rule(L: np.ndarray, s: float, reach: Optional[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes/weights in t = (L/r)^(2s), r in (L, reach), as arrays broadcast against L"""
    if reach is None:
        edges = geometric_edges(0.0, 1.0, "left", levels=24, ratio=0.35)
        t, w = panel_rule(edges, 8)
        return np.broadcast_to(t, L.shape + t.shape), np.broadcast_to(w, L.shape + t.shape)
    t_min = np.clip((L / reach) ** (2.0 * s), 0.0, 1.0)[..., None]
    u, w = panel_rule(geometric_edges(0.0, 1.0, "both", levels=6, ratio=0.3), 8)
    return t_min + (1.0 - t_min) * u, (1.0 - t_min) * w


def _g_outside_box(g: ScalarField, lower: np.ndarray, upper: np.ndarray) -> str:
    """'zero', 'constant' or 'general' for g restricted to the outside of the box"""
    if g.is_zero:
        return "zero"
    if g.is_constant:
        return "constant"
    far = g.far_radius()
    if g.decay == COMPACT and far is not None and np.all(lower <= -far) and np.all(upper >= far):
        return "zero"
    return "general"


def _line_exterior(x: np.ndarray, g: ScalarField, axis_dir: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                   s: float) -> Tuple[np.ndarray, np.ndarray]:
    """T and G for rays along +-axis_dir from points x leaving the box [lo, hi]"""
    k = int(np.argmax(np.abs(axis_dir)))
    T = np.zeros(len(x))
    G = np.zeros(len(x))
    kind = _g_outside_box(g, lo, hi)
    far = g.far_radius()
    for sign, L in ((1.0, hi[k] - x[:, k]), (-1.0, x[:, k] - lo[k])):
        T += L ** (-2.0 * s) / (2.0 * s)
        if kind == "zero":
            continue
        if kind == "constant":
            G += g.constant_value * L ** (-2.0 * s) / (2.0 * s)
            continue
        reach = None if far is None else float(np.max(np.linalg.norm(x, axis=1))) + far
        t, w = _outer_t_rule(L, s, reach)
        r = L[:, None] * t ** (-1.0 / (2.0 * s))
        points = x[:, None, :] + sign * r[..., None] * axis_dir[None, None, :]
        values = g(points.reshape(-1, x.shape[1])).reshape(r.shape)
        G += L ** (-2.0 * s) / (2.0 * s) * np.sum(values * w, axis=1)
    return T, G


def _box_exterior_2d(x: np.ndarray, g: ScalarField, lo: np.ndarray, hi: np.ndarray,
                     s: float) -> Tuple[np.ndarray, np.ndarray]:
    """T and G over all directions leaving the box, angular Gauss rule per box sector"""
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    angles = np.sort(np.mod(np.arctan2(corners[None, :, 1] - x[:, None, 1],
                                       corners[None, :, 0] - x[:, None, 0]), 2.0 * np.pi), axis=1)
    edges = np.column_stack([angles, angles[:, :1] + 2.0 * np.pi])
    t, w = gauss_legendre(ANGULAR_PER_SECTOR)
    span = np.diff(edges, axis=1)
    phi = (edges[:, :-1, None] + span[:, :, None] * t[None, None, :]).reshape(len(x), -1)
    wphi = (span[:, :, None] * w[None, None, :]).reshape(len(x), -1)
    c, sn = np.cos(phi), np.sin(phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        reach_x = np.where(c > 0, (hi[0] - x[:, :1]) / c, np.where(c < 0, (lo[0] - x[:, :1]) / c, np.inf))
        reach_y = np.where(sn > 0, (hi[1] - x[:, 1:]) / sn, np.where(sn < 0, (lo[1] - x[:, 1:]) / sn, np.inf))
    rho = np.minimum(reach_x, reach_y)
    base = rho ** (-2.0 * s) / (2.0 * s)
    T = np.sum(base * wphi, axis=1)
    kind = _g_outside_box(g, lo, hi)
    if kind == "zero":
        return T, np.zeros(len(x))
    if kind == "constant":
        return T, g.constant_value * T
    far = g.far_radius()
    reach = None if far is None else float(np.max(np.linalg.norm(x, axis=1))) + far
    tt, wt = _outer_t_rule(rho, s, reach)
    r = rho[..., None] * tt ** (-1.0 / (2.0 * s))
    points = np.stack([x[:, None, None, 0] + r * c[..., None], x[:, None, None, 1] + r * sn[..., None]], axis=-1)
    values = g(points.reshape(-1, 2)).reshape(r.shape)
    G = np.sum(base * wphi * np.sum(values * wt, axis=-1), axis=1)
    return T, G


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _operator_kind(spec: StableOperatorSpec) -> str:
    measure = spec.measure
    if spec.dimension == 1:
        return "line"
    if not measure.atoms and measure.uniform_density > 0:
        return "isotropic"
    if measure.is_axis_atomic() and not measure.uniform_density:
        return "axes"
    raise UnsupportedOperator("2D grids support the isotropic density or axis atoms only",
                              {"measure": measure.to_dict()})


def _axis_kappas(spec: StableOperatorSpec) -> np.ndarray:
    """(1 - s)(w_+ + w_-) per coordinate axis"""
    dirs, weights = measure_nodes(spec.measure)
    kappas = np.zeros(spec.dimension)
    for direction, weight in zip(dirs, weights):
        kappas[int(np.argmax(np.abs(direction)))] += weight
    return (1.0 - spec.s) * kappas


def _coarseness(problem: DirichletProblem, f_nodes: np.ndarray) -> float:
    grid = problem.grid
    values = f_nodes.reshape(grid.shape)
    curvature = 0.0
    for k in range(grid.dimension):
        if grid.shape[k] < 3:
            continue
        second = np.abs(np.diff(values, n=2, axis=k))
        pad = [(0, 0)] * grid.dimension
        pad[k] = (1, 1)
        second = np.pad(second, pad).ravel()[grid.interior]
        if second.size:
            curvature = max(curvature, float(second.max()) / grid.h ** 2)
    scale = max(1.0, float(np.max(np.abs(f_nodes[grid.interior]))) if len(grid.interior) else 1.0)
    return grid.h ** (2.0 - 2.0 * problem.spec.s) * curvature / scale


def _line_block(grid: Grid, rows: np.ndarray, kappas: np.ndarray, full: np.ndarray,
                edge: np.ndarray) -> np.ndarray:
    """Dense coefficient block (rows x box nodes) for operators acting along coordinate lines"""
    multi = grid.multi_index(rows)
    block = np.zeros((len(rows), len(grid.nodes)))
    for k, kappa in enumerate(kappas):
        if kappa == 0:
            continue
        n_k = grid.shape[k]
        positions = np.arange(n_k)
        offsets = np.abs(positions[None, :] - multi[:, k:k + 1])
        coeff = full[offsets]
        coeff[:, 0] = edge[offsets[:, 0]]
        coeff[:, -1] = edge[offsets[:, -1]]
        line = np.repeat(multi[:, None, :], n_k, axis=1)
        line[:, :, k] = positions[None, :]
        cols = np.ravel_multi_index(tuple(line.reshape(-1, grid.dimension).T), grid.shape).reshape(len(rows), n_k)
        np.add.at(block, (np.arange(len(rows))[:, None], cols), kappa * coeff)
    return block


def _isotropic_block(grid: Grid, rows: np.ndarray, moments: np.ndarray, window: float) -> np.ndarray:
    n1, n2 = grid.shape
    rows_multi = grid.multi_index(rows)
    cols_multi = grid.multi_index(np.arange(len(grid.nodes)))
    P = cols_multi[None, :, 0] - rows_multi[:, None, 0]
    Q = cols_multi[None, :, 1] - rows_multi[:, None, 1]
    block = np.zeros(P.shape)
    for ca in (0, 1):
        valid_a = (cols_multi[:, 0] - ca >= 0) & (cols_multi[:, 0] - ca <= n1 - 2)
        for cb in (0, 1):
            valid = valid_a & (cols_multi[:, 1] - cb >= 0) & (cols_multi[:, 1] - cb <= n2 - 2)
            block += np.where(valid[None, :], moments[ca, cb][P - ca + n1, Q - cb + n2], 0.0)
    block[(np.abs(P) + np.abs(Q)) == 1] += window / 4.0
    return block


def assemble(problem: DirichletProblem, n_jobs: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Collocation matrix over interior nodes and right-hand side with the exterior data moved over"""
    grid, spec, g = problem.grid, problem.spec, problem.g
    s, h = spec.s, grid.h
    kind = _operator_kind(spec)
    f_nodes = problem.f(grid.nodes)
    coarse = _coarseness(problem, f_nodes)
    if coarse > GRID_COARSENESS_BOUND:
        raise GridTooCoarse("grid too coarse for the source term",
                            {"h": h, "indicator": coarse, "bound": GRID_COARSENESS_BOUND})
    interior, exterior = grid.interior, grid.exterior
    g_exterior = g(grid.nodes[exterior])
    lo, hi = grid.lower, grid.upper
    scale = h ** (-2.0 * s)

    if kind == "isotropic":
        kappas = np.array([2.0 * (1.0 - s) * spec.measure.uniform_density])
        moments = cell_moments(grid.shape, s)
        window = near_window_constant(s)
    else:
        kappas = _axis_kappas(spec) if kind == "axes" else \
            np.array([(1.0 - s) * float(np.sum(measure_nodes(spec.measure)[1]))])
        full, edge = hat_masses(max(grid.shape), s)

    def rows_for(rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = grid.nodes[rows]
        if kind == "isotropic":
            block = kappas[0] * _isotropic_block(grid, rows, moments, window)
            T, G = _box_exterior_2d(x, g, lo, hi, s)
            T, G = kappas[0] * T, kappas[0] * G
        else:
            block = _line_block(grid, rows, kappas, full, edge)
            T = np.zeros(len(rows))
            G = np.zeros(len(rows))
            for k, kappa in enumerate(kappas):
                if kappa:
                    tk, gk = _line_exterior(x, g, np.eye(grid.dimension)[k], lo, hi, s)
                    T += kappa * tk
                    G += kappa * gk
        block *= scale
        matrix_rows = -block[:, interior]
        local = np.searchsorted(interior, rows)
        matrix_rows[np.arange(len(rows)), local] += block.sum(axis=1) + T
        rhs = f_nodes[rows] + block[:, exterior] @ g_exterior + G
        return matrix_rows, rhs

    n_chunks = max(1, int(np.ceil(len(interior) / ROW_CHUNK)))
    parts = ordered_map(rows_for, chunked(interior, n_chunks), n_jobs=resolve_jobs(n_jobs))
    if not parts:
        return np.zeros((0, 0)), np.zeros(0)
    matrix = np.vstack([p[0] for p in parts])
    rhs = np.concatenate([p[1] for p in parts])
    logger.debug(f"assembled {kind} system: {len(interior)} unknowns, h={h:g}, s={s:g}")
    return matrix, rhs


def solve(problem: DirichletProblem, estimate_error: bool = False, n_jobs: Optional[int] = None) -> DiscreteSolution:
    """Dense LU solve; exterior nodes carry g"""
    grid = problem.grid
    matrix, rhs = assemble(problem, n_jobs)
    values = problem.g(grid.nodes)
    residual = 0.0
    if rhs.size:
        with np.errstate(all="ignore"):
            factors = lu_factor(matrix, check_finite=True)
            u = lu_solve(factors, rhs)
            residual = float(np.linalg.norm(matrix @ u - rhs) / max(np.linalg.norm(rhs), 1e-300)) \
                if np.any(rhs) else float(np.linalg.norm(matrix @ u))
        if not np.isfinite(residual) or residual > RESIDUAL_TOLERANCE:
            raise SingularSystem("collocation system could not be solved to tolerance",
                                 {"residual": residual, "unknowns": len(rhs)})
        values[grid.interior] = u
    solution = DiscreteSolution(problem=problem, values=values, residual=residual)
    if estimate_error:
        solution.error_estimate = nodal_change(solution, solve(problem.with_spacing(2.0 * problem.h), n_jobs=n_jobs))
    logger.debug(f"solved {len(rhs)} unknowns, residual {residual:.2e}")
    return solution


def nodal_change(fine: DiscreteSolution, coarse: DiscreteSolution, multiple: float = 4.0) -> float:
    """Max difference at shared interior nodes with d_x >= multiple * coarse h"""
    idx = coarse.nodes_away_from_boundary(multiple)
    on, flat = fine.grid.locate(coarse.grid.nodes[idx])
    if not on.any():
        return float("nan")
    return float(np.max(np.abs(fine.values[flat[on]] - coarse.values[idx[on]])))


def refinement_study(problem: DirichletProblem, levels: int = 3, n_jobs: Optional[int] = None) -> pd.DataFrame:
    """Nodal change under successive halvings of h, starting from problem.h"""
    solutions = [solve(problem, n_jobs=n_jobs)]
    for _ in range(levels - 1):
        solutions.append(solve(problem.with_spacing(solutions[-1].grid.h / 2.0), n_jobs=n_jobs))
    rows = []
    for coarse, fine in zip(solutions[:-1], solutions[1:]):
        rows.append({"h": fine.grid.h, "change": nodal_change(fine, coarse)})
    frame = pd.DataFrame(rows)
    frame["ratio"] = frame["change"] / frame["change"].shift(1)
    return frame


def torsion_function(spec: StableOperatorSpec, domain: Domain, h: float, estimate_error: bool = False,
                     n_jobs: Optional[int] = None) -> DiscreteSolution:
    """A_s phi = 1 in the domain, phi = 0 outside"""
    d = domain.dimension
    return solve(DirichletProblem(spec, domain, constant(1.0, d), zero(d), h), estimate_error, n_jobs)


@dataclass
class ConsistencyReport:
    h: float
    errors: Tuple[float, float]
    order: float
    points: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> Dict:
        return {"h": self.h, "error_h": self.errors[0], "error_2h": self.errors[1], "order": self.order}


def consistency_check(problem: DirichletProblem, n_points: int = 5, seed: int = 0,
                      q: Optional[QuadratureSpec] = None, n_jobs: Optional[int] = None) -> ConsistencyReport:
    """|A_s[I u](x) - f(x)| at off-node points with d_x >= 8 (2h), for h and 2h; measured order"""
    coarse_h = 2.0 * problem.h
    candidates = sample_inside(problem.domain, 50 * n_points, seed)
    keep = problem.domain.dist(candidates) >= 8.0 * coarse_h
    points = candidates[keep][:n_points]
    if not len(points):
        raise InvalidScenario("no interior points at distance 8(2h) from the boundary", {"h": problem.h})
    errors = []
    for p in (problem, problem.with_spacing(coarse_h)):
        u = solve(p, n_jobs=n_jobs).as_field()
        residuals = [abs(apply_As(problem.spec, u, x, q).value - problem.f.value(x)) for x in points]
        errors.append(float(max(residuals)))
    order = float(np.log2(errors[1] / errors[0])) if errors[0] > 0 and errors[1] > 0 else float("inf")
    return ConsistencyReport(h=problem.h, errors=(errors[0], errors[1]), order=order, points=points)


# ---------------------------------------------------------------------------
# exact oracles on balls
# ---------------------------------------------------------------------------

def poisson_constant(d: int, s: float) -> float:
    return gamma(d / 2.0) * np.pi ** (-d / 2.0 - 1.0) * np.sin(np.pi * s)


def _unit_sphere_rule(d: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    if d == 2:
        return circle_directions(n), np.full(n, 2.0 * np.pi / n)
    return fibonacci_sphere(4 * n), np.full(4 * n, 4.0 * np.pi / (4 * n))


def _poisson_integral(s: float, d: int, g: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                      n_angular: int, order: int, reach: Optional[float]) -> float:
    """Integral of g against the Poisson kernel of the unit ball at x"""
    theta, w_theta = _unit_sphere_rule(d, n_angular)
    c = poisson_constant(d, s) * (1.0 - x @ x) ** s
    gap = max(1.0 - float(np.linalg.norm(x)), 1e-6)

    # 1 < |y| < 2, t = |y| - 1 carries the (|y|^2 - 1)^(-s) edge
    zeta = min(0.5 * gap, 0.5)
    t_in, w_in = gauss_jacobi_left(order, -s)
    t_nodes = [zeta * t_in]
    t_weights = [zeta ** (1.0 - s) * w_in]
    tail_t, tail_w = panel_rule(dyadic_edges(zeta, 1.0, 4), order)
    t_nodes.append(tail_t)
    t_weights.append(tail_w * tail_t ** (-s))
    t = np.concatenate(t_nodes)
    wt = np.concatenate(t_weights)
    rho = 1.0 + t
    y = rho[:, None, None] * theta[None, :, :]
    dist = np.linalg.norm(x[None, None, :] - y, axis=2)
    integrand = (2.0 + t)[:, None] ** (-s) * rho[:, None] ** (d - 1) * dist ** (-d)
    values = g(y.reshape(-1, d)).reshape(integrand.shape)
    inner = float(wt @ ((values * integrand) @ w_theta))

    # |y| > 2, w = 2/|y| carries the w^(2s-1) decay
    if reach is not None and reach <= 2.0:
        return c * inner
    if reach is None:
        w_nodes, w_weights = gauss_jacobi_left(order, 2.0 * s - 1.0)
    else:
        w_nodes, w_weights = panel_rule(dyadic_edges(2.0 / reach, 1.0, 2), order)
        w_weights = w_weights * w_nodes ** (2.0 * s - 1.0)
    shifted = theta[None, :, :] - x[None, None, :] * w_nodes[:, None, None] / 2.0
    integrand = 2.0 ** (-2.0 * s) * (1.0 - w_nodes ** 2 / 4.0)[:, None] ** (-s) \
        * np.linalg.norm(shifted, axis=2) ** (-d)
    y = (2.0 / w_nodes)[:, None, None] * theta[None, :, :]
    values = g(y.reshape(-1, d)).reshape(integrand.shape)
    outer = float(w_weights @ ((values * integrand) @ w_theta))
    return c * (inner + outer)


def poisson_ball_solve(s: float, d: int, g: ScalarField, x, n_angular: int = 1024, order: int = 24) -> Estimate:
    """Solution at x of A u = 0 in the unit ball, u = g outside, for the fractional Laplacian"""
    x = as_points(x, d)[0]
    if not np.linalg.norm(x) < 1.0:
        raise InvalidScenario("poisson_ball_solve needs |x| < 1", {"x": x.tolist()})

    def ones(p):
        return np.ones(len(p))

    normalization = _poisson_integral(s, d, ones, x, n_angular, order, None)
    if abs(normalization - 1.0) > KERNEL_NORMALIZATION_TOLERANCE:
        raise KernelNotNormalized("Poisson kernel does not integrate to one",
                                  {"integral": normalization, "s": s, "d": d, "x": x.tolist()})
    if g.is_zero:
        return Estimate(0.0, 0.0)
    if g.is_constant:
        return Estimate(g.constant_value, abs(normalization - 1.0) * abs(g.constant_value))
    far = g.far_radius()
    reach = far if g.decay in (COMPACT, VANISHING) else None
    fine = _poisson_integral(s, d, g, x, n_angular, order, reach)
    coarse = _poisson_integral(s, d, g, x, max(8, n_angular // 2), max(8, order - 8), reach)
    return Estimate(fine, abs(fine - coarse))


def poisson_ball_radial(s: float, d: int, g_radial: Callable[[float], float], r,
                        edge_exponent: float = 0.0, cut: Optional[float] = None) -> np.ndarray:
    """Poisson integral for radial data g(|y|) (|y| - 1)^edge_exponent at radii r < 1

    Uses the mean of |x - rho theta|^(-d) over the sphere, |S| rho^(2-d)/(rho^2 - r^2),
    leaving a single radial integral with an algebraic endpoint at rho = 1.
    """
    radii = np.atleast_1d(np.asarray(r, dtype=float))
    area = sphere_area(d) if d > 1 else 2.0
    out = np.zeros(len(radii))
    for i, radius in enumerate(radii):
        def smooth(rho, radius=radius):
            return g_radial(rho) * (rho + 1.0) ** (-s) * rho / (rho ** 2 - radius ** 2)

        zeta = min(1.0, 10.0 * (1.0 - radius))
        total, _ = quad(smooth, 1.0, 1.0 + zeta, weight="alg", wvar=(-s + edge_exponent, 0.0), limit=200)
        if zeta < 1.0:
            edges = geometric_edges(1.0 + zeta, 2.0, "left", levels=8, ratio=0.5)
            for lo, hi in zip(edges[:-1], edges[1:]):
                part, _ = quad(lambda rho: smooth(rho) * (rho - 1.0) ** (-s + edge_exponent), lo, hi, limit=200)
                total += part
        upper = np.inf if cut is None else cut
        if upper > 2.0:
            part, _ = quad(lambda rho: smooth(rho) * (rho - 1.0) ** (-s + edge_exponent), 2.0, upper, limit=400)
            total += part
        out[i] = poisson_constant(d, s) * (1.0 - radius ** 2) ** s * area * total
    return out if np.ndim(r) else float(out[0])


def classical_harmonic_solve(domain: Ball, g_boundary: Callable[[np.ndarray], np.ndarray], x,
                             n: int = 1024) -> np.ndarray:
    """Harmonic extension of boundary data into a ball via the classical Poisson kernel"""
    if not isinstance(domain, Ball):
        raise UnsupportedOperator("classical_harmonic_solve needs a ball", {"domain": domain.to_dict()})
    points = as_points(x, domain.dimension)
    z, w = domain.boundary_nodes(n)
    data = np.asarray(g_boundary(z), dtype=float)
    R, center = domain.radius, domain.center
    d = domain.dimension
    area = sphere_area(d) if d > 1 else 2.0
    rel = points - center
    numerator = R ** 2 - np.sum(rel * rel, axis=1)
    dist = np.linalg.norm(points[:, None, :] - z[None, :, :], axis=2)
    kernel = numerator[:, None] / (area * R * dist ** d)
    return kernel @ (w * data)


def harmonic_field(domain: Ball, g_boundary: Callable[[np.ndarray], np.ndarray], n: int = 1024) -> ScalarField:
    """Classical harmonic extension as a field; radial extension of the data outside"""
    d = domain.dimension

    def func(p):
        out = np.asarray(g_boundary(domain.center + domain.radius * _unit(p - domain.center)), dtype=float)
        inside = domain.contains(p)
        if inside.any():
            out = out.copy()
            out[inside] = classical_harmonic_solve(domain, g_boundary, p[inside], n)
        return out

    z, _ = domain.boundary_nodes(n)
    bound = float(np.max(np.abs(g_boundary(z))))
    return ScalarField(func=func, dimension=d, regularity=C2_NEAR_X, decay=BOUNDED, bound=bound,
                       laplacian=lambda p: np.zeros(len(p)), name="harmonic_extension")


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v, axis=1)
    e1 = np.zeros(v.shape[1])
    e1[0] = 1.0
    return np.where(norm[:, None] > 0, v / np.where(norm > 0, norm, 1.0)[:, None], e1)


@dataclass
class VeryWeakReport:
    residual: float
    scale: float
    terms: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {"residual": self.residual, "scale": self.scale, **self.terms}


def _laplacian(phi: ScalarField, points: np.ndarray, step: float = 1e-4) -> np.ndarray:
    if phi.laplacian is not None:
        return np.asarray(phi.laplacian(points), dtype=float)
    centre = phi(points)
    total = np.zeros(len(points))
    for k in range(phi.dimension):
        e = np.zeros(phi.dimension)
        e[k] = step
        total += (phi(points + e) - 2.0 * centre + phi(points - e)) / step ** 2
    return total


def _gradient(phi: ScalarField, points: np.ndarray, step: float = 1e-6) -> np.ndarray:
    if phi.gradient is not None:
        return np.asarray(phi.gradient(points), dtype=float)
    grad = np.zeros_like(points)
    for k in range(phi.dimension):
        e = np.zeros(phi.dimension)
        e[k] = step
        grad[:, k] = (phi(points + e) - phi(points - e)) / (2.0 * step)
    return grad


def very_weak_residual(u: ScalarField, f: Optional[ScalarField], g_boundary: Callable[[np.ndarray], np.ndarray],
                       phi: ScalarField, domain: Domain, panels: int = 8, order: int = 8,
                       n_boundary: int = 1024) -> VeryWeakReport:
    """|int u (-Lap phi) - int f phi + int_boundary g d_n phi| for a test field vanishing on the boundary"""
    if phi.is_zero:
        return VeryWeakReport(0.0, 1.0)
    x, w = domain.volume_nodes(panels, order)
    lhs_terms = u(x) * -_laplacian(phi, x)
    lhs = float(w @ lhs_terms)
    source = f(x) * phi(x) if f is not None else np.zeros(len(x))
    volume_rhs = float(w @ source)
    z, wz = domain.boundary_nodes(n_boundary)
    normals = domain.outward_normals(z)
    flux = np.sum(_gradient(phi, z) * normals, axis=1) * np.asarray(g_boundary(z), dtype=float)
    boundary = float(wz @ flux)
    residual = abs(lhs - volume_rhs + boundary)
    scale = float(w @ np.abs(lhs_terms) + w @ np.abs(source) + wz @ np.abs(flux))
    if residual > 1e-3 * max(scale, 1e-300):
        warn(logger, f"very weak residual {residual:.3e} against scale {scale:.3e}")
    return VeryWeakReport(residual, max(scale, 1e-300),
                          {"volume_u": lhs, "volume_f": volume_rhs, "boundary": boundary})
