"""Brute-force ground truth: grid conjugates, grid proxes, 1-D bisection resolvents.

These routines share no code with the closed forms they check.  Grids are
limited to one or two axes since the cost grows as points**dim.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import convex, monotone
from .errors import DimensionError, OracleError

CHUNK = 1 << 20  # grid points evaluated per batch


@dataclass(frozen=True, eq=False)
class GridSpec:
    lower: np.ndarray
    upper: np.ndarray
    points: int = 2001

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float, ndmin=1)
        up = np.array(self.upper, dtype=float, ndmin=1)
        if lo.shape != up.shape or lo.ndim != 1:
            raise DimensionError("grid bounds must be vectors of equal length")
        if not 1 <= lo.size <= 2:
            raise DimensionError("grid oracles support one or two axes only")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(up)) or np.any(lo >= up):
            raise ValueError("grid needs finite bounds with lower < upper")
        if self.points < 3 or self.points % 2 == 0:
            raise ValueError("points per axis must be odd and >= 3")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def symmetric(cls, half_width: float, dim: int = 1, points: int = 2001) -> "GridSpec":
        return cls(-half_width * np.ones(dim), half_width * np.ones(dim), points)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def step(self) -> np.ndarray:
        return (self.upper - self.lower) / (self.points - 1)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, up, self.points) for lo, up in zip(self.lower, self.upper)]

    def _chunks(self):
        """Yield (flat index offset, points array) in lexicographic order."""
        axes = self.axes()
        if self.dim == 1:
            yield 0, axes[0][:, None]
            return
        a0, a1 = axes
        rows = max(1, CHUNK // self.points)
        for i0 in range(0, self.points, rows):
            block = a0[i0:i0 + rows]
            pts = np.stack(np.meshgrid(block, a1, indexing="ij"), axis=-1).reshape(-1, 2)
            yield i0 * self.points, pts

    def on_boundary(self, flat_index: int) -> bool:
        idx = np.unravel_index(flat_index, (self.points,) * self.dim)
        return any(i in (0, self.points - 1) for i in idx)


class GridSup(NamedTuple):
    value: float
    point: np.ndarray
    at_boundary: bool


def _values(f) -> Callable:
    if isinstance(f, convex.ConvexFn):
        return f._value
    return f


def _scan(objective: Callable, g: GridSpec):
    """Maximize objective over the grid; first (lexicographic) maximizer wins."""
    best_val, best_idx, best_pt = -np.inf, -1, None
    for offset, pts in g._chunks():
        vals = objective(pts)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_idx, best_pt = float(vals[k]), offset + k, pts[k].copy()
    if best_idx < 0:
        raise OracleError("function is +inf on the whole grid")
    return best_val, best_idx, best_pt


def grid_conjugate(f_values, g: GridSpec, x_star) -> GridSup:
    """max over the grid of <y, x*> - f(y), flagging maxima on the boundary."""
    f = _values(f_values)
    s = np.array(x_star, dtype=float, ndmin=1)
    if s.shape != (g.dim,):
        raise DimensionError("x* must match the grid dimension")
    val, idx, pt = _scan(lambda ys: ys @ s - f(ys), g)
    return GridSup(val, pt, g.on_boundary(idx))


def grid_prox(f_values, g: GridSpec, x) -> np.ndarray:
    """argmin over the grid of f(y) + ||x - y||^2 / 2."""
    f = _values(f_values)
    x = np.array(x, dtype=float, ndmin=1)
    if x.shape != (g.dim,):
        raise DimensionError("x must match the grid dimension")
    _, _, pt = _scan(lambda ys: -(f(ys) + 0.5 * np.sum((ys - x) ** 2, axis=-1)), g)
    return pt


def grid_envelope(f_values, g: GridSpec, x) -> float:
    """min over the grid of f(y) + ||x - y||^2 / 2."""
    f = _values(f_values)
    x = np.array(x, dtype=float, ndmin=1)
    if x.shape != (g.dim,):
        raise DimensionError("x must match the grid dimension")
    val, _, _ = _scan(lambda ys: -(f(ys) + 0.5 * np.sum((ys - x) ** 2, axis=-1)), g)
    return -val


# -- 1-D bisection ----------------------------------------------------------

INF = np.inf


def _cone_interval(lo: float, hi: float, y: float) -> tuple[float, float]:
    """Normal cone of [lo, hi] at y; an empty value is sent to -inf/+inf."""
    if y < lo:
        return -INF, -INF
    if y > hi:
        return INF, INF
    return (-INF if y == lo else 0.0), (INF if y == hi else 0.0)


def _projection_interval(T) -> tuple[float, float]:
    if isinstance(T, monotone.NormalConeBox):
        return float(T.lower[0]), float(T.upper[0])
    if isinstance(T, monotone.NormalConeBall):
        c = float(T.center[0])
        return c - T.radius, c + T.radius
    if isinstance(T, (monotone.Zero, monotone.NormalConeAffine)):
        return -INF, INF  # 1-D: the whole line
    raise OracleError(f"no 1-D projection set for {type(T).__name__}")


def _subdiff_interval(f: convex.ConvexFn, y: float) -> tuple[float, float]:
    if isinstance(f, convex.Quadratic):
        g = f.alpha * (y - float(f.center[0]))
        return g, g
    if isinstance(f, convex.QuadraticKernel):
        return y, y
    if isinstance(f, convex.AbsSum):
        lam = float(f.weights[0])
        return (lam, lam) if y > 0 else (-lam, -lam) if y < 0 else (-lam, lam)
    if isinstance(f, convex.IndicatorBox):
        return _cone_interval(float(f.lower[0]), float(f.upper[0]), y)
    if isinstance(f, convex.IndicatorBall):
        c = float(f.center[0])
        return _cone_interval(c - f.radius, c + f.radius, y)
    if isinstance(f, convex.SupportInterval):
        d, r = float(f.delta[0]), float(f.rho[0])
        return (r, r) if y > 0 else (d, d) if y < 0 else (d, r)
    if isinstance(f, convex.Linear):
        return float(f.a[0]), float(f.a[0])
    if isinstance(f, convex.Conjugate):
        rewritten = f.inner._symbolic_conjugate()
        if rewritten is not None:
            return _subdiff_interval(rewritten, y)
    raise OracleError(f"no subgradient selection for {type(f).__name__}")


def _graph_interval(A, y: float) -> tuple[float, float]:
    """[inf A(y), sup A(y)] for a 1-D operator, empty values sent to +-inf."""
    if isinstance(A, monotone.Zero):
        return 0.0, 0.0
    if isinstance(A, monotone.ScaledIdentity):
        return A.alpha * y, A.alpha * y
    if isinstance(A, (monotone.NormalConeBox, monotone.NormalConeBall, monotone.NormalConeAffine)):
        lo, hi = _projection_interval(A)
        return _cone_interval(lo, hi, y)
    if isinstance(A, monotone.SubdiffSupportInterval):
        d, r = float(A.delta[0]), float(A.rho[0])
        return (r, r) if y > 0 else (d, d) if y < 0 else (d, r)
    if isinstance(A, monotone.AffineMonotone):
        v = float(A.matrix[0, 0]) * y + float(A.offset[0])
        return v, v
    if isinstance(A, monotone.SubdiffOf):
        return _subdiff_interval(A.function, y)
    if isinstance(A, monotone.ScaledBy):
        lo, hi = _graph_interval(A.inner, y)
        return A.factor * lo, A.factor * hi
    if isinstance(A, monotone.WienerResidual):
        # A(y) = g^{-1}(y) - y with g(u) = u - proj_[lo,hi](u) + r nondecreasing
        lo, hi = _projection_interval(A.transform)
        r = float(A.offset[0])
        if y > r:
            u = y - r + hi
            return u - y, u - y
        if y < r:
            u = y - r + lo
            return u - y, u - y
        return lo - y, hi - y
    raise OracleError(f"bisection oracle does not handle {type(A).__name__}")


def bisect_resolvent_1d(A, gamma: float, x: float, tol: float = 1e-10) -> float:
    """Solve x in y + gamma A(y) by bisection on the monotone graph."""
    if A.dim != 1:
        raise DimensionError("bisection oracle is for 1-D operators")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    x = float(np.asarray(x, dtype=float).reshape(-1)[0])
    if isinstance(A, monotone.Inverse):
        # y = J_{gamma B^{-1}} x  <=>  y = x - gamma u with u = J_{B/gamma}(x/gamma)
        u = bisect_resolvent_1d(A.inner, 1.0 / gamma, x / gamma, tol / max(gamma, 1.0))
        return x - gamma * u
    if isinstance(A, monotone.ScaledBy):
        return bisect_resolvent_1d(A.inner, gamma * A.factor, x, tol)
    if isinstance(A, monotone.SubdiffOf) and isinstance(A.function, convex.Conjugate):
        # the subdifferential of g* is the inverse of the subdifferential of g
        return bisect_resolvent_1d(monotone.Inverse(monotone.SubdiffOf(A.function.inner)), gamma, x, tol)

    def side(y):
        a_lo, a_hi = _graph_interval(A, y)
        if y + gamma * a_lo > x:
            return 1
        if y + gamma * a_hi < x:
            return -1
        return 0

    width = 10.0 * (1.0 + abs(x))
    lo, hi = x - width, x + width
    if side(lo) > 0 or side(hi) < 0:
        raise OracleError("resolvent lies outside the bisection bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        s = side(mid)
        if s == 0:
            return mid
        if s > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
