"""Closed-form catalog of proper lsc convex functions.

Every entry knows its value, proximity operator and conjugate value.  The
conjugate is a symbolic rewrite where the catalog contains it (``|.|`` and
box indicators swap, the quadratic kernel is self-conjugate, ...) and a
generic :class:`Conjugate` wrapper otherwise.  All catalog members are in
Gamma_0, so biconjugation is the identity: ``conjugate(conjugate(f))``
returns ``f`` itself.

Evaluation is batched over the leading axes of ``x``; the last axis holds
coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_point

INDICATOR_TOL = 1e-12


def _vec(v) -> np.ndarray:
    arr = np.array(v, dtype=float, ndmin=1)
    if arr.ndim != 1:
        raise ValueError("parameter must be a vector")
    arr.setflags(write=False)
    return arr


def _finite_vec(v) -> np.ndarray:
    arr = _vec(v)
    if not np.all(np.isfinite(arr)):
        raise ValueError("parameter must be finite")
    return arr


def _support_box(lower, upper, s) -> np.ndarray:
    """sigma_[l,u](s) summed over coordinates, with 0 * inf = 0."""
    with np.errstate(invalid="ignore"):
        pos = np.where(s > 0, upper * s, 0.0)
        neg = np.where(s < 0, lower * s, 0.0)
    return np.sum(pos + neg, axis=-1)


def _num(v):
    # scalar for a single point, array for a batch
    return float(v) if np.ndim(v) == 0 else v


def _encode(v):
    return [x if np.isfinite(x) else ("inf" if x > 0 else "-inf") for x in np.asarray(v).tolist()]


class ConvexFn:
    """Base class of catalog entries."""

    dim: int

    def _value(self, x):
        raise NotImplementedError

    def _prox(self, gamma, x):
        raise NotImplementedError

    def _conj_value(self, s):
        raise NotImplementedError

    def _symbolic_conjugate(self) -> "ConvexFn | None":
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Quadratic(ConvexFn):
    """alpha * ||x - center||^2 / 2"""

    alpha: float
    center: np.ndarray

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("Quadratic needs alpha > 0")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "center", _finite_vec(self.center))

    @property
    def dim(self):
        return self.center.size

    def _value(self, x):
        return 0.5 * self.alpha * np.sum((x - self.center) ** 2, axis=-1)

    def _prox(self, gamma, x):
        ga = gamma * self.alpha
        return (x + ga * self.center) / (1.0 + ga)

    def _conj_value(self, s):
        return np.sum(s * s, axis=-1) / (2.0 * self.alpha) + s @ self.center

    def _symbolic_conjugate(self):
        if not np.any(self.center):
            return Quadratic(1.0 / self.alpha, self.center)
        return None

    def to_dict(self):
        return {"type": "quadratic", "alpha": self.alpha, "center": self.center.tolist()}


@dataclass(frozen=True, eq=False)
class QuadraticKernel(ConvexFn):
    """||x||^2 / 2, self-conjugate."""

    dim: int

    def _value(self, x):
        return 0.5 * np.sum(x * x, axis=-1)

    def _prox(self, gamma, x):
        return x / (1.0 + gamma)

    def _conj_value(self, s):
        return 0.5 * np.sum(s * s, axis=-1)

    def _symbolic_conjugate(self):
        return self

    def to_dict(self):
        return {"type": "quadratic_kernel", "dim": self.dim}


@dataclass(frozen=True, eq=False)
class AbsSum(ConvexFn):
    """sum_k weights_k |x_k|"""

    weights: np.ndarray

    def __post_init__(self):
        w = _finite_vec(self.weights)
        if np.any(w < 0):
            raise ValueError("AbsSum weights must be nonnegative")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.weights.size

    def _value(self, x):
        return np.sum(self.weights * np.abs(x), axis=-1)

    def _prox(self, gamma, x):
        return np.sign(x) * np.maximum(np.abs(x) - gamma * self.weights, 0.0)

    def _conj_value(self, s):
        inside = np.all(np.abs(s) <= self.weights + INDICATOR_TOL, axis=-1)
        return np.where(inside, 0.0, np.inf)

    def _symbolic_conjugate(self):
        return IndicatorBox(-self.weights, self.weights)

    def to_dict(self):
        return {"type": "abs_sum", "weights": self.weights.tolist()}


@dataclass(frozen=True, eq=False)
class IndicatorBox(ConvexFn):
    """Indicator of prod_k [lower_k, upper_k]; infinite bounds allowed."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, up = _vec(self.lower), _vec(self.upper)
        if lo.shape != up.shape or np.any(lo > up) or np.any(np.isnan(lo)) or np.any(np.isnan(up)):
            raise ValueError("IndicatorBox needs lower <= upper of equal length")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def dim(self):
        return self.lower.size

    def _value(self, x):
        tol = INDICATOR_TOL * (1.0 + np.abs(x))
        inside = np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)
        return np.where(inside, 0.0, np.inf)

    def _prox(self, gamma, x):
        return np.clip(x, self.lower, self.upper)

    def _conj_value(self, s):
        return _support_box(self.lower, self.upper, s)

    def _symbolic_conjugate(self):
        if np.all(self.lower <= 0) and np.all(self.upper >= 0):
            return SupportInterval(self.lower, self.upper)
        return None

    def to_dict(self):
        return {"type": "indicator_box", "lower": _encode(self.lower), "upper": _encode(self.upper)}


@dataclass(frozen=True, eq=False)
class IndicatorBall(ConvexFn):
    """Indicator of the closed Euclidean ball B(center, radius)."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not (self.radius >= 0 and np.isfinite(self.radius)):
            raise ValueError("IndicatorBall needs a finite radius >= 0")
        object.__setattr__(self, "center", _finite_vec(self.center))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.size

    def _value(self, x):
        d = np.linalg.norm(x - self.center, axis=-1)
        return np.where(d <= self.radius * (1 + INDICATOR_TOL) + INDICATOR_TOL, 0.0, np.inf)

    def _prox(self, gamma, x):
        diff = x - self.center
        d = np.linalg.norm(diff, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(d > self.radius, self.radius / d, 1.0)
        return self.center + scale * diff

    def _conj_value(self, s):
        return s @ self.center + self.radius * np.linalg.norm(s, axis=-1)

    def to_dict(self):
        return {"type": "indicator_ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class SupportInterval(ConvexFn):
    """Support function of prod_k [delta_k, rho_k] with delta_k <= 0 <= rho_k."""

    delta: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        d, r = _vec(self.delta), _vec(self.rho)
        if d.shape != r.shape or np.any(d > 0) or np.any(r < 0):
            raise ValueError("SupportInterval needs delta <= 0 <= rho coordinatewise")
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "rho", r)

    @property
    def dim(self):
        return self.delta.size

    def _value(self, x):
        return _support_box(self.delta, self.rho, x)

    def _prox(self, gamma, x):
        gr, gd = gamma * self.rho, gamma * self.delta
        with np.errstate(invalid="ignore"):
            out = np.where(x > gr, x - gr, np.where(x < gd, x - gd, 0.0))
        return out

    def _conj_value(self, s):
        return IndicatorBox(self.delta, self.rho)._value(s)

    def _symbolic_conjugate(self):
        return IndicatorBox(self.delta, self.rho)

    def to_dict(self):
        return {"type": "support_interval", "delta": _encode(self.delta), "rho": _encode(self.rho)}


@dataclass(frozen=True, eq=False)
class Linear(ConvexFn):
    """<a, x> + beta"""

    a: np.ndarray
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", _finite_vec(self.a))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self):
        return self.a.size

    def _value(self, x):
        return x @ self.a + self.beta

    def _prox(self, gamma, x):
        return x - gamma * self.a

    def _conj_value(self, s):
        # indicator of {a} shifted by -beta; tolerance absorbs x - (x - a) rounding
        tol = 1e-9 * (1.0 + np.max(np.abs(self.a)))
        at_a = np.all(np.abs(s - self.a) <= tol, axis=-1)
        return np.where(at_a, -self.beta, np.inf)

    def to_dict(self):
        return {"type": "linear", "a": self.a.tolist(), "beta": self.beta}


@dataclass(frozen=True, eq=False)
class Conjugate(ConvexFn):
    """Fenchel conjugate of ``inner``, evaluated through Moreau's identities."""

    inner: ConvexFn

    @property
    def dim(self):
        return self.inner.dim

    def _value(self, x):
        return self.inner._conj_value(x)

    def _prox(self, gamma, x):
        return x - gamma * self.inner._prox(1.0 / gamma, x / gamma)

    def _conj_value(self, s):
        return self.inner._value(s)

    def _symbolic_conjugate(self):
        return self.inner

    def to_dict(self):
        return {"type": "conjugate", "inner": self.inner.to_dict()}


def conjugate(f: ConvexFn) -> ConvexFn:
    """Symbolic conjugate, normalized so that ``conjugate(conjugate(f)) is f``."""
    if isinstance(f, Conjugate):
        return f.inner
    rewritten = f._symbolic_conjugate()
    return Conjugate(f) if rewritten is None else rewritten


def value(f: ConvexFn, x):
    """f(x), possibly +inf."""
    x = as_point(x, f.dim)
    return _num(f._value(x))


def prox(f: ConvexFn, gamma: float, x) -> np.ndarray:
    """prox_{gamma f}(x)"""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    x = as_point(x, f.dim)
    return f._prox(float(gamma), x)


def conjugate_value(f: ConvexFn, s):
    s = as_point(s, f.dim)
    return _num(f._conj_value(s))


def envelope(f: ConvexFn, x):
    """Moreau envelope (f box Q)(x) = f(p) + ||x - p||^2 / 2 with p = prox_f(x)."""
    x = as_point(x, f.dim)
    p = f._prox(1.0, x)
    return _num(f._value(p) + 0.5 * np.sum((x - p) ** 2, axis=-1))


def half_sq_norm(x):
    x = np.asarray(x, dtype=float)
    return _num(0.5 * np.sum(x * x, axis=-1))


def from_dict(d: dict) -> ConvexFn:
    kind = d.get("type")
    try:
        if kind == "quadratic":
            return Quadratic(d["alpha"], d["center"])
        if kind == "quadratic_kernel":
            return QuadraticKernel(int(d["dim"]))
        if kind == "abs_sum":
            return AbsSum(d["weights"])
        if kind == "indicator_box":
            return IndicatorBox([float(v) for v in d["lower"]], [float(v) for v in d["upper"]])
        if kind == "indicator_ball":
            return IndicatorBall(d["center"], d["radius"])
        if kind == "support_interval":
            return SupportInterval([float(v) for v in d["delta"]], [float(v) for v in d["rho"]])
        if kind == "linear":
            return Linear(d["a"], d.get("beta", 0.0))
        if kind == "conjugate":
            return Conjugate(from_dict(d["inner"]))
    except KeyError as exc:
        raise ValueError(f"convex payload {kind!r} is missing field {exc.args[0]!r}") from None
    raise ValueError(f"unknown convex function type {kind!r}")


CONVEX_TYPES = frozenset(
    ["quadratic", "quadratic_kernel", "abs_sum", "indicator_box", "indicator_ball",
     "support_interval", "linear", "conjugate"]
)
