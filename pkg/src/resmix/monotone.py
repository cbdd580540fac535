"""Maximally monotone operators with closed-form resolvents.

Only resolvent-level quantities are exposed: ``resolvent`` (J_{gamma A}),
``resolvent_of_inverse`` (J_{gamma A^{-1}}) and ``yosida``.  The operators
themselves are set-valued and never evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import convex
from .convex import ConvexFn, _encode, _finite_vec
from .errors import UnsupportedParameterError
from .linalg import Subspace, as_point, project_subspace

PSD_TOL = 1e-10


class MonotoneOp:
    """Base class of catalog operators."""

    dim: int

    def _resolvent(self, gamma: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Zero(MonotoneOp):
    dim: int

    def _resolvent(self, gamma, x):
        return x.copy()

    def to_dict(self):
        return {"type": "zero", "dim": self.dim}


@dataclass(frozen=True, eq=False)
class ScaledIdentity(MonotoneOp):
    """x -> alpha x with alpha >= 0."""

    alpha: float
    dim: int

    def __post_init__(self):
        if not (self.alpha >= 0 and np.isfinite(self.alpha)):
            raise ValueError("ScaledIdentity needs a finite alpha >= 0")
        object.__setattr__(self, "alpha", float(self.alpha))

    def _resolvent(self, gamma, x):
        return x / (1.0 + gamma * self.alpha)

    def to_dict(self):
        return {"type": "scaled_identity", "alpha": self.alpha, "dim": self.dim}


@dataclass(frozen=True, eq=False)
class NormalConeBox(MonotoneOp):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        box = convex.IndicatorBox(self.lower, self.upper)
        object.__setattr__(self, "lower", box.lower)
        object.__setattr__(self, "upper", box.upper)

    @property
    def dim(self):
        return self.lower.size

    def _resolvent(self, gamma, x):
        return np.clip(x, self.lower, self.upper)

    def to_dict(self):
        return {"type": "normal_cone_box", "lower": _encode(self.lower), "upper": _encode(self.upper)}


@dataclass(frozen=True, eq=False)
class NormalConeBall(MonotoneOp):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        ball = convex.IndicatorBall(self.center, self.radius)
        object.__setattr__(self, "center", ball.center)
        object.__setattr__(self, "radius", ball.radius)

    @property
    def dim(self):
        return self.center.size

    def _resolvent(self, gamma, x):
        diff = x - self.center
        d = np.linalg.norm(diff, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            shrink = np.where(d > self.radius, self.radius / d, 1.0)
        return self.center + shrink * diff

    def to_dict(self):
        return {"type": "normal_cone_ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class NormalConeAffine(MonotoneOp):
    """Normal cone of the affine set ``offset + V``."""

    subspace: Subspace
    offset: np.ndarray

    def __post_init__(self):
        off = _finite_vec(self.offset)
        if off.size != self.subspace.ambient_dim:
            raise ValueError("offset dimension does not match the subspace")
        object.__setattr__(self, "offset", off)

    @property
    def dim(self):
        return self.subspace.ambient_dim

    def _resolvent(self, gamma, x):
        return self.offset + project_subspace(self.subspace, x - self.offset)

    def to_dict(self):
        return {"type": "normal_cone_affine", "basis": self.subspace.basis.tolist(),
                "offset": self.offset.tolist()}


@dataclass(frozen=True, eq=False)
class SubdiffSupportInterval(MonotoneOp):
    """Subdifferential of the support function of prod_k [delta_k, rho_k]."""

    delta: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        f = convex.SupportInterval(self.delta, self.rho)
        object.__setattr__(self, "delta", f.delta)
        object.__setattr__(self, "rho", f.rho)

    @property
    def dim(self):
        return self.delta.size

    def _resolvent(self, gamma, x):
        # x - proj_[gamma delta, gamma rho] x
        return x - np.clip(x, gamma * self.delta, gamma * self.rho)

    def to_dict(self):
        return {"type": "subdiff_support_interval", "delta": _encode(self.delta), "rho": _encode(self.rho)}


@dataclass(frozen=True, eq=False)
class AffineMonotone(MonotoneOp):
    """y -> M y + b with M + M^T positive semidefinite."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float, ndmin=2)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.all(np.isfinite(M)):
            raise ValueError("AffineMonotone needs a finite square matrix")
        sym_min = np.linalg.eigvalsh(0.5 * (M + M.T)).min()
        if sym_min < -PSD_TOL:
            raise ValueError(f"AffineMonotone matrix is not monotone (min eigenvalue {sym_min:.3e})")
        b = _finite_vec(self.offset)
        if b.size != M.shape[0]:
            raise ValueError("offset dimension does not match the matrix")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "offset", b)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def _resolvent(self, gamma, x):
        A = np.eye(self.dim) + gamma * self.matrix
        rhs = (x - gamma * self.offset).reshape(-1, self.dim)
        return np.linalg.solve(A, rhs.T).T.reshape(x.shape)

    def to_dict(self):
        return {"type": "affine_monotone", "matrix": self.matrix.tolist(), "offset": self.offset.tolist()}


ROTATION90 = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class Rotation90(MonotoneOp):
    """Counter-clockwise quarter turn of R^2 (monotone, not a subdifferential)."""

    dim: int = 2

    def __post_init__(self):
        if self.dim != 2:
            raise ValueError("Rotation90 lives in R^2")

    def _resolvent(self, gamma, x):
        # (I + gamma R)^{-1} = (I - gamma R) / (1 + gamma^2)
        rx = x @ ROTATION90.T
        return (x - gamma * rx) / (1.0 + gamma * gamma)

    def to_dict(self):
        return {"type": "rotation90"}


@dataclass(frozen=True, eq=False)
class WienerResidual(MonotoneOp):
    """(Id - T + r)^{-1} - Id for a projection T; its resolvent is Id - T + r."""

    transform: MonotoneOp
    offset: np.ndarray

    def __post_init__(self):
        if not isinstance(self.transform, PROJECTION_TYPES):
            raise ValueError("WienerResidual transform must be a projection (box, ball, affine set or zero)")
        off = _finite_vec(self.offset)
        if off.size != self.transform.dim:
            raise ValueError("offset dimension does not match the transform")
        object.__setattr__(self, "offset", off)

    @property
    def dim(self):
        return self.transform.dim

    def _resolvent(self, gamma, x):
        if gamma != 1.0:
            raise UnsupportedParameterError("WienerResidual has a closed-form resolvent only for gamma = 1")
        return x - self.transform._resolvent(1.0, x) + self.offset

    def to_dict(self):
        return {"type": "wiener_residual", "transform": self.transform.to_dict(), "offset": self.offset.tolist()}


@dataclass(frozen=True, eq=False)
class Inverse(MonotoneOp):
    inner: MonotoneOp

    @property
    def dim(self):
        return self.inner.dim

    def _resolvent(self, gamma, x):
        return _resolvent_of_inverse(self.inner, gamma, x)

    def to_dict(self):
        return {"type": "inverse", "inner": self.inner.to_dict()}


@dataclass(frozen=True, eq=False)
class SubdiffOf(MonotoneOp):
    function: ConvexFn

    @property
    def dim(self):
        return self.function.dim

    def _resolvent(self, gamma, x):
        return self.function._prox(gamma, x)

    def to_dict(self):
        return {"type": "subdiff_of", "function": self.function.to_dict()}


@dataclass(frozen=True, eq=False)
class ScaledBy(MonotoneOp):
    """factor * inner, used to push a step size into the atoms."""

    factor: float
    inner: MonotoneOp

    def __post_init__(self):
        if not self.factor > 0:
            raise ValueError("ScaledBy needs a positive factor")
        object.__setattr__(self, "factor", float(self.factor))

    @property
    def dim(self):
        return self.inner.dim

    def _resolvent(self, gamma, x):
        return self.inner._resolvent(gamma * self.factor, x)

    def to_dict(self):
        return {"type": "scaled_by", "factor": self.factor, "inner": self.inner.to_dict()}


PROJECTION_TYPES = (Zero, NormalConeBox, NormalConeBall, NormalConeAffine)


def _resolvent_of_inverse(A: MonotoneOp, gamma: float, x: np.ndarray) -> np.ndarray:
    return x - gamma * A._resolvent(1.0 / gamma, x / gamma)


def _check(A: MonotoneOp, gamma, x):
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return float(gamma), as_point(x, A.dim)


def resolvent(A: MonotoneOp, gamma: float, x) -> np.ndarray:
    """J_{gamma A}(x) = (Id + gamma A)^{-1} x"""
    gamma, x = _check(A, gamma, x)
    return A._resolvent(gamma, x)


def resolvent_of_inverse(A: MonotoneOp, gamma: float, x) -> np.ndarray:
    """J_{gamma A^{-1}}(x) = x - gamma J_{A/gamma}(x/gamma)."""
    gamma, x = _check(A, gamma, x)
    return _resolvent_of_inverse(A, gamma, x)


def yosida(A: MonotoneOp, gamma: float, x) -> np.ndarray:
    """Yosida approximation (x - J_{gamma A} x) / gamma."""
    gamma, x = _check(A, gamma, x)
    return (x - A._resolvent(gamma, x)) / gamma


def inverse(A: MonotoneOp) -> MonotoneOp:
    """Symbolic inverse; ``inverse(inverse(A)) is A``."""
    if isinstance(A, Inverse):
        return A.inner
    return Inverse(A)


def from_dict(d: dict) -> MonotoneOp:
    kind = d.get("type")
    try:
        if kind == "zero":
            return Zero(int(d["dim"]))
        if kind == "scaled_identity":
            return ScaledIdentity(d["alpha"], int(d["dim"]))
        if kind == "normal_cone_box":
            return NormalConeBox([float(v) for v in d["lower"]], [float(v) for v in d["upper"]])
        if kind == "normal_cone_ball":
            return NormalConeBall(d["center"], d["radius"])
        if kind == "normal_cone_affine":
            basis = np.array(d["basis"], dtype=float, ndmin=2)
            return NormalConeAffine(Subspace(basis.shape[1], basis), d["offset"])
        if kind == "subdiff_support_interval":
            return SubdiffSupportInterval([float(v) for v in d["delta"]], [float(v) for v in d["rho"]])
        if kind == "affine_monotone":
            return AffineMonotone(d["matrix"], d["offset"])
        if kind == "rotation90":
            return Rotation90()
        if kind == "wiener_residual":
            return WienerResidual(from_dict(d["transform"]), d["offset"])
        if kind == "inverse":
            return Inverse(from_dict(d["inner"]))
        if kind == "subdiff_of":
            return SubdiffOf(convex.from_dict(d["function"]))
        if kind == "scaled_by":
            return ScaledBy(d["factor"], from_dict(d["inner"]))
    except KeyError as exc:
        raise ValueError(f"monotone payload {kind!r} is missing field {exc.args[0]!r}") from None
    raise ValueError(f"unknown monotone operator type {kind!r}")


MONOTONE_TYPES = frozenset(
    ["zero", "scaled_identity", "normal_cone_box", "normal_cone_ball", "normal_cone_affine",
     "subdiff_support_interval", "affine_monotone", "rotation90", "wiener_residual",
     "inverse", "subdiff_of", "scaled_by"]
)
