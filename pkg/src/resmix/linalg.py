"""Dense vectors, matrices, adjoints, operator norms and subspace projectors.

Points are plain float64 numpy arrays whose last axis is the coordinate
axis; a leading batch shape is allowed everywhere, so ``apply(L, X)`` with
``X`` of shape ``(m, cols)`` maps ``m`` points at once.  Linear operators
are 2-D arrays; the adjoint is the transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

GS_RANK_TOL = 1e-10
POWER_MAX_ITER = 5000
POWER_RTOL = 1e-14


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Return ``x`` as a finite float array, checking the trailing dimension."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if dim is not None and arr.shape[-1] != dim:
        raise DimensionError(f"expected points of dimension {dim}, got {arr.shape[-1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point has non-finite coordinates")
    return arr


def as_linop(L) -> np.ndarray:
    arr = np.asarray(L, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"linear operator must be a nonempty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("linear operator has non-finite entries")
    return arr


def apply(L, x) -> np.ndarray:
    """Return ``L x`` (batched over leading axes of ``x``)."""
    L = as_linop(L)
    x = as_point(x, L.shape[1])
    return x @ L.T


def adjoint_apply(L, y) -> np.ndarray:
    """Return ``L^T y`` (batched over leading axes of ``y``)."""
    L = as_linop(L)
    y = as_point(y, L.shape[0])
    return y @ L


def _power_norm(L: np.ndarray, v: np.ndarray) -> float:
    G = L.T @ L
    v = v / np.linalg.norm(v)
    rq = float(v @ G @ v)
    for _ in range(POWER_MAX_ITER):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = float(v @ G @ v)
        if abs(new - rq) <= POWER_RTOL * abs(new):
            rq = new
            break
        rq = new
    return float(np.sqrt(max(rq, 0.0)))


def operator_norm(L) -> float:
    """Spectral norm of ``L`` by power iteration on ``L^T L``.

    The iteration starts from the normalized all-ones vector.  A start
    vector orthogonal to the top right-singular vector would stall on a
    smaller singular value, so a second fixed start is also run and the
    larger estimate kept.
    """
    L = as_linop(L)
    scale = float(np.max(np.abs(L)))
    if scale == 0.0:
        return 0.0
    L = L / scale  # keeps L^T L clear of underflow and overflow
    n = L.shape[1]
    first = _power_norm(L, np.ones(n))
    alt = np.cos(np.arange(1, n + 1) * 1.2345)  # fixed, generic direction
    second = _power_norm(L, alt) if np.any(alt) else 0.0
    return scale * max(first, second)


@dataclass(frozen=True, eq=False)
class Subspace:
    """Subspace of R^ambient_dim given by an orthonormal basis (rows)."""

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        basis = np.array(self.basis, dtype=float, ndmin=2)
        if basis.shape[0] == 0 or basis.shape[1] != self.ambient_dim:
            raise DimensionError("subspace basis must be nonempty with ambient_dim columns")
        gram = basis @ basis.T
        if np.max(np.abs(gram - np.eye(basis.shape[0]))) > 1e-12:
            raise ValueError("subspace basis is not orthonormal")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def is_full(self) -> bool:
        return self.dim == self.ambient_dim

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(n, np.eye(n))


def make_subspace(ambient_dim: int, spanning_vectors) -> Subspace:
    """Orthonormal basis of the span of ``spanning_vectors`` (modified Gram-Schmidt)."""
    vecs = np.array(spanning_vectors, dtype=float, ndmin=2)
    if vecs.shape[1] != ambient_dim:
        raise DimensionError(f"spanning vectors must have dimension {ambient_dim}")
    basis: list[np.ndarray] = []
    for v in vecs:
        w = v.copy()
        for b in basis:
            w -= (w @ b) * b
        # second pass keeps orthogonality at 1e-12 for nearly dependent input
        for b in basis:
            w -= (w @ b) * b
        nw = np.linalg.norm(w)
        if nw > GS_RANK_TOL:
            basis.append(w / nw)
    if not basis:
        raise ValueError("spanning vectors are numerically zero; the subspace {0} is not allowed")
    return Subspace(ambient_dim, np.array(basis))


def project_subspace(V: Subspace, x) -> np.ndarray:
    x = as_point(x, V.ambient_dim)
    if V.is_full:
        return x.copy()
    return (x @ V.basis.T) @ V.basis
