"""Seeded random catalog entries and mixture families."""

from __future__ import annotations

import numpy as np

from . import convex, monotone
from .linalg import make_subspace
from .mixtures import Atom, MixtureFamily, rescale_to_admissible

MONOTONE_VARIANTS = (
    "zero", "scaled_identity", "normal_cone_box", "normal_cone_ball", "normal_cone_affine",
    "subdiff_support_interval", "affine_monotone", "rotation90", "wiener_residual",
    "inverse", "subdiff_of", "scaled_by",
)
CONVEX_VARIANTS = (
    "quadratic", "quadratic_kernel", "abs_sum", "indicator_box", "indicator_ball",
    "support_interval", "linear", "conjugate",
)


def _box(rng, m, half_open=False):
    lo = rng.uniform(-2.0, 0.5, m)
    up = lo + rng.uniform(0.1, 3.0, m)
    if half_open:
        lo = np.where(rng.random(m) < 0.2, -np.inf, lo)
        up = np.where(rng.random(m) < 0.2, np.inf, up)
    return lo, up


def random_convex_fn(rng: np.random.Generator, dim: int, variant: str | None = None, depth: int = 0):
    variant = variant or rng.choice(CONVEX_VARIANTS if depth == 0 else CONVEX_VARIANTS[:-1])
    if variant == "quadratic":
        return convex.Quadratic(rng.uniform(0.5, 2.0), rng.uniform(-2, 2, dim))
    if variant == "quadratic_kernel":
        return convex.QuadraticKernel(dim)
    if variant == "abs_sum":
        return convex.AbsSum(rng.uniform(0.0, 2.0, dim))
    if variant == "indicator_box":
        return convex.IndicatorBox(*_box(rng, dim, half_open=True))
    if variant == "indicator_ball":
        return convex.IndicatorBall(rng.uniform(-1, 1, dim), rng.uniform(0.2, 2.0))
    if variant == "support_interval":
        return convex.SupportInterval(-rng.uniform(0, 2, dim), rng.uniform(0, 2, dim))
    if variant == "linear":
        return convex.Linear(rng.uniform(-1, 1, dim), rng.uniform(-1, 1))
    if variant == "conjugate":
        return convex.conjugate(random_convex_fn(rng, dim, depth=depth + 1))
    raise ValueError(f"unknown convex variant {variant!r}")


def _projection_op(rng, dim):
    kind = rng.integers(3)
    if kind == 0:
        return monotone.NormalConeBox(*_box(rng, dim, half_open=True))
    if kind == 1:
        return monotone.NormalConeBall(rng.uniform(-1, 1, dim), rng.uniform(0.2, 2.0))
    return monotone.Zero(dim)


def random_monotone_op(rng: np.random.Generator, dim: int, variant: str | None = None, depth: int = 0):
    choices = [v for v in MONOTONE_VARIANTS if v != "rotation90" or dim == 2]
    if depth > 0:
        choices = [v for v in choices if v not in ("inverse", "scaled_by", "wiener_residual")]
    variant = variant or rng.choice(choices)
    if variant == "zero":
        return monotone.Zero(dim)
    if variant == "scaled_identity":
        return monotone.ScaledIdentity(rng.uniform(0.0, 3.0), dim)
    if variant == "normal_cone_box":
        return monotone.NormalConeBox(*_box(rng, dim, half_open=True))
    if variant == "normal_cone_ball":
        return monotone.NormalConeBall(rng.uniform(-1, 1, dim), rng.uniform(0.2, 2.0))
    if variant == "normal_cone_affine":
        k = rng.integers(1, dim + 1)
        V = make_subspace(dim, rng.normal(size=(k, dim)))
        return monotone.NormalConeAffine(V, rng.uniform(-1, 1, dim))
    if variant == "subdiff_support_interval":
        return monotone.SubdiffSupportInterval(-rng.uniform(0, 2, dim), rng.uniform(0, 2, dim))
    if variant == "affine_monotone":
        B = rng.normal(size=(dim, dim))
        K = rng.normal(size=(dim, dim))
        return monotone.AffineMonotone(0.3 * B @ B.T + (K - K.T), rng.uniform(-1, 1, dim))
    if variant == "rotation90":
        return monotone.Rotation90()
    if variant == "wiener_residual":
        return monotone.WienerResidual(_projection_op(rng, dim), rng.uniform(-1, 1, dim))
    if variant == "inverse":
        inner = random_monotone_op(rng, dim, depth=depth + 1) if rng.random() < 0.8 else \
            monotone.WienerResidual(_projection_op(rng, dim), rng.uniform(-1, 1, dim))
        return monotone.inverse(inner)
    if variant == "subdiff_of":
        return monotone.SubdiffOf(random_convex_fn(rng, dim))
    if variant == "scaled_by":
        return monotone.ScaledBy(rng.uniform(0.3, 3.0), random_monotone_op(rng, dim, depth=depth + 1))
    raise ValueError(f"unknown monotone variant {variant!r}")


def random_orthonormal(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    """m x n matrix with orthonormal columns (an isometry R^n -> R^m), m >= n."""
    Q, R = np.linalg.qr(rng.normal(size=(m, n)))
    return Q * np.sign(np.diag(R))


def random_family(rng: np.random.Generator, kind: str = "monotone", x_dim: int | None = None,
                  n_atoms: int | None = None, max_dim: int = 8, max_atoms: int = 6,
                  probability: bool = False, isometric: bool = False,
                  identity: bool = False) -> MixtureFamily:
    """Random admissible family (mass <= 1).

    ``isometric`` draws L_i with orthonormal columns and forces probability
    weights; ``identity`` uses L_i = Id (expectation families).
    """
    n = int(x_dim or rng.integers(1, max_dim + 1))
    p = int(n_atoms or rng.integers(1, max_atoms + 1))
    if isometric or identity:
        probability = True
    w = rng.dirichlet(np.ones(p)) if probability else rng.uniform(0.1, 1.0, p)
    atoms = []
    for i in range(p):
        if identity:
            m, L = n, np.eye(n)
        elif isometric:
            m = int(rng.integers(n, max(n, max_dim) + 1))
            L = random_orthonormal(rng, m, n)
        else:
            m = int(rng.integers(1, max_dim + 1))
            L = rng.normal(size=(m, n))
        payload = random_monotone_op(rng, m) if kind == "monotone" else random_convex_fn(rng, m)
        atoms.append(Atom(w[i], L, payload))
    F = MixtureFamily(tuple(atoms), n)
    if F.mass > 1.0:
        F = rescale_to_admissible(F)
        if not (isometric or identity) and rng.random() < 0.5:
            # also exercise families with slack in the mass condition
            c = np.sqrt(rng.uniform(0.3, 1.0))
            F = MixtureFamily(tuple(Atom(a.weight, c * a.linop, a.payload) for a in F.atoms), n)
    return F
