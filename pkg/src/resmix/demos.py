"""Builders for the soft-threshold, Wiener-system and proximal-average demos."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import convex, mixtures, monotone, solver
from .linalg import make_subspace, project_subspace
from .mixtures import Atom, MixtureFamily


# -- soft thresholding on an orthonormal basis ------------------------------

def _per_atom(v, n: int, name: str) -> np.ndarray:
    out = np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
    if out.shape != (n,):
        raise ValueError(f"{name} needs one entry per basis vector")
    return out


def soft_threshold_family(weights, delta, rho, basis=None) -> MixtureFamily:
    """Atoms w_k, L_k = <., e_k>, A_k = subdifferential of the support function of [delta_k, rho_k].

    ``basis`` rows are the orthonormal vectors e_k (standard basis by default).
    """
    w = np.asarray(weights, dtype=float)
    n = w.size
    E = np.eye(n) if basis is None else np.asarray(basis, dtype=float)
    if E.shape != (n, n):
        raise ValueError("basis must be an n x n array with one weight per row")
    if np.max(np.abs(E @ E.T - np.eye(n))) > 1e-12:
        raise ValueError("basis rows must be orthonormal")
    d, r = _per_atom(delta, n, "delta"), _per_atom(rho, n, "rho")
    atoms = tuple(
        Atom(w[k], E[k:k + 1], monotone.SubdiffSupportInterval([d[k]], [r[k]])) for k in range(n)
    )
    return MixtureFamily(atoms, n)


def weighted_soft_threshold(x, weights, delta, rho, basis=None) -> np.ndarray:
    """sum_k w_k s_k(<x, e_k>) e_k with s_k shrinking toward [delta_k, rho_k].

    s_k(t) = t - rho_k above the interval, t - delta_k below it, 0 inside.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = w.size
    E = np.eye(n) if basis is None else np.asarray(basis, dtype=float)
    d, r = _per_atom(delta, n, "delta"), _per_atom(rho, n, "rho")
    t = x @ E.T
    s = np.where(t > r, t - r, np.where(t < d, t - d, 0.0))
    return (w * s) @ E


def random_orthonormal_basis(rng: np.random.Generator, n: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    return (Q * np.sign(np.diag(R))).T


# -- Wiener systems ---------------------------------------------------------

@dataclass
class WienerInstance:
    problem: solver.RelaxedProblem
    truth: np.ndarray
    observations: list[np.ndarray]
    noise: float


def wiener_instance(rng: np.random.Generator, n_atoms: int = 20, x_dim: int = 10, v_dim: int = 4,
                    atom_dim: int = 3, clip=(-1.0, 1.0), noise: float = 0.0, scale: float = 1.0,
                    identity_linops: bool = False, **problem_kwargs) -> WienerInstance:
    """Random Wiener-system recovery problem with clipping nonlinearities.

    The linear factors are Gaussian, rescaled so the mass condition holds
    with equality; V is spanned by the first ``v_dim`` standard basis
    vectors; the ground truth lies in V and observations are
    r_i = clip(L_i x_true) plus optional Gaussian noise.  ``clip=None``
    makes every T_i the identity; ``identity_linops`` replaces the Gaussian
    factors by identities (then ``atom_dim`` must equal ``x_dim``).
    """
    if not 1 <= v_dim <= x_dim:
        raise ValueError("need 1 <= v_dim <= x_dim")
    if clip is None:
        box = monotone.Zero(atom_dim)
    else:
        lo, hi = float(clip[0]), float(clip[1])
        if not lo < hi:
            raise ValueError("clip bounds need lower < upper")
        box = monotone.NormalConeBox(np.full(atom_dim, lo), np.full(atom_dim, hi))
    weights = np.full(n_atoms, 1.0 / n_atoms)
    if identity_linops:
        if atom_dim != x_dim:
            raise ValueError("identity linops need atom_dim == x_dim")
        Ls = [np.eye(x_dim) for _ in range(n_atoms)]
    else:
        Ls = [rng.normal(size=(atom_dim, x_dim)) for _ in range(n_atoms)]
    mass = sum(w * np.linalg.norm(L, 2) ** 2 for w, L in zip(weights, Ls))
    Ls = [L / np.sqrt(mass) for L in Ls]
    V = make_subspace(x_dim, np.eye(x_dim)[:v_dim])
    truth = project_subspace(V, scale * rng.normal(size=x_dim))
    obs = [box._resolvent(1.0, L @ truth) + noise * rng.normal(size=atom_dim) for L in Ls]
    P = solver.wiener_problem([box] * n_atoms, obs, Ls, weights, V, **problem_kwargs)
    return WienerInstance(P, truth, obs, noise)


def recovery_residuals(inst: WienerInstance, x) -> np.ndarray:
    """Per-atom ||T(L_i x) - r_i||."""
    out = []
    for a, r in zip(inst.problem.family.atoms, inst.observations):
        out.append(np.linalg.norm(a.payload.transform._resolvent(1.0, a.linop @ x) - r))
    return np.array(out)


# -- proximal average tables ------------------------------------------------

def prox_average_table(functions, weights, xs) -> dict[str, np.ndarray]:
    """Columns x, prox, envelope and Moreau residual of the proximal average of 1-D functions."""
    fs = list(functions)
    if any(f.dim != 1 for f in fs):
        raise ValueError("prox-average tables take 1-D catalog functions")
    eye = np.eye(1)
    F = MixtureFamily(tuple(Atom(w, eye, f) for w, f in zip(weights, fs)), 1)
    if len(fs) != len(F):
        raise ValueError("need one weight per function")
    X = np.asarray(xs, dtype=float).reshape(-1, 1)
    p = mixtures.proximal_expectation_prox(F, X)[:, 0]
    env = np.atleast_1d(mixtures.proximal_expectation_envelope(F, X))
    pc = mixtures.proximal_expectation_prox(mixtures.conjugate_family(F), X)[:, 0]
    return {"x": X[:, 0], "prox": p, "envelope": env, "moreau_residual": np.abs(p + pc - X[:, 0])}


def functions_from_config(specs) -> list[convex.ConvexFn]:
    out = []
    for i, s in enumerate(specs):
        try:
            out.append(convex.from_dict(s))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"functions[{i}]: {exc}") from None
    return out
