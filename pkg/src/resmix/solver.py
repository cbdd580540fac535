"""Relaxed solver for composite monotone inclusions over a subspace.

The original problem asks for x in V with 0 in A_i(L_i x) for every atom.
When that system is inconsistent, its relaxation asks instead for

    x in V  with  proj_V sum_i w_i L_i^T Y_i(L_i x) = 0,

where Y_i is the Yosida approximation of index gamma of A_i.  Whenever the
original system is solvable both problems have the same solutions.  The
iteration

    q_i     = L_i x_n - J_{gamma A_i}(L_i x_n)
    x_{n+1} = x_n - lambda_n proj_V sum_i w_i L_i^T q_i

is a relaxed proximal-point method on a firmly nonexpansive map and
converges for lambda_n in (0, 2) with inf lambda_n (2 - lambda_n) > 0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import mixtures, monotone
from .errors import DimensionError, DivergenceError, UnsupportedParameterError
from .linalg import Subspace, as_linop, as_point, project_subspace
from .mixtures import Atom, MixtureFamily
from .monotone import MonotoneOp

MAX_STORED_ITERATES = 1000


@dataclass(frozen=True)
class StopRule:
    abs_tol: float = 1e-8
    rel_tol: float = 0.0
    max_iter: int = 100_000

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0 or self.max_iter < 1:
            raise ValueError("stop rule needs nonnegative tolerances and max_iter >= 1")


def _uses_wiener(A: MonotoneOp) -> bool:
    if isinstance(A, monotone.WienerResidual):
        return True
    inner = getattr(A, "inner", None)
    return inner is not None and _uses_wiener(inner)


@dataclass(frozen=True, eq=False)
class RelaxedProblem:
    family: MixtureFamily
    subspace: Subspace | None = None
    gamma: float = 1.0
    relaxation: float | Sequence[float] = 1.0
    x0: np.ndarray | None = None
    stop: StopRule = field(default_factory=StopRule)

    def __post_init__(self):
        F = self.family
        mixtures._admissible(F, "monotone")
        n = F.x_dim
        V = self.subspace if self.subspace is not None else Subspace.full(n)
        if V.ambient_dim != n:
            raise DimensionError("subspace and family live in different spaces")
        object.__setattr__(self, "subspace", V)
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.gamma != 1.0 and any(_uses_wiener(a.payload) for a in F.atoms):
            raise UnsupportedParameterError("Wiener payloads need gamma = 1")
        lams = np.atleast_1d(np.asarray(self.relaxation, dtype=float))
        if lams.size == 0 or np.any(lams <= 0) or np.any(lams >= 2):
            raise ValueError("relaxation parameters must lie in the open interval (0, 2)")
        object.__setattr__(self, "relaxation", float(lams[0]) if lams.size == 1 else tuple(lams.tolist()))
        x0 = np.zeros(n) if self.x0 is None else as_point(self.x0, n)
        if x0.ndim != 1:
            raise DimensionError("x0 must be a single point")
        if np.linalg.norm(x0 - project_subspace(V, x0)) > 1e-10:
            raise ValueError("x0 must lie in V")
        object.__setattr__(self, "x0", x0)

    def lambdas(self):
        """Relaxation schedule; an explicit sequence is cycled."""
        if isinstance(self.relaxation, tuple):
            return itertools.cycle(self.relaxation)
        return itertools.repeat(self.relaxation)


@dataclass
class SolveTrace:
    x: np.ndarray
    iterations: int
    converged: bool
    step_norms: np.ndarray
    iterates: list[tuple[int, np.ndarray]]
    in_v_defect: float
    normal_defect: float


def _steps(P: RelaxedProblem, x: np.ndarray) -> np.ndarray:
    """z = sum_i w_i L_i^T (L_i x - J_{gamma A_i} L_i x), ascending atom order."""
    z = np.zeros_like(x)
    for a in P.family.atoms:
        y = a.linop @ x
        q = y - a.payload._resolvent(P.gamma, y)
        z = z + a.weight * (a.linop.T @ q)
    return z


def iterate_once(P: RelaxedProblem, x, lam: float) -> np.ndarray:
    """One relaxed step x - lam proj_V z."""
    if not 0 < lam < 2:
        raise ValueError("lambda must lie in (0, 2)")
    x = as_point(x, P.family.x_dim)
    return x - lam * project_subspace(P.subspace, _steps(P, x))


def relaxed_resolvent(P: RelaxedProblem, x) -> np.ndarray:
    """proj_V o J o proj_V with J the comixture resolvent of (gamma A_i).

    Computed through :func:`resmix.mixtures.resolvent_comixture` on the
    gamma-scaled family, independently of :func:`iterate_once`.
    """
    V = P.subspace
    scaled = mixtures.scaled_family(P.family, P.gamma)
    return project_subspace(V, mixtures.resolvent_comixture(scaled, project_subspace(V, x)))


def relaxed_residual(P: RelaxedProblem, x) -> tuple[float, float]:
    """(||x - proj_V x||, ||proj_V sum_i w_i L_i^T Y_gamma(A_i)(L_i x)||)."""
    x = as_point(x, P.family.x_dim)
    in_v = float(np.linalg.norm(x - project_subspace(P.subspace, x)))
    normal = float(np.linalg.norm(project_subspace(P.subspace, _steps(P, x) / P.gamma)))
    return in_v, normal


def exactness_check(P: RelaxedProblem, x) -> np.ndarray:
    """Per-atom ||L_i x - J_{gamma A_i}(L_i x)||; all zero iff 0 in A_i(L_i x) for every i."""
    x = as_point(x, P.family.x_dim)
    out = []
    for a in P.family.atoms:
        y = a.linop @ x
        out.append(float(np.linalg.norm(y - a.payload._resolvent(P.gamma, y))))
    return np.array(out)


def solve(P: RelaxedProblem, store_every: int | None = None) -> SolveTrace:
    """Iterate until ||x_{n+1} - x_n|| <= abs_tol + rel_tol ||x_n|| or max_iter."""
    stop = P.stop
    if store_every is None:
        store_every = max(1, math.ceil(stop.max_iter / MAX_STORED_ITERATES))
    x = P.x0.copy()
    iterates = [(0, x.copy())]
    norms = []
    converged = False
    n = 0
    for n, lam in zip(range(1, stop.max_iter + 1), P.lambdas()):
        with np.errstate(over="ignore", invalid="ignore"):
            z = _steps(P, x)
            x_new = x - lam * project_subspace(P.subspace, z) if np.all(np.isfinite(z)) else z
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(f"non-finite iterate at step {n}")
        step = float(np.linalg.norm(x_new - x))
        norms.append(step)
        threshold = stop.abs_tol + stop.rel_tol * float(np.linalg.norm(x))
        x = x_new
        if n % store_every == 0:
            iterates.append((n, x.copy()))
        if step <= threshold:
            converged = True
            break
    if iterates[-1][0] != n:
        iterates.append((n, x.copy()))
    in_v, normal = relaxed_residual(P, x)
    return SolveTrace(x, n, converged, np.array(norms), iterates, in_v, normal)


PROJECTION_TRANSFORMS = monotone.PROJECTION_TYPES


def wiener_problem(transforms: Sequence[MonotoneOp], offsets, linops, weights,
                   subspace: Subspace | None = None, **kwargs) -> RelaxedProblem:
    """Relaxed problem for observations r_i = T_i(L_i x) through Wiener systems.

    ``transforms`` are projections (box, ball, affine set, or ``Zero``
    for the identity); each is firmly nonexpansive.  The iteration then
    reads q_i = T_i(L_i x_n) - r_i.
    """
    if not (len(transforms) == len(offsets) == len(linops) == len(weights)):
        raise ValueError("need one transform, offset, linop and weight per atom")
    atoms = []
    for T, r, L, w in zip(transforms, offsets, linops, weights):
        if not isinstance(T, PROJECTION_TRANSFORMS):
            raise ValueError(f"{type(T).__name__} is not a firmly nonexpansive projection")
        atoms.append(Atom(w, as_linop(L), monotone.WienerResidual(T, r)))
    F = MixtureFamily(tuple(atoms))
    return RelaxedProblem(F, subspace, 1.0, **kwargs)
