"""Resolvent and proximal mixtures over a finite family of weighted atoms.

A family is a list of atoms ``(w_i, L_i, payload_i)`` discretizing a measure
space: ``w_i > 0`` is the mass of the atom, ``L_i`` maps the common space
``X = R^n`` into ``H_i = R^{m_i}`` and the payload is a monotone operator
(:mod:`resmix.monotone`) or a convex function (:mod:`resmix.convex`).  The
mixture and comixture operators are never formed; everything goes through
their resolvents

    mixture:    sum_i w_i L_i^T J_{A_i} L_i
    comixture:  Id + sum_i w_i (L_i^T J_{A_i} L_i - L_i^T L_i)

and the analogous proximal formulas.  Families must satisfy the mass
condition ``0 < sum_i w_i ||L_i||^2 <= 1``.

Sums run over atoms in ascending index so results are bit-stable.  All
evaluators accept a batch of points ``(..., n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import convex, monotone
from .convex import ConvexFn
from .errors import AdmissibilityError, DimensionError, OracleError
from .linalg import as_linop, as_point, operator_norm
from .monotone import MonotoneOp

MASS_SLACK = 1e-12
PROBABILITY_TOL = 1e-12
IDENTITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Atom:
    weight: float
    linop: np.ndarray
    payload: MonotoneOp | ConvexFn

    def __post_init__(self):
        L = as_linop(self.linop).copy()
        L.setflags(write=False)
        object.__setattr__(self, "linop", L)
        object.__setattr__(self, "weight", float(self.weight))

    @cached_property
    def norm(self) -> float:
        return operator_norm(self.linop)

    def to_dict(self) -> dict:
        return {"weight": self.weight, "linop": self.linop.tolist(), "payload": self.payload.to_dict()}


@dataclass(frozen=True, eq=False)
class MixtureFamily:
    atoms: tuple[Atom, ...]
    x_dim: int | None = None

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise ValueError("a mixture family needs at least one atom")
        object.__setattr__(self, "atoms", atoms)
        if self.x_dim is None:
            object.__setattr__(self, "x_dim", atoms[0].linop.shape[1])

    def __len__(self):
        return len(self.atoms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([a.weight for a in self.atoms])

    @cached_property
    def mass(self) -> float:
        """sum_i w_i ||L_i||^2"""
        return math.fsum(a.weight * a.norm**2 for a in self.atoms)

    @property
    def probability(self) -> bool:
        return abs(math.fsum(a.weight for a in self.atoms) - 1.0) <= PROBABILITY_TOL

    @property
    def kind(self) -> str:
        """'monotone', 'convex' or 'mixed'."""
        kinds = {"monotone" if isinstance(a.payload, MonotoneOp) else "convex" for a in self.atoms}
        return kinds.pop() if len(kinds) == 1 else "mixed"

    def with_payloads(self, fn: Callable) -> "MixtureFamily":
        return MixtureFamily(tuple(Atom(a.weight, a.linop, fn(a.payload)) for a in self.atoms), self.x_dim)

    def to_dict(self) -> dict:
        return {"x_dim": self.x_dim, "atoms": [a.to_dict() for a in self.atoms],
                "probability": self.probability}


@dataclass
class FamilyCheck:
    """Outcome of :func:`validate_family`."""

    mass: float
    probability: bool
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def raise_if_invalid(self):
        if self.problems:
            raise AdmissibilityError("; ".join(self.problems))


def validate_family(F: MixtureFamily) -> FamilyCheck:
    """Check weights, dimensions and the mass condition 0 < sum w_i ||L_i||^2 <= 1."""
    problems = []
    for i, a in enumerate(F.atoms):
        if not (a.weight > 0 and math.isfinite(a.weight)):
            problems.append(f"atom {i}: weight must be positive and finite, got {a.weight}")
        rows, cols = a.linop.shape
        if cols != F.x_dim:
            problems.append(f"atom {i}: linop has {cols} columns, family space has dimension {F.x_dim}")
        if a.payload.dim != rows:
            problems.append(f"atom {i}: payload dimension {a.payload.dim} != linop rows {rows}")
    if F.kind == "mixed":
        problems.append("atoms mix monotone-operator and convex-function payloads")
    if problems:
        return FamilyCheck(float("nan"), F.probability, problems)
    mass = F.mass
    if mass <= 0.0:
        problems.append("mass condition 0 < sum_i w_i ||L_i||^2 <= 1 violated: every L_i is zero (mass = 0)")
    elif mass > 1.0 + MASS_SLACK:
        problems.append(f"mass condition 0 < sum_i w_i ||L_i||^2 <= 1 violated: mass = {mass:.17g}")
    return FamilyCheck(mass, F.probability, problems)


def _admissible(F: MixtureFamily, kind: str | None = None):
    validate_family(F).raise_if_invalid()
    if kind is not None and F.kind != kind:
        raise TypeError(f"operation needs {kind} payloads, family has {F.kind} payloads")


def rescale_to_admissible(F: MixtureFamily) -> MixtureFamily:
    """Scale every L_i by 1/sqrt(mass) when mass > 1.

    This changes the operator the family defines; it is an explicit opt-in,
    never applied silently.
    """
    mass = F.mass
    if mass <= 0.0:
        raise AdmissibilityError("cannot rescale a family whose linear operators are all zero")
    if mass <= 1.0:
        return F
    c = 1.0 / math.sqrt(mass)
    return MixtureFamily(tuple(Atom(a.weight, c * a.linop, a.payload) for a in F.atoms), F.x_dim)


def inverse_family(F: MixtureFamily) -> MixtureFamily:
    return F.with_payloads(monotone.inverse)


def conjugate_family(F: MixtureFamily) -> MixtureFamily:
    return F.with_payloads(convex.conjugate)


def subdifferential_family(F: MixtureFamily) -> MixtureFamily:
    return F.with_payloads(monotone.SubdiffOf)


def scaled_family(F: MixtureFamily, gamma: float) -> MixtureFamily:
    return F.with_payloads(lambda A: monotone.ScaledBy(gamma, A))


def _sum_atoms(F: MixtureFamily, x: np.ndarray, term: Callable) -> np.ndarray:
    """sum_i w_i L_i^T term(payload_i, L_i x), ascending atom order."""
    out = np.zeros_like(x)
    for a in F.atoms:
        out = out + a.weight * (term(a.payload, x @ a.linop.T) @ a.linop)
    return out


def _stacked(F: MixtureFamily, x: np.ndarray, block: Callable) -> np.ndarray:
    """Direct-sum route: L x stacked over atoms, blockwise map, weighted adjoint."""
    S = np.vstack([a.linop for a in F.atoms])
    WS = np.vstack([a.weight * a.linop for a in F.atoms])
    y = x @ S.T
    pieces, start = [], 0
    for a in F.atoms:
        stop = start + a.linop.shape[0]
        pieces.append(block(a.payload, y[..., start:stop]))
        start = stop
    return np.concatenate(pieces, axis=-1) @ WS


def _J(A, y):
    return A._resolvent(1.0, y)


def _Jinv(A, y):
    return monotone._resolvent_of_inverse(A, 1.0, y)


def _prox(f, y):
    return f._prox(1.0, y)


def _gram(F: MixtureFamily, x: np.ndarray) -> np.ndarray:
    return _sum_atoms(F, x, lambda _, y: y)


# -- resolvent mixtures -----------------------------------------------------

def resolvent_mixture(F: MixtureFamily, x) -> np.ndarray:
    """Mixture resolvent: sum_i w_i L_i^T J_{A_i}(L_i x)."""
    _admissible(F, "monotone")
    x = as_point(x, F.x_dim)
    return _sum_atoms(F, x, _J)


def resolvent_mixture_direct(F: MixtureFamily, x) -> np.ndarray:
    """Mixture resolvent via the stacked direct-sum operator L^T J_A L (independent route)."""
    _admissible(F, "monotone")
    x = as_point(x, F.x_dim)
    return _stacked(F, x, _J)


def resolvent_comixture(F: MixtureFamily, x) -> np.ndarray:
    """Comixture resolvent: x + sum_i w_i (L_i^T J_{A_i}(L_i x) - L_i^T L_i x)."""
    _admissible(F, "monotone")
    x = as_point(x, F.x_dim)
    return x + _sum_atoms(F, x, lambda A, y: _J(A, y) - y)


def resolvent_comixture_dual(F: MixtureFamily, x) -> np.ndarray:
    """Comixture resolvent from its definition as an inverse.

    The comixture is the inverse of the mixture of the inverses A_i^{-1},
    so its resolvent is Id minus that mixture's resolvent.
    """
    _admissible(F, "monotone")
    x = as_point(x, F.x_dim)
    return x - _sum_atoms(F, x, _Jinv)


def yosida_mixture(F: MixtureFamily, which: str, x) -> np.ndarray:
    """Yosida approximation of index 1 of the mixture or the comixture.

    mixture:    Id - sum_i w_i L_i^T (A_i^{-1} box Id) L_i
    comixture:  sum_i w_i L_i^T (A_i box Id) L_i
    """
    _admissible(F, "monotone")
    x = as_point(x, F.x_dim)
    if which == "mixture":
        return x - _sum_atoms(F, x, lambda A, y: y - _Jinv(A, y))
    if which == "comixture":
        return _sum_atoms(F, x, lambda A, y: y - _J(A, y))
    raise ValueError("which must be 'mixture' or 'comixture'")


def zeros_residual(F: MixtureFamily, x):
    """Norm of the comixture's Yosida approximation; zero exactly on its zeros."""
    r = np.linalg.norm(yosida_mixture(F, "comixture", x), axis=-1)
    return float(r) if np.ndim(r) == 0 else r


def mixture_graph(F: MixtureFamily, u) -> tuple[np.ndarray, np.ndarray]:
    """Graph points (p, u - p) of the mixture, with p its resolvent at u."""
    p = resolvent_mixture(F, u)
    return p, np.asarray(u, dtype=float) - p


def comixture_graph(F: MixtureFamily, u) -> tuple[np.ndarray, np.ndarray]:
    """Graph points (p, u - p) of the comixture, with p its resolvent at u."""
    p = resolvent_comixture(F, u)
    return p, np.asarray(u, dtype=float) - p


class MixtureConstants(NamedTuple):
    delta: float        # cocoercivity of the comixture
    lipschitz: float    # Lipschitz constant of sum_i w_i L_i^T T_i L_i
    mass: float


def cocoercivity_constant(F: MixtureFamily, tau: float, beta: Sequence[float] | float | None = None) -> MixtureConstants:
    """Constants for a family of tau-cocoercive, full-domain operators.

    ``delta = (tau + 1) / mass - 1`` is a cocoercivity constant of the comixture; the
    Lipschitz constant ``sum_i w_i ||L_i||^2 beta_i`` bounds the composite
    integral of beta_i-Lipschitz maps (``beta_i`` defaults to ``1 / tau``).
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    _admissible(F)
    mass = F.mass
    if beta is None:
        beta = [1.0 / tau] * len(F)
    elif np.isscalar(beta):
        beta = [float(beta)] * len(F)
    if len(beta) != len(F):
        raise ValueError("beta needs one entry per atom")
    lip = math.fsum(a.weight * a.norm**2 * b for a, b in zip(F.atoms, beta))
    return MixtureConstants((tau + 1.0) / mass - 1.0, lip, mass)


# -- proximal mixtures ------------------------------------------------------

def prox_mixture(F: MixtureFamily, x) -> np.ndarray:
    """prox of the proximal mixture: sum_i w_i L_i^T prox_{f_i}(L_i x).

    Evaluated through the stacked direct-sum operator, a code path separate
    from :func:`resolvent_mixture`.
    """
    _admissible(F, "convex")
    x = as_point(x, F.x_dim)
    return _stacked(F, x, _prox)


def prox_comixture(F: MixtureFamily, x) -> np.ndarray:
    """x - sum_i w_i L_i^T prox_{f_i^*}(L_i x)."""
    _admissible(F, "convex")
    x = as_point(x, F.x_dim)
    return x - _sum_atoms(F, x, lambda f, y: _prox(convex.conjugate(f), y))


def _envelope_sum(F: MixtureFamily, x: np.ndarray, fn: Callable) -> np.ndarray:
    total = np.zeros(x.shape[:-1])
    for a in F.atoms:
        total = total + a.weight * fn(a.payload, x @ a.linop.T)
    return total


def _env(f, y):
    p = f._prox(1.0, y)
    return f._value(p) + 0.5 * np.sum((y - p) ** 2, axis=-1)


def envelope_comixture(F: MixtureFamily, x):
    """Moreau envelope of the comixture: sum_i w_i (f_i box Q)(L_i x)."""
    _admissible(F, "convex")
    x = as_point(x, F.x_dim)
    return convex._num(_envelope_sum(F, x, _env))


def envelope_mixture(F: MixtureFamily, x):
    """Moreau envelope of the proximal mixture.

    Equals Q(x) - sum_i w_i (f_i^* box Q)(L_i x).  Each conjugate envelope is
    rewritten with Moreau's identity f^* box Q = Q - f box Q, so the value
    is Q(x) - sum_i w_i Q(L_i x) + sum_i w_i (f_i box Q)(L_i x).
    """
    _admissible(F, "convex")
    x = as_point(x, F.x_dim)
    q = 0.5 * np.sum(x * x, axis=-1)
    q_lx = _envelope_sum(F, x, lambda _, y: 0.5 * np.sum(y * y, axis=-1))
    return convex._num(q - q_lx + _envelope_sum(F, x, _env))


def default_value_grid(x: np.ndarray, points: int = 2001):
    from .oracle import GridSpec

    r = max(1.0, float(np.max(np.abs(x))))
    lower = np.minimum(0.0, x) - 2.0 * r
    upper = np.maximum(0.0, x) + 2.0 * r
    return GridSpec(lower, upper, points)


def mixture_value(F: MixtureFamily, x, grid=None) -> float:
    """Value of the proximal mixture at ``x`` by brute-force conjugation.

    Maximizes <x, y> - sum_i w_i (f_i^* box Q)(L_i y) over a grid and
    subtracts Q(x).  Only for dim X <= 2; accuracy is of the order of the
    grid step.  Raises :class:`OracleError` when the maximum sits on the
    grid boundary, which signals a supremum outside the box (possibly +inf).
    """
    from .oracle import grid_conjugate

    _admissible(F, "convex")
    if F.x_dim > 2:
        raise DimensionError("mixture_value is limited to dim X <= 2")
    x = as_point(x, F.x_dim)
    if x.ndim != 1:
        raise DimensionError("mixture_value takes a single point")
    grid = grid or default_value_grid(x)
    conj = [(a.weight, a.linop, convex.conjugate(a.payload)) for a in F.atoms]

    def h(ys):
        total = np.zeros(ys.shape[:-1])
        for w, L, fc in conj:
            total = total + w * _env(fc, ys @ L.T)
        return total

    sup = grid_conjugate(h, grid, x)
    if sup.at_boundary:
        raise OracleError("supremum attained on the grid boundary; enlarge the box (value may be +inf)")
    return sup.value - 0.5 * float(x @ x)


# -- expectations (probability weights, identity linear factors) --------------

def _require_expectation(F: MixtureFamily):
    if not F.probability:
        raise AdmissibilityError("expectation needs probability weights (sum of weights = 1)")
    for i, a in enumerate(F.atoms):
        L = a.linop
        if L.shape[0] != L.shape[1] or np.max(np.abs(L - np.eye(L.shape[0]))) > IDENTITY_TOL:
            raise AdmissibilityError(f"expectation needs identity linear factors; atom {i} is not the identity")


def resolvent_expectation(F: MixtureFamily, x) -> np.ndarray:
    """Resolvent of the resolvent expectation: E(J_{A_omega}) x."""
    _require_expectation(F)
    _admissible(F, "monotone")
    x = as_point(x, F.x_dim)
    out = np.zeros_like(x)
    for a in F.atoms:
        out = out + a.weight * a.payload._resolvent(1.0, x)
    return out


def proximal_expectation_prox(F: MixtureFamily, x) -> np.ndarray:
    """prox of the proximal expectation: E(prox_{f_omega}) x."""
    _require_expectation(F)
    _admissible(F, "convex")
    x = as_point(x, F.x_dim)
    out = np.zeros_like(x)
    for a in F.atoms:
        out = out + a.weight * a.payload._prox(1.0, x)
    return out


def proximal_expectation_envelope(F: MixtureFamily, x):
    """Moreau envelope of the proximal expectation: E(f_omega box Q)(x)."""
    _require_expectation(F)
    _admissible(F, "convex")
    x = as_point(x, F.x_dim)
    out = np.zeros(x.shape[:-1])
    for a in F.atoms:
        out = out + a.weight * _env(a.payload, x)
    return convex._num(out)


# -- discretization of continuous measures ----------------------------------

def quadrature_family(nodes, weights, make_linop: Callable, make_payload: Callable, x_dim=None) -> MixtureFamily:
    """Atoms at quadrature ``nodes`` with user-supplied ``weights``."""
    nodes = list(nodes)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(nodes),):
        raise ValueError("need one weight per node")
    atoms = tuple(Atom(w, make_linop(t), make_payload(t)) for t, w in zip(nodes, weights))
    return MixtureFamily(atoms, x_dim)


def monte_carlo_family(sample_payload: Callable, n: int, rng: np.random.Generator,
                       x_dim: int, make_linop: Callable | None = None) -> MixtureFamily:
    """``n`` seeded draws with equal weights 1/n.

    ``sample_payload(rng)`` returns a payload; ``make_linop(payload)``
    defaults to the identity on R^x_dim.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    eye = np.eye(x_dim)
    atoms = []
    for _ in range(n):
        payload = sample_payload(rng)
        L = eye if make_linop is None else make_linop(payload)
        atoms.append(Atom(1.0 / n, L, payload))
    return MixtureFamily(tuple(atoms), x_dim)


# -- reports and serialization ----------------------------------------------

@dataclass
class MixtureReport:
    residuals: dict[str, float] = field(default_factory=dict)
    constants: dict[str, float] = field(default_factory=dict)
    seed: int | None = None

    def record(self, name: str, residual: float):
        residual = float(residual)
        if residual < 0:
            raise ValueError("residuals are nonnegative")
        self.residuals[name] = max(self.residuals.get(name, 0.0), residual)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "residuals": dict(self.residuals), "constants": dict(self.constants)}


def payload_from_dict(d: dict):
    kind = d.get("type")
    if kind in monotone.MONOTONE_TYPES:
        return monotone.from_dict(d)
    if kind in convex.CONVEX_TYPES:
        return convex.from_dict(d)
    raise ValueError(f"unknown payload type {kind!r}")


def family_from_dict(d: dict) -> MixtureFamily:
    try:
        atoms_in = d["atoms"]
    except KeyError:
        raise ValueError("family is missing field 'atoms'") from None
    atoms = []
    for i, ad in enumerate(atoms_in):
        try:
            atoms.append(Atom(ad["weight"], ad["linop"], payload_from_dict(ad["payload"])))
        except KeyError as exc:
            raise ValueError(f"atoms[{i}] is missing field {exc.args[0]!r}") from None
        except (ValueError, TypeError) as exc:
            raise ValueError(f"atoms[{i}]: {exc}") from None
    F = MixtureFamily(tuple(atoms), d.get("x_dim"))
    if d.get("probability") and not F.probability:
        raise ValueError("family declares probability=true but weights do not sum to 1")
    return F
