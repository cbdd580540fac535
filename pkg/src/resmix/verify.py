"""Seeded identity suite over random mixture families.

Every row compares two independently computed quantities (or a closed form
against a brute-force oracle) and keeps the worst residual seen.  The suite
backs ``resmix verify`` and the acceptance tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from . import convex, mixtures, monotone, oracle, sampling
from .mixtures import Atom, MixtureFamily, MixtureReport

CLOSED_FORM_TOL = 1e-9
FIRM_TOL = 1e-10
COCOERCIVE_TOL = 1e-9
GRADIENT_TOL = 1e-4
BISECTION_TOL = 1e-8
GRID_STEP = 0.01
ORACLE_TOL = 2 * GRID_STEP
FD_STEP = 1e-5

THRESHOLDS = {
    "mixture_inverse_duality": CLOSED_FORM_TOL,
    "mixture_direct_sum": CLOSED_FORM_TOL,
    "comixture_dual_formula": CLOSED_FORM_TOL,
    "mixture_yosida": CLOSED_FORM_TOL,
    "comixture_yosida": CLOSED_FORM_TOL,
    "isometry_collapse_resolvent": CLOSED_FORM_TOL,
    "isometry_collapse_prox": CLOSED_FORM_TOL,
    "envelope_partition": CLOSED_FORM_TOL,
    "prox_subdifferential_agreement": CLOSED_FORM_TOL,
    "prox_mixture_formula": CLOSED_FORM_TOL,
    "prox_comixture_formula": CLOSED_FORM_TOL,
    "moreau_decomposition": CLOSED_FORM_TOL,
    "envelope_moreau_identity": CLOSED_FORM_TOL,
    "expectation_resolvent": CLOSED_FORM_TOL,
    "expectation_prox": CLOSED_FORM_TOL,
    "firm_nonexpansive_mixture": FIRM_TOL,
    "firm_nonexpansive_comixture": FIRM_TOL,
    "firm_nonexpansive_prox_mixture": FIRM_TOL,
    "firm_nonexpansive_prox_comixture": FIRM_TOL,
    "firm_nonexpansive_expectation": FIRM_TOL,
    "comixture_cocoercivity": COCOERCIVE_TOL,
    "envelope_gradient_at_minimizer": GRADIENT_TOL,
    "oracle_prox": ORACLE_TOL,
    "oracle_envelope": ORACLE_TOL,
    "oracle_conjugate": ORACLE_TOL,
    "oracle_resolvent_bisection": BISECTION_TOL,
}
IDENTITY_NAMES = tuple(THRESHOLDS)

# functions a fault can be injected into (see ``run_identity_suite``)
_HOOKED = (
    "resolvent_mixture", "resolvent_mixture_direct", "resolvent_comixture",
    "resolvent_comixture_dual", "prox_mixture", "prox_comixture",
    "envelope_mixture", "envelope_comixture",
)
FAULT_NAMES = _HOOKED
FAULT_SIZE = 1e-6


@dataclass(frozen=True)
class IdentityRow:
    name: str
    residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.threshold)


@dataclass
class SuiteResult:
    seed: int
    n_families: int
    rows: list[IdentityRow]
    elapsed: float = 0.0
    fault: str | None = None
    constants: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failing(self) -> list[str]:
        return [r.name for r in self.rows if not r.passed]

    def row(self, name: str) -> IdentityRow:
        return next(r for r in self.rows if r.name == name)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_families": self.n_families,
            "fault": self.fault,
            "passed": self.passed,
            "tolerances": dict(THRESHOLDS),
            "identities": [
                {"name": r.name, "residual": r.residual, "threshold": r.threshold, "passed": r.passed}
                for r in self.rows
            ],
        }


def _ops(fault: str | None) -> SimpleNamespace:
    if fault is not None and fault not in _HOOKED:
        raise ValueError(f"unknown fault target {fault!r}; choose from {', '.join(_HOOKED)}")
    ns = SimpleNamespace(**{name: getattr(mixtures, name) for name in _HOOKED})
    if fault is not None:
        clean = getattr(mixtures, fault)
        setattr(ns, fault, lambda F, x: clean(F, x) + FAULT_SIZE)
    return ns


def _err(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if np.size(a) else 0.0


def _firm_slack(T, x, y) -> float:
    """Worst violation of <x - y, Tx - Ty> >= ||Tx - Ty||^2 (0 when none)."""
    d = T(x) - T(y)
    slack = np.sum((x - y) * d, axis=-1) - np.sum(d * d, axis=-1)
    return max(0.0, -float(np.min(slack)))


def _points(rng, n, k, scale=3.0):
    return rng.normal(scale=scale, size=(k, n))


def _closed_form_rows(rng, ops, report: MixtureReport, n_points: int, n_pairs: int):
    # monotone family
    F = sampling.random_family(rng, "monotone")
    X = _points(rng, F.x_dim, n_points)
    JW = ops.resolvent_mixture(F, X)
    report.record("mixture_inverse_duality", _err(X - JW, ops.resolvent_comixture(mixtures.inverse_family(F), X)))
    report.record("mixture_direct_sum", _err(JW, ops.resolvent_mixture_direct(F, X)))
    JC = ops.resolvent_comixture(F, X)
    report.record("comixture_dual_formula", _err(JC, ops.resolvent_comixture_dual(F, X)))
    report.record("mixture_yosida", _err(mixtures.yosida_mixture(F, "mixture", X), X - JW))
    report.record("comixture_yosida", _err(mixtures.yosida_mixture(F, "comixture", X), X - JC))
    P1, P2 = _points(rng, F.x_dim, n_pairs), _points(rng, F.x_dim, n_pairs)
    report.record("firm_nonexpansive_mixture", _firm_slack(lambda z: ops.resolvent_mixture(F, z), P1, P2))
    report.record("firm_nonexpansive_comixture", _firm_slack(lambda z: ops.resolvent_comixture(F, z), P1, P2))

    # isometric probability families: mixture and comixture coincide
    G = sampling.random_family(rng, "monotone", isometric=True)
    Y = _points(rng, G.x_dim, n_points)
    report.record("isometry_collapse_resolvent", _err(ops.resolvent_mixture(G, Y), ops.resolvent_comixture(G, Y)))
    H = sampling.random_family(rng, "convex", isometric=True)
    Y = _points(rng, H.x_dim, n_points)
    report.record("isometry_collapse_prox", _err(ops.prox_mixture(H, Y), ops.prox_comixture(H, Y)))

    # convex family
    K = sampling.random_family(rng, "convex")
    X = _points(rng, K.x_dim, n_points)
    Kc = mixtures.conjugate_family(K)
    q = 0.5 * np.sum(X * X, axis=-1)
    report.record("envelope_partition", _err(ops.envelope_mixture(K, X) + ops.envelope_comixture(Kc, X), q))
    Ks = mixtures.subdifferential_family(K)
    pm = ops.prox_mixture(K, X)
    report.record("prox_subdifferential_agreement", _err(pm, ops.resolvent_mixture(Ks, X)))
    report.record("prox_mixture_formula", _err(pm + ops.prox_comixture(Kc, X), X))
    report.record("prox_comixture_formula", _err(ops.prox_comixture(K, X), ops.resolvent_comixture(Ks, X)))
    for a in K.atoms:
        Z = _points(rng, a.payload.dim, n_points)
        f, fc = a.payload, convex.conjugate(a.payload)
        report.record("moreau_decomposition", _err(f._prox(1.0, Z) + fc._prox(1.0, Z), Z))
        env = convex.envelope(f, Z) + convex.envelope(fc, Z)
        report.record("envelope_moreau_identity", _err(env, 0.5 * np.sum(Z * Z, axis=-1)))
    P1, P2 = _points(rng, K.x_dim, n_pairs), _points(rng, K.x_dim, n_pairs)
    report.record("firm_nonexpansive_prox_mixture", _firm_slack(lambda z: ops.prox_mixture(K, z), P1, P2))
    report.record("firm_nonexpansive_prox_comixture", _firm_slack(lambda z: ops.prox_comixture(K, z), P1, P2))

    # expectations: identity factors, probability weights
    E = sampling.random_family(rng, "monotone", identity=True)
    X = _points(rng, E.x_dim, n_points)
    JE = mixtures.resolvent_expectation(E, X)
    report.record("expectation_resolvent", _err(JE, ops.resolvent_mixture(E, X)))
    P1, P2 = _points(rng, E.x_dim, n_pairs), _points(rng, E.x_dim, n_pairs)
    report.record("firm_nonexpansive_expectation",
                  _firm_slack(lambda z: mixtures.resolvent_expectation(E, z), P1, P2))
    Ec = sampling.random_family(rng, "convex", identity=True)
    X = _points(rng, Ec.x_dim, n_points)
    report.record("expectation_prox", _err(mixtures.proximal_expectation_prox(Ec, X), ops.prox_mixture(Ec, X)))
    P1, P2 = _points(rng, Ec.x_dim, n_pairs), _points(rng, Ec.x_dim, n_pairs)
    report.record("firm_nonexpansive_expectation",
                  _firm_slack(lambda z: mixtures.proximal_expectation_prox(Ec, z), P1, P2))


def cocoercive_family(rng, x_dim: int | None = None, mass: float | None = None) -> MixtureFamily:
    """ScaledIdentity(1) atoms (1-cocoercive, full domain) scaled to a given mass."""
    n = int(x_dim or rng.integers(1, 9))
    p = int(rng.integers(1, 7))
    w = rng.uniform(0.1, 1.0, p)
    Ls = [rng.normal(size=(int(rng.integers(1, 9)), n)) for _ in range(p)]
    F = MixtureFamily(tuple(Atom(wi, L, monotone.ScaledIdentity(1.0, L.shape[0])) for wi, L in zip(w, Ls)), n)
    target = float(mass if mass is not None else rng.uniform(0.2, 1.0))
    c = np.sqrt(target / F.mass)
    return MixtureFamily(tuple(Atom(a.weight, c * a.linop, a.payload) for a in F.atoms), n)


def cocoercivity_slack(F: MixtureFamily, delta: float, U: np.ndarray, V: np.ndarray) -> float:
    """Worst violation of delta-cocoercivity of the comixture on resolvent graph samples."""
    xu = mixtures.resolvent_comixture(F, U)
    xv = mixtures.resolvent_comixture(F, V)
    cu, cv = U - xu, V - xv
    dx, dc = xu - xv, cu - cv
    slack = np.sum(dx * dc, axis=-1) - delta * np.sum(dc * dc, axis=-1)
    return max(0.0, -float(np.min(slack)))


def _cocoercivity_row(rng, report: MixtureReport, n_pairs: int):
    F = cocoercive_family(rng)
    delta = mixtures.cocoercivity_constant(F, 1.0).delta
    U, V = _points(rng, F.x_dim, n_pairs), _points(rng, F.x_dim, n_pairs)
    report.record("comixture_cocoercivity", cocoercivity_slack(F, delta, U, V))


_BOUNDED_BELOW = ("quadratic", "quadratic_kernel", "abs_sum", "indicator_ball", "support_interval")


def _bounded_family(rng, ops_dim_max=4) -> MixtureFamily:
    n = int(rng.integers(1, ops_dim_max + 1))
    p = int(rng.integers(1, 5))
    atoms = []
    for _ in range(p):
        m = int(rng.integers(1, ops_dim_max + 1))
        f = sampling.random_convex_fn(rng, m, str(rng.choice(_BOUNDED_BELOW)))
        atoms.append(Atom(rng.uniform(0.2, 1.0), rng.normal(size=(m, n)), f))
    return mixtures.rescale_to_admissible(MixtureFamily(tuple(atoms), n))


def envelope_gradient_at_minimizer(F: MixtureFamily, x0, ops=None, max_iter: int = 20000,
                                   tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Fixed point of prox_comixture and the finite-difference gradient norm there.

    Minimizers of the comixture coincide with those of its envelope
    sum_i w_i (f_i box Q)(L_i x), so the central-difference gradient of the
    envelope should vanish at the fixed point.  Since prox_comixture is a
    unit gradient step on that envelope, the iteration uses Nesterov
    momentum with gradient-based restarts; plain iteration can be sublinear
    when the minimizer is degenerate.
    """
    ops = ops or _ops(None)
    x = x_prev = np.asarray(x0, dtype=float)
    k = 0
    for _ in range(max_iter):
        y = x + (k / (k + 3)) * (x - x_prev)
        x_new = ops.prox_comixture(F, y)
        if np.dot(y - x_new, x_new - x) > 0:
            k = 0  # momentum points uphill: restart
        else:
            k += 1
        x_prev, x = x, x_new
        if np.linalg.norm(x - ops.prox_comixture(F, x)) <= tol:
            break
    eye = np.eye(F.x_dim) * FD_STEP
    up = ops.envelope_comixture(F, x + eye)
    down = ops.envelope_comixture(F, x - eye)
    grad = (np.atleast_1d(up) - np.atleast_1d(down)) / (2 * FD_STEP)
    return x, float(np.linalg.norm(grad))


def _gradient_row(rng, ops, report: MixtureReport):
    F = _bounded_family(rng)
    _, g = envelope_gradient_at_minimizer(F, rng.normal(scale=3.0, size=F.x_dim), ops)
    report.record("envelope_gradient_at_minimizer", g)


# -- oracle agreement -------------------------------------------------------

_ORACLE_GRID = oracle.GridSpec.symmetric(10.0, 1, int(round(20 / GRID_STEP)) + 1)


def _grid_representable(f) -> bool:
    # the conjugate of a linear function is the indicator of one point,
    # which a grid cannot represent
    return not (isinstance(f, convex.Conjugate) and isinstance(f.inner, convex.Linear))


def _near_domain(rng, f) -> float:
    """A point within 1.9 of a grid point of dom f inside [-5, 5].

    A grid scan misplaces the minimizer by up to one step, which costs
    |slope| * step in value; keeping inputs near dom f bounds that slope
    the same way |x*| < 2 does for conjugates.
    """
    ys = _ORACLE_GRID.axes()[0]
    ys = ys[np.abs(ys) <= 5.0]
    dom = ys[np.isfinite(f._value(ys[:, None]))]
    return float(rng.choice(dom) + rng.uniform(-1.9, 1.9))


def _conjugate_error(f, s: float) -> float:
    exact = convex.conjugate_value(f, [s])
    sup = oracle.grid_conjugate(f, _ORACLE_GRID, [s])
    if np.isinf(exact):
        return 0.0 if sup.at_boundary else np.inf
    return np.inf if sup.at_boundary else abs(sup.value - exact)


def convex_oracle_errors(rng, variant: str, n_inputs: int = 50) -> dict[str, float]:
    """Worst prox/envelope/conjugate oracle error over fresh 1-D instances."""
    worst = {"oracle_prox": 0.0, "oracle_envelope": 0.0, "oracle_conjugate": 0.0}
    done = 0
    while done < n_inputs:
        f = sampling.random_convex_fn(rng, 1, variant)
        if not _grid_representable(f):
            continue
        x = _near_domain(rng, f)
        s = rng.uniform(-1.9, 1.9)
        p = convex.prox(f, 1.0, [x])
        worst["oracle_prox"] = max(worst["oracle_prox"], _err(oracle.grid_prox(f, _ORACLE_GRID, [x]), p))
        worst["oracle_envelope"] = max(worst["oracle_envelope"],
                                       abs(oracle.grid_envelope(f, _ORACLE_GRID, [x]) - convex.envelope(f, [x])))
        worst["oracle_conjugate"] = max(worst["oracle_conjugate"], _conjugate_error(f, s))
        done += 1
    return worst


def monotone_oracle_error(rng, variant: str, n_inputs: int = 50) -> float:
    """Worst |closed-form resolvent - bisection| over fresh 1-D instances."""
    worst = 0.0
    for _ in range(n_inputs):
        A = sampling.random_monotone_op(rng, 1, variant)
        gamma = 1.0 if _needs_unit_gamma(A) else rng.uniform(0.5, 2.0)
        x = rng.uniform(-10.0, 10.0)
        exact = float(monotone.resolvent(A, gamma, [x])[0])
        worst = max(worst, abs(oracle.bisect_resolvent_1d(A, gamma, x) - exact))
    return worst


def _needs_unit_gamma(A) -> bool:
    if isinstance(A, monotone.WienerResidual):
        return True
    inner = getattr(A, "inner", None)
    return inner is not None and _needs_unit_gamma(inner)


def _oracle_rows(rng, report: MixtureReport, n_inputs: int):
    for variant in sampling.CONVEX_VARIANTS:
        for name, err in convex_oracle_errors(rng, variant, n_inputs).items():
            report.record(name, err)
    for variant in sampling.MONOTONE_VARIANTS:
        if variant == "rotation90":
            continue
        report.record("oracle_resolvent_bisection", monotone_oracle_error(rng, variant, n_inputs))


def run_identity_suite(seed: int = 0, n_families: int = 50, n_points: int = 16, n_pairs: int = 500,
                       n_oracle_inputs: int = 50, fault: str | None = None) -> SuiteResult:
    """Run every identity row over ``n_families`` seeded random families.

    ``fault`` names a mixture routine whose output is shifted by ``FAULT_SIZE``
    inside the suite only, so that the failing rows can be observed.
    """
    start = time.perf_counter()
    ops = _ops(fault)
    rng = np.random.default_rng(seed)
    report = MixtureReport(seed=seed)
    for name in IDENTITY_NAMES:
        report.residuals[name] = 0.0
    for _ in range(n_families):
        _closed_form_rows(rng, ops, report, n_points, n_pairs)
        _cocoercivity_row(rng, report, n_pairs)
        _gradient_row(rng, ops, report)
    _oracle_rows(rng, report, n_oracle_inputs)
    rows = [IdentityRow(name, report.residuals[name], THRESHOLDS[name]) for name in IDENTITY_NAMES]
    return SuiteResult(seed, n_families, rows, time.perf_counter() - start, fault)
