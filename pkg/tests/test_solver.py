import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from resmix import demos, monotone
from resmix.errors import AdmissibilityError, DimensionError, DivergenceError, UnsupportedParameterError
from resmix.linalg import Subspace, make_subspace, project_subspace
from resmix.mixtures import Atom, MixtureFamily
from resmix.monotone import AffineMonotone, NormalConeBall, NormalConeBox, WienerResidual, Zero
from resmix.solver import (
    RelaxedProblem,
    StopRule,
    exactness_check,
    iterate_once,
    relaxed_residual,
    relaxed_resolvent,
    solve,
    wiener_problem,
)

INF = np.inf
I2 = np.eye(2)


def family(*payloads, weights=None):
    weights = weights or [1.0 / len(payloads)] * len(payloads)
    return MixtureFamily(tuple(Atom(w, np.eye(p.dim), p) for w, p in zip(weights, payloads)))


def halfspaces(**kw):
    return RelaxedProblem(family(NormalConeBox([-INF, -INF], [0.0, INF]), NormalConeBox([1.0, -INF], [INF, INF])), **kw)


def disk_halfspace(**kw):
    return RelaxedProblem(family(NormalConeBall([0.0, 0.0], 1.0), NormalConeBox([0.5, -INF], [INF, INF])), **kw)


class TestIterateOnce:
    def test_box_single_atom(self):
        P = RelaxedProblem(family(NormalConeBox([-1.0], [1.0])))
        assert iterate_once(P, [3.0], 1.0) == pytest.approx([1.0])

    def test_inconsistent_halfspaces(self):
        assert iterate_once(halfspaces(), [0.0, 0.0], 1.0) == pytest.approx([0.5, 0.0])

    def test_feasible_point_is_fixed(self):
        x = np.array([0.7, 0.2])
        assert np.array_equal(iterate_once(disk_halfspace(), x, 1.0), x)

    def test_lambda_range(self):
        with pytest.raises(ValueError):
            iterate_once(halfspaces(), [0.0, 0.0], 2.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            iterate_once(halfspaces(), [0.0, 0.0, 0.0], 1.0)

    @given(st.integers(0, 2**32 - 1))
    def test_matches_resolvent_form(self, seed):
        # x + lam (J x - x) with J built from the comixture resolvent, a separate code path
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 6))
        V = make_subspace(n, rng.normal(size=(int(rng.integers(1, n + 1)), n)))
        from resmix import sampling

        F = sampling.random_family(rng, "monotone", x_dim=n)
        if any(_has_wiener(a.payload) for a in F.atoms):
            gamma = 1.0
        else:
            gamma = float(rng.uniform(0.3, 3))
        P = RelaxedProblem(F, V, gamma)
        x = project_subspace(V, rng.normal(scale=3, size=n))
        lam = float(rng.uniform(0.1, 1.9))
        expected = x + lam * (relaxed_resolvent(P, x) - x)
        assert np.max(np.abs(iterate_once(P, x, lam) - expected)) <= 1e-12 * max(1.0, np.abs(x).max())


def _has_wiener(A):
    return isinstance(A, WienerResidual) or (hasattr(A, "inner") and _has_wiener(A.inner))


class TestSolve:
    def test_disk_and_halfspace(self):
        P = disk_halfspace(x0=[3.0, 4.0], stop=StopRule(1e-8, 0.0, 5000))
        t = solve(P)
        assert t.converged and t.step_norms[-1] <= 1e-8
        assert np.linalg.norm(t.x) <= 1 + 1e-6 and t.x[0] >= 0.5 - 1e-6
        assert np.max(exactness_check(P, t.x)) <= 1e-6

    def test_inconsistent_halfspaces(self):
        P = halfspaces(x0=[-3.0, 2.0], stop=StopRule(1e-12, 0.0, 1000))
        t = solve(P)
        assert t.converged and t.x[0] == pytest.approx(0.5, abs=1e-6)
        in_v, normal = relaxed_residual(P, t.x)
        assert in_v <= 1e-6 and normal <= 1e-6

    def test_long_relaxation(self):
        P = disk_halfspace(x0=[3.0, 4.0], relaxation=1.999, stop=StopRule(1e-8, 0.0, 100000))
        t = solve(P)
        assert t.converged
        assert max(relaxed_residual(P, t.x)) <= 1e-5

    def test_cycled_schedule(self):
        P = disk_halfspace(x0=[3.0, 4.0], relaxation=[0.5, 1.5])
        assert list(zip(range(3), P.lambdas())) == [(0, 0.5), (1, 1.5), (2, 0.5)]
        assert solve(P).converged

    def test_no_solution_reports_non_convergence(self):
        P = RelaxedProblem(family(AffineMonotone([[0.0]], [1.0])), stop=StopRule(1e-8, 0.0, 50))
        t = solve(P)
        assert not t.converged and t.iterations == 50

    def test_divergence_detected(self):
        P = RelaxedProblem(family(AffineMonotone([[0.0]], [1e307])), relaxation=1.9, stop=StopRule(max_iter=10))
        with pytest.raises(DivergenceError, match="non-finite"):
            solve(P)

    def test_thinning(self):
        P = RelaxedProblem(family(AffineMonotone([[0.0]], [1.0])), stop=StopRule(1e-8, 0.0, 5000))
        t = solve(P)
        assert len(t.iterates) <= 1001 and t.iterates[0][0] == 0 and t.iterates[-1][0] == 5000
        t = solve(P, store_every=1000)
        assert [n for n, _ in t.iterates] == [0, 1000, 2000, 3000, 4000, 5000]

    def test_step_norms_nonnegative(self):
        t = solve(halfspaces(x0=[5.0, 1.0]))
        assert np.all(t.step_norms >= 0) and len(t.step_norms) == t.iterations


class TestInvariants:
    def _subspace_problem(self, rng):
        # three balls through a common point s in V = a random plane in R^4
        V = make_subspace(4, rng.normal(size=(2, 4)))
        s = project_subspace(V, rng.normal(size=4))
        balls = []
        for _ in range(3):
            d = rng.normal(size=4)
            c = s + d / np.linalg.norm(d) * 0.9 * rng.uniform(0.5, 1.5)
            balls.append(NormalConeBall(c, np.linalg.norm(c - s) + 0.1))
        return RelaxedProblem(family(*balls), V, x0=project_subspace(V, 5 * rng.normal(size=4)),
                              stop=StopRule(1e-10, 0.0, 2000)), s

    def test_iterates_stay_in_subspace(self, rng):
        P, _ = self._subspace_problem(rng)
        t = solve(P, store_every=1)
        for _, x in t.iterates:
            assert np.linalg.norm(x - project_subspace(P.subspace, x)) <= 1e-9

    def test_fejer_monotone(self, rng):
        for _ in range(5):
            P, s = self._subspace_problem(rng)
            t = solve(P, store_every=1)
            d = [np.linalg.norm(x - s) for _, x in t.iterates]
            assert np.all(np.diff(d) <= 1e-10)

    @pytest.mark.parametrize("lam", [0.3, 0.7, 1.0])
    def test_step_norms_nonincreasing(self, rng, lam):
        P, _ = self._subspace_problem(rng)
        P = RelaxedProblem(P.family, P.subspace, relaxation=lam, x0=P.x0, stop=P.stop)
        assert np.all(np.diff(solve(P).step_norms) <= 1e-10)


class TestDiagnostics:
    def test_exactness_inconsistent(self):
        assert exactness_check(halfspaces(), [0.5, 3.0]) == pytest.approx([0.5, 0.5])

    def test_exactness_feasible(self):
        assert np.max(exactness_check(disk_halfspace(), [0.6, -0.3])) <= 1e-12

    def test_residual_full_space(self, rng):
        P = disk_halfspace()
        for _ in range(10):
            assert relaxed_residual(P, rng.normal(scale=5, size=2))[0] == 0.0

    def test_residual_of_non_solution(self):
        assert relaxed_residual(disk_halfspace(), [3.0, 3.0])[1] > 1e-3

    def test_residual_outside_subspace(self):
        P = RelaxedProblem(family(Zero(2)), make_subspace(2, [[1.0, 0.0]]))
        assert relaxed_residual(P, [1.0, 2.0])[0] == pytest.approx(2.0)


class TestValidation:
    def test_x0_outside_subspace(self):
        with pytest.raises(ValueError, match="V"):
            RelaxedProblem(family(Zero(2)), make_subspace(2, [[1.0, 0.0]]), x0=[0.0, 1.0])

    @pytest.mark.parametrize("lam", [0.0, 2.0, -1.0, [1.0, 2.5]])
    def test_relaxation_range(self, lam):
        with pytest.raises(ValueError):
            halfspaces(relaxation=lam)

    def test_gamma_positive(self):
        with pytest.raises(ValueError):
            halfspaces(gamma=0.0)

    def test_wiener_gamma(self):
        F = family(WienerResidual(NormalConeBox([-1.0], [1.0]), [0.0]))
        with pytest.raises(UnsupportedParameterError):
            RelaxedProblem(F, gamma=2.0)

    def test_subspace_dimension(self):
        with pytest.raises(DimensionError):
            RelaxedProblem(family(Zero(2)), Subspace.full(3))

    def test_inadmissible_family(self):
        with pytest.raises(AdmissibilityError):
            RelaxedProblem(family(Zero(1), Zero(1), weights=[1.0, 1.0]))

    def test_stop_rule(self):
        with pytest.raises(ValueError):
            StopRule(max_iter=0)


class TestWiener:
    def test_identity_transform(self, rng):
        L = [rng.normal(size=(2, 3)) for _ in range(4)]
        scale = np.sqrt(sum(np.linalg.norm(M, 2) ** 2 for M in L) / 4)
        L = [M / scale for M in L]
        truth = rng.normal(size=3)
        P = wiener_problem([Zero(2)] * 4, [M @ truth for M in L], L, [0.25] * 4,
                           stop=StopRule(1e-13, 0.0, 100000))
        t = solve(P)
        assert t.converged
        assert max(np.linalg.norm(M @ t.x - M @ truth) for M in L) <= 1e-6

    def test_clipping(self):
        inst = demos.wiener_instance(np.random.default_rng(5), n_atoms=8, x_dim=5, v_dim=3)
        t = solve(inst.problem)
        assert t.converged
        assert np.max(demos.recovery_residuals(inst, t.x)) <= 1e-6
        assert np.max(exactness_check(inst.problem, t.x)) <= 1e-6

    def test_zero_observations_fixed_immediately(self):
        P = wiener_problem([NormalConeBox([-1.0, -1.0], [1.0, 1.0])], [[0.0, 0.0]], [I2], [1.0])
        t = solve(P)
        assert t.converged and t.iterations == 1 and t.step_norms[0] == 0.0

    def test_single_identity_atom_recovers_observation(self):
        r = np.array([0.3, -1.2])
        t = solve(wiener_problem([Zero(2)], [r], [I2], [1.0]))
        assert t.converged and np.allclose(t.x, r, atol=1e-14)

    def test_iteration_reads_clip_minus_observation(self, rng):
        T = NormalConeBox([-1.0, -1.0], [1.0, 1.0])
        L = rng.normal(size=(2, 2)) / 3
        r = rng.normal(size=2)
        P = wiener_problem([T], [r], [L], [1.0])
        x = rng.normal(size=2)
        expected = x - L.T @ (np.clip(L @ x, -1, 1) - r)
        assert np.allclose(iterate_once(P, x, 1.0), expected, atol=1e-14)

    def test_rejects_non_projection(self):
        with pytest.raises(ValueError, match="not a firmly nonexpansive"):
            wiener_problem([monotone.ScaledIdentity(1.0, 1)], [[0.0]], [[[1.0]]], [1.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            wiener_problem([Zero(1)], [[0.0], [1.0]], [[[1.0]]], [1.0])

    def test_mass_checked(self):
        with pytest.raises(AdmissibilityError):
            wiener_problem([Zero(1)], [[0.0]], [[[2.0]]], [1.0])
