import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from _oracles import ladder, lindblad_superop, random_density_matrix
from cascadelaser import (
    LeakageError,
    MomentState,
    SystemParams,
    TruncatedDensityMatrix,
    TruncationError,
    TruncationSpec,
    build_liouvillian,
    drift,
    evolve,
    extract_moments,
    oracle_evolve,
    oracle_steady_state,
    steady_state_linear_solve,
    truncation_check,
)
from cascadelaser.fock import moment_derivative


def independent_generator(p, n_max):
    """Hamiltonian drive plus the gain, coherence and loss channels as explicit jump operators."""
    a, b = ladder(n_max)
    ad, bd = a.conj().T, b.conj().T
    prep = p.prep
    h = 1j * p.epsilon * (ad - a + bd - b)
    jumps = [
        math.sqrt(p.gain_A) * (math.sqrt(prep.rho_aa) * ad - math.sqrt(prep.rho_cc) * b),
        math.sqrt(p.kappa) * a,
        math.sqrt(p.kappa) * b,
    ]
    return lindblad_superop(h, jumps, n_max)


PARAMS = [
    SystemParams(1.0, 0.4, 0.5, 0.05),
    SystemParams(0.7, 3.0, 0.1, 0.3),
    SystemParams(1.0, 2.0, 1.0, 0.0),
    SystemParams(1.0, 1.0, 0.0, 0.2),
]


class TestStates:
    def test_vacuum_and_fock(self):
        assert np.all(extract_moments(TruncatedDensityMatrix.vacuum(4)).to_array() == 0)
        s = extract_moments(TruncatedDensityMatrix.fock(1, 0, 4))
        expected = np.zeros(8, dtype=complex)
        expected[4] = 1.0
        np.testing.assert_array_equal(s.to_array(), expected)

    def test_coherent_moments(self):
        s = extract_moments(TruncatedDensityMatrix.coherent(0.2, 0.2, 10))
        np.testing.assert_allclose(s.to_array(), MomentState.coherent(0.2, 0.2).to_array(), atol=1e-14)

    def test_validate_flags_problems(self):
        bad = TruncatedDensityMatrix(np.diag([1.5, -0.5, 0, 0]).astype(complex), 1)
        problems = bad.validate()
        assert any("negative" in x for x in problems)
        assert TruncatedDensityMatrix.vacuum(3).validate() == []

    def test_shape_check(self):
        with pytest.raises(ValueError):
            TruncatedDensityMatrix(np.eye(5), 1)

    def test_distribution_csv(self, tmp_path):
        rho = TruncatedDensityMatrix.fock(1, 2, 2)
        text = rho.distribution_csv(tmp_path / "d.csv")
        lines = text.splitlines()
        assert lines[0] == "n_a,n_b,probability"
        assert "1,2,1" in lines
        assert len(lines) == 1 + 9
        assert rho.tail_population() == 1.0

    def test_truncation_budget(self):
        with pytest.raises(TruncationError):
            TruncationSpec(30, max_hilbert_dim=441)
        with pytest.raises(TruncationError):
            TruncationSpec(0)


class TestLiouvillian:
    def test_vectorisation_convention(self, rng):
        # vec(X rho Y) = kron(X, Y^T) vec(rho) in row-major order
        x, y, rho = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(3))
        np.testing.assert_allclose(np.kron(x, y.T) @ rho.reshape(-1), (x @ rho @ y).reshape(-1), atol=1e-12)

    @pytest.mark.parametrize("p", PARAMS, ids=str)
    def test_equals_standard_lindblad_form(self, p):
        n_max = 5
        ours = build_liouvillian(p, TruncationSpec(n_max)).matrix
        ref = independent_generator(p, n_max)
        assert abs(ours - ref).max() < 1e-12

    @pytest.mark.parametrize("p", PARAMS, ids=str)
    def test_apply_matches_dense_action(self, p, rng):
        n_max = 4
        liou = build_liouvillian(p, TruncationSpec(n_max))
        rho = random_density_matrix(rng, n_max, n_max)
        dense = (independent_generator(p, n_max) @ rho.reshape(-1)).reshape(rho.shape)
        np.testing.assert_allclose(liou.apply(rho), dense, atol=1e-12)

    @pytest.mark.parametrize("p", PARAMS, ids=str)
    def test_trace_and_hermiticity_preserved(self, p, rng):
        n_max = 5
        liou = build_liouvillian(p, TruncationSpec(n_max))
        rho = random_density_matrix(rng, n_max, n_max)
        out = liou.apply(rho)
        assert liou.leakage(rho) < 1e-12
        np.testing.assert_allclose(out, out.conj().T, atol=1e-12)

    def test_bare_damping(self):
        liou = build_liouvillian(SystemParams(1.0, 0.0, 0.5), TruncationSpec(4))
        assert np.max(np.abs(liou.apply(TruncatedDensityMatrix.vacuum(4)))) == 0.0
        names = [t[0] for t in liou.terms]
        assert names == ["drive_a", "drive_b", "gain_a", "loss_a", "loss_b",
                         "coherence_adag_bdag", "coherence_a_b"]

    def test_gain_on_vacuum(self, weak_gain):
        liou = build_liouvillian(weak_gain, TruncationSpec(6))
        d = moment_derivative(TruncatedDensityMatrix.vacuum(6), liou)
        assert d.n_a.real == pytest.approx(0.1, rel=1e-14)
        np.testing.assert_allclose(d.to_array(), drift(MomentState.vacuum(), weak_gain).to_array(), atol=1e-14)

    @settings(max_examples=25)
    @given(st.floats(0.1, 2.0), st.floats(0.0, 5.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
           st.integers(0, 2**32 - 1))
    def test_moment_equations_close_exactly(self, kappa, A, eta, eps, seed):
        # for states two shells below the cutoff, every truncated product in the
        # second-moment derivatives is exact
        p = SystemParams(kappa, A, eta, eps)
        n_max = 6
        rho = TruncatedDensityMatrix(random_density_matrix(np.random.default_rng(seed), n_max, 3), n_max)
        liou = build_liouvillian(p, TruncationSpec(n_max))
        lhs = moment_derivative(rho, liou).to_array()
        rhs = drift(extract_moments(rho), p).to_array()
        np.testing.assert_allclose(lhs, rhs, atol=1e-11 * max(1.0, A))


class TestSteadyState:
    def test_bare_cavity_is_vacuum(self):
        ss = oracle_steady_state(SystemParams(1.0, 0.0, 0.5), TruncationSpec(6))
        np.testing.assert_allclose(ss.rho.matrix, TruncatedDensityMatrix.vacuum(6).matrix, atol=1e-14)

    @pytest.mark.parametrize("method", ["direct", "gmres", "evolve"])
    def test_driven_cavity_is_coherent(self, method):
        ss = oracle_steady_state(SystemParams(1.0, 0.0, 0.5, 0.1), TruncationSpec(10), method=method)
        s = ss.moments
        assert abs(s.m_a - 0.2) <= 1e-8 and abs(s.m_b - 0.2) <= 1e-8
        assert ss.rho.validate() == []

    def test_weak_gain_matches_moment_solve(self):
        p = SystemParams(1.0, 0.4, 0.5, 0.05)
        ss = oracle_steady_state(p, TruncationSpec(12))
        ref = steady_state_linear_solve(p).state.to_array()
        assert np.max(np.abs(ss.moments.to_array() - ref)) <= 1e-6
        assert ss.residual <= 1e-10
        assert ss.rho.validate(eig_tol=1e-10) == []

    def test_budget_rejects_bright_states(self, bright_regime):
        with pytest.raises(TruncationError):
            oracle_steady_state(bright_regime, TruncationSpec(12))

    def test_unknown_method(self, weak_gain):
        with pytest.raises(ValueError):
            oracle_steady_state(weak_gain, TruncationSpec(4), method="magic")


class TestEvolution:
    def test_vacuum_unchanged(self):
        run = oracle_evolve(TruncatedDensityMatrix.vacuum(4), SystemParams(1.0, 0.0, 0.5), 5.0, TruncationSpec(4))
        np.testing.assert_allclose(run.final.matrix, TruncatedDensityMatrix.vacuum(4).matrix, atol=1e-14)

    def test_matches_moment_trajectory(self, weak_gain):
        ts = np.linspace(0.0, 3.0, 7)
        t = TruncationSpec(10)
        run = oracle_evolve(TruncatedDensityMatrix.vacuum(10), weak_gain, 3.0, t, sample_times=ts)
        traj = evolve(MomentState.vacuum(), weak_gain, 3.0, sample_times=ts)
        np.testing.assert_array_equal(run.times, traj.times)
        for got, ref in zip(run.moments(), traj.states):
            assert np.max(np.abs(got.to_array() - ref)) <= 1e-6
        assert run.max_trace_drift < 1e-9
        assert run.max_hermiticity_error < 1e-9

    def test_driven_cavity_relaxes_to_coherent_state(self):
        run = oracle_evolve(TruncatedDensityMatrix.vacuum(8), SystemParams(1.0, 0.0, 0.5, 0.1), 60.0,
                            TruncationSpec(8))
        target = TruncatedDensityMatrix.coherent(0.2, 0.2, 8).matrix
        assert np.max(np.abs(run.final.matrix - target)) <= 1e-6

    def test_mismatched_truncation(self, weak_gain):
        with pytest.raises(TruncationError):
            oracle_evolve(TruncatedDensityMatrix.vacuum(4), weak_gain, 1.0, TruncationSpec(5))

    def test_trace_bound_enforced(self, weak_gain, monkeypatch):
        from dataclasses import replace

        from cascadelaser import fock

        real = fock.build_liouvillian

        def lossy(p, t):
            # uniform decay of every matrix element: the trace leaks at rate 0.01
            liou = real(p, t)
            return replace(liou, matrix=(liou.matrix - 0.01 * sp.identity(t.dim**2)).tocsr())

        monkeypatch.setattr(fock, "build_liouvillian", lossy)
        with pytest.raises(LeakageError):
            oracle_evolve(TruncatedDensityMatrix.vacuum(4), weak_gain, 1.0, TruncationSpec(4))


class TestTruncationCheck:
    def test_bare_cavity_has_no_deltas(self):
        rep = truncation_check(SystemParams(1.0, 0.0, 0.5), TruncationSpec(4))
        assert rep.max_delta == 0.0
        assert rep.flags == ()

    def test_deltas_shrink_with_cutoff(self):
        p = SystemParams(1.0, 0.4, 0.5, 0.05)
        reports = [truncation_check(p, TruncationSpec(n)) for n in (6, 10)]
        assert [r.n_max_check for r in reports] == [10, 14]
        assert reports[1].max_delta < reports[0].max_delta
        assert all(reports[1].deltas[f] <= reports[0].deltas[f] for f in reports[0].deltas)

    def test_tail_flag(self):
        # strongly driven cavity with a tiny cutoff piles population on the last shell
        rep = truncation_check(SystemParams(1.0, 0.0, 0.5, 0.5), TruncationSpec(2), check_budget=False)
        assert rep.tail_population > 1e-4
        assert rep.flags == ("increase n_max",)
