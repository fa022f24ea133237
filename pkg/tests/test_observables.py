import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from _oracles import (
    expect,
    operator_variance,
    quadrature_ops,
    random_density_matrix,
    two_mode_squeezed_vacuum,
)
from cascadelaser import (
    MomentState,
    SystemParams,
    TruncatedDensityMatrix,
    UnphysicalStateError,
    ValidityError,
    duan_sum,
    extract_moments,
    mean_photon_closed_form,
    mean_photon_from_moments,
    observables_closed_form,
    observables_from_moments,
    steady_state_linear_solve,
    variances_closed_form,
    variances_from_moments,
)
from cascadelaser.observables import REPORT_COLUMNS, duan_closed_form, quadrature_covariance
from cascadelaser.validation import grid_points

SQ = math.sqrt(0.99)
GRID = grid_points()
GRID_IDS = [f"A{p.gain_A:g}-eta{p.eta:g}-eps{p.epsilon:g}" for p in GRID]


def as_tuple(v):
    return v.dc_plus, v.dc_minus, v.dd_plus, v.dd_minus


@pytest.fixture(scope="module")
def mixed_state():
    """Mixture of a phase-shifted two-mode squeezed vacuum and a coherent state."""
    n_max = 24
    tmsv = TruncatedDensityMatrix.from_ket(two_mode_squeezed_vacuum(0.4, n_max, phase=0.3), n_max)
    coh = TruncatedDensityMatrix.coherent(0.7, -0.4j, n_max)
    return TruncatedDensityMatrix(0.6 * tmsv.matrix + 0.4 * coh.matrix, n_max)


class TestVariances:
    @pytest.mark.parametrize("s", [MomentState.vacuum(), MomentState.coherent(2, 2),
                                   MomentState.coherent(0.3 - 1.1j, 4.0j)])
    def test_coherent_states_sit_at_vacuum_level(self, s):
        np.testing.assert_allclose(as_tuple(variances_from_moments(s)), 1.0, atol=1e-12)

    def test_bright_steady_state(self, bright_regime):
        v = variances_from_moments(steady_state_linear_solve(bright_regime).state)
        exact = (9900 + 112 * (12 - 100 * SQ)) / 264
        assert v.dc_minus == pytest.approx(exact, rel=1e-10)
        assert v.dc_minus == pytest.approx(0.3793, abs=1e-4)
        assert v.dd_plus == pytest.approx(v.dc_minus, rel=1e-10)
        assert v.dc_plus == pytest.approx(84.80, abs=1e-2)
        assert v.dd_minus == pytest.approx(v.dc_plus, rel=1e-10)
        assert v.sum_squeezed and v.difference_squeezed

    def test_closed_form_exact_value(self, bright_regime):
        v = variances_closed_form(bright_regime)
        assert v.dc_minus == pytest.approx((9900 + 112 * (12 - 100 * SQ)) / 264, rel=1e-14)
        assert v.dc_minus == v.dd_plus and v.dc_plus == v.dd_minus

    @given(st.floats(1e-3, 100.0), st.floats(0.0, 500.0), st.floats(1e-3, 10.0))
    def test_no_coherence_means_no_squeezing(self, kappa, A, eps):
        v = variances_closed_form(SystemParams(kappa, A, 1.0, eps))
        np.testing.assert_allclose(as_tuple(v), 1.0, rtol=1e-12)

    def test_matches_direct_operator_variances(self, mixed_state):
        ops = quadrature_ops(mixed_state.n_max)
        rho = mixed_state.matrix
        direct = [operator_variance(rho, ops[k]) for k in ("c_plus", "c_minus", "d_plus", "d_minus")]
        got = as_tuple(variances_from_moments(extract_moments(mixed_state)))
        np.testing.assert_allclose(got, direct, rtol=1e-10)

    def test_covariance_matches_direct_operators(self, mixed_state):
        ops = quadrature_ops(mixed_state.n_max)
        rho = mixed_state.matrix
        r = [ops[k] for k in ("x_a", "p_a", "x_b", "p_b")]
        means, cov = quadrature_covariance(extract_moments(mixed_state))
        np.testing.assert_allclose(means, [expect(rho, x).real for x in r], atol=1e-12)
        direct = np.array([[0.5 * expect(rho, x @ y + y @ x).real - expect(rho, x).real * expect(rho, y).real
                            for y in r] for x in r])
        np.testing.assert_allclose(cov, direct, atol=1e-10)

    @pytest.mark.parametrize("p", GRID, ids=GRID_IDS)
    def test_moments_agree_with_closed_form(self, p):
        a = variances_closed_form(p)
        b = variances_from_moments(steady_state_linear_solve(p).state)
        np.testing.assert_allclose(as_tuple(b), as_tuple(a), rtol=1e-6)

    def test_imaginary_guard(self):
        # an imaginary <a+a> cannot come from a density matrix
        with pytest.raises(UnphysicalStateError):
            variances_from_moments(MomentState(n_a=1.0 + 1e-3j))
        # a complex <a^2> is legitimate and enters only through its real part
        variances_from_moments(MomentState(s_aa=0.3j))


@pytest.mark.parametrize("seed", range(5))
def test_uncertainty_relation_for_random_states(seed):
    rng = np.random.default_rng(seed)
    rho = TruncatedDensityMatrix(random_density_matrix(rng, n_max=6, support=3), 6)
    v = variances_from_moments(extract_moments(rho))
    assert min(v.uncertainty_products()) >= 1 - 1e-9


class TestDuan:
    def test_vacuum(self):
        w = duan_sum(MomentState.vacuum())
        assert w.sum_uv == pytest.approx(2.0, abs=1e-15)
        assert w.bound == 2.0 and w.unit_vacuum_bound == 4.0
        assert not w.entangled

    def test_bright_steady_state_is_entangled(self, bright_regime):
        s = steady_state_linear_solve(bright_regime).state
        w = duan_sum(s)
        assert w.sum_uv == pytest.approx(0.7586, abs=1e-4)
        assert w.entangled
        assert duan_closed_form(bright_regime).sum_uv == pytest.approx(w.sum_uv, rel=1e-10)

    @pytest.mark.parametrize("A", [1.0, 10.0, 100.0])
    def test_no_coherence_is_separable(self, A):
        p = SystemParams(1.0, A, 1.0)
        assert duan_closed_form(p).sum_uv == 2.0
        w = duan_sum(steady_state_linear_solve(p).state)
        assert w.sum_uv == pytest.approx(2.0, abs=1e-14)
        assert not w.entangled

    @pytest.mark.parametrize("z", [-1.0, -2.5, 0.5, 3.0])
    def test_matches_direct_operators(self, mixed_state, z):
        ops = quadrature_ops(mixed_state.n_max)
        u = abs(z) * ops["x_a"] + ops["x_b"] / z
        v = abs(z) * ops["p_a"] - ops["p_b"] / z
        direct = operator_variance(mixed_state.matrix, u) + operator_variance(mixed_state.matrix, v)
        w = duan_sum(extract_moments(mixed_state), z)
        assert w.sum_uv == pytest.approx(direct, rel=1e-10)
        assert w.bound == pytest.approx(z * z + 1 / (z * z))

    def test_squeezed_vacuum_below_bound(self):
        # with <ab> > 0, x_a - x_b and p_a + p_b are squeezed: sum 2 exp(-2r);
        # the opposite phase anti-squeezes both: 2 exp(2r)
        n_max, r = 30, 0.5
        for phase, expected in ((math.pi, 2 * math.exp(-2 * r)), (0.0, 2 * math.exp(2 * r))):
            rho = TruncatedDensityMatrix.from_ket(two_mode_squeezed_vacuum(r, n_max, phase), n_max)
            w = duan_sum(extract_moments(rho))
            assert w.sum_uv == pytest.approx(expected, rel=1e-10)
            assert w.entangled is (phase != 0.0)

    @pytest.mark.parametrize("p", grid_points(eps_ratios=(0.0, 50.0)))
    def test_identity_with_squeezed_variance(self, p):
        s = steady_state_linear_solve(p).state
        v = variances_from_moments(s)
        assert duan_sum(s).sum_uv == pytest.approx(2 * v.dc_minus, abs=1e-12 * max(1, v.dc_plus))

    @pytest.mark.parametrize("z", [0.0, math.inf, math.nan])
    def test_rejects_bad_z(self, z):
        with pytest.raises(ValueError):
            duan_sum(MomentState.vacuum(), z)

    def test_notes_mention_both_thresholds(self):
        notes = duan_sum(MomentState.vacuum()).notes
        assert "2" in notes and "4" in notes


class TestMeanPhoton:
    @pytest.mark.parametrize("eta", [0.1, 0.5, 1.0])
    def test_empty_cavity(self, eta):
        assert mean_photon_closed_form(SystemParams(1.0, 0.0, eta, 0.5)) == pytest.approx(2.0, abs=1e-15)

    def test_bright(self, bright_regime):
        exact = 10080 / 44 - 99000 / 528
        assert mean_photon_closed_form(bright_regime) == pytest.approx(exact, rel=1e-12)
        s = steady_state_linear_solve(bright_regime).state
        assert mean_photon_from_moments(s) == pytest.approx(exact, rel=1e-10)

    def test_no_coherence_no_gain(self):
        assert mean_photon_closed_form(SystemParams(1.0, 100.0, 1.0)) == 0.0

    @pytest.mark.parametrize("s, expected", [(MomentState.vacuum(), 0.0), (MomentState.coherent(2, 2), 8.0)])
    def test_from_moments(self, s, expected):
        assert mean_photon_from_moments(s) == pytest.approx(expected, abs=1e-14)

    @pytest.mark.parametrize("p", GRID, ids=GRID_IDS)
    def test_closed_form_matches_moments(self, p):
        n = mean_photon_from_moments(steady_state_linear_solve(p).state)
        assert mean_photon_closed_form(p) == pytest.approx(n, rel=1e-9, abs=1e-12)

    def test_sum_difference_modes_carry_same_photons(self, mixed_state):
        ops = quadrature_ops(mixed_state.n_max)
        rho = mixed_state.matrix
        # <c+c> + <d+d> from the quadratures: (Var + mean^2 - 1) / 4 summed over both quadratures
        total = sum((operator_variance(rho, ops[k]) + expect(rho, ops[k]).real ** 2) for k in
                    ("c_plus", "c_minus", "d_plus", "d_minus"))
        assert mean_photon_from_moments(extract_moments(mixed_state)) == pytest.approx((total - 4) / 4, rel=1e-10)

    def test_negative_photon_number_rejected(self):
        with pytest.raises(UnphysicalStateError):
            mean_photon_from_moments(MomentState(n_a=-1.0))


class TestReports:
    def test_row_schema(self, bright_regime):
        row = observables_closed_form(bright_regime).to_row()
        assert tuple(row) == REPORT_COLUMNS
        assert row["source"] == "closed_form"
        assert row["entangled"] is True

    @pytest.mark.parametrize("z", [-1.0, 2.0])
    def test_routes_agree(self, bright_regime, z):
        a = observables_closed_form(bright_regime, z)
        b = observables_from_moments(bright_regime, z=z)
        assert b.source == "from_moments"
        assert a.duan.sum_uv == pytest.approx(b.duan.sum_uv, rel=1e-9)
        assert a.mean_photon == pytest.approx(b.mean_photon, rel=1e-9)

    def test_closed_form_needs_positive_eta(self):
        with pytest.raises(ValidityError):
            observables_closed_form(SystemParams(1.0, 100.0, 0.0))
        # the moment route still works at the boundary
        rep = observables_from_moments(SystemParams(1.0, 100.0, 0.0))
        assert rep.mean_photon > 0
