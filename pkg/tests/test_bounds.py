"""Beam-splitting-attack bounds against precomputed high-precision values."""
import math

import pytest
from hypothesis import given, strategies as st

from cowkit import (
    ChannelParams,
    ParameterError,
    binary_entropy,
    capacity_combined,
    capacity_individual,
    dw_rate_dual,
    dw_rate_single,
    gamma_e,
    holevo_chi,
    sweep_bounds,
    transmissivity,
)
from cowkit.bounds import BsaInputs, SecurityBoundReport

REL = 1e-9
TB_100 = transmissivity(ChannelParams(length_km=100))

# frozen arbitrary-precision evaluations
H2_REFERENCE = 0.71336660971644398
GAMMA_100 = 0.60844715606372238
CHI_100 = 0.71340008532118844
DW1_100 = 9.0387642174992151e-5
DW2_MU02_100 = 1.5932790218528847e-5
CAP_COMB_100 = 1.8321425695031257e-2
CAP_IND_100 = 9.1897966433225238e-3
MU05_DUAL_CUTOFF_KM = 13.5677  # root of 2*chi(0.5, L) = 1


class TestBinaryEntropy:
    def test_maximum(self):
        assert binary_entropy(0.5) == 1.0

    def test_continuity_limits(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_reference_point(self):
        assert binary_entropy(0.19576) == pytest.approx(H2_REFERENCE, rel=REL)

    def test_domain(self):
        with pytest.raises(ParameterError):
            binary_entropy(-0.01)
        with pytest.raises(ParameterError):
            binary_entropy(1.01)

    @given(st.floats(0.0, 1.0))
    def test_symmetric_and_bounded(self, x):
        value = binary_entropy(x)
        assert 0.0 <= value <= 1.0
        assert value == pytest.approx(binary_entropy(1.0 - x), abs=1e-12)


class TestGammaAndChi:
    def test_lossless_channel(self):
        assert gamma_e(0.5, 1.0) == 1.0
        assert holevo_chi(0.5, 1.0) == 0.0

    def test_no_signal(self):
        assert gamma_e(0.0, 0.3) == 1.0

    def test_100km(self):
        assert gamma_e(0.5, TB_100) == pytest.approx(GAMMA_100, rel=REL)
        assert holevo_chi(0.5, TB_100) == pytest.approx(CHI_100, rel=REL)

    def test_orthogonal_limit(self):
        assert holevo_chi(1e6, 1e-12) == pytest.approx(1.0, abs=1e-9)

    def test_chi_monotone_in_mu_and_tb(self):
        mus = [0.1 * k for k in range(1, 20)]
        chis = [holevo_chi(mu, 0.01) for mu in mus]
        assert all(b > a for a, b in zip(chis, chis[1:]))
        tbs = [0.02 * k for k in range(1, 40)]
        chis_tb = [holevo_chi(0.5, tb) for tb in tbs]
        assert all(b < a for a, b in zip(chis_tb, chis_tb[1:]))


class TestDevetakWinterRates:
    def test_single_100km(self):
        assert dw_rate_single(0.5, TB_100, 0.2) == pytest.approx(DW1_100, rel=REL)

    def test_single_no_light(self):
        assert dw_rate_single(0.0, 0.5, 0.2) == 0.0

    def test_single_perfect_channel_ceiling(self):
        # t_B = 1 gives chi = 0; the bracket saturates at 1/2 for mu -> inf
        assert dw_rate_single(50.0, 1.0, 1.0) == pytest.approx(0.5, rel=1e-9)

    def test_dual_mu05_clamped_at_100km(self):
        assert dw_rate_dual(0.5, TB_100, 0.2) == 0.0
        assert 2 * holevo_chi(0.5, TB_100) > 1.0

    def test_dual_mu02_survives_100km(self):
        assert dw_rate_dual(0.2, TB_100, 0.2) == pytest.approx(DW2_MU02_100, rel=REL)

    def test_dual_equals_single_when_lossless(self):
        assert dw_rate_dual(0.4, 1.0, 0.3) == dw_rate_single(0.4, 1.0, 0.3)

    @given(st.floats(0.05, 2.0), st.floats(1e-4, 1.0), st.floats(0.05, 1.0))
    def test_ordering_and_clamping(self, mu, t_b, eta):
        single = dw_rate_single(mu, t_b, eta)
        dual = dw_rate_dual(mu, t_b, eta)
        assert 0.0 <= dual <= single <= 0.5
        if 2 * holevo_chi(mu, t_b) >= 1.0:
            assert dual == 0.0


class TestCapacities:
    def test_combined_quarter(self):
        assert capacity_combined(0.25) == pytest.approx(1.0, rel=REL)

    def test_combined_100km(self):
        assert capacity_combined(TB_100) == pytest.approx(CAP_COMB_100, rel=REL)

    def test_individual_quarter(self):
        assert capacity_individual(0.25) == pytest.approx(math.log2(1.5), rel=REL)

    def test_individual_100km(self):
        assert capacity_individual(TB_100) == pytest.approx(CAP_IND_100, rel=REL)

    def test_printed_orientation_is_negated(self):
        assert capacity_individual(0.25, as_printed=True) == -capacity_individual(0.25)

    def test_domain_error_above_half(self):
        for t_b in (0.5, 0.7, 1.0):
            with pytest.raises(ParameterError):
                capacity_combined(t_b)
            with pytest.raises(ParameterError):
                capacity_individual(t_b)

    @given(st.floats(1e-3, 0.499))
    def test_ordering_and_difference(self, t_b):
        combined = capacity_combined(t_b)
        individual = capacity_individual(t_b)
        assert 0.0 < individual < combined
        # combined - individual telescopes to the point-to-point -log2(1 - t_B)
        assert combined - individual == pytest.approx(-math.log2(1.0 - t_b), rel=1e-12)


def _dual_cutoff_km(mu: float) -> float | None:
    """Independent oracle: bisection on 2*chi(mu, L) = 1."""
    def excess(length):
        return 2.0 * holevo_chi(mu, transmissivity(ChannelParams(length_km=length))) - 1.0

    # opaque-channel limit: 2*chi -> 2*h((1 - e^-mu)/2)
    if 2.0 * binary_entropy((1.0 - math.exp(-mu)) / 2.0) < 1.0:
        return None  # never clamps at any distance
    lo, hi = 0.0, 1e3
    for _ in range(200):
        mid = (lo + hi) / 2
        if excess(mid) > 0:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


class TestSweep:
    def test_empty_mu_list(self):
        assert sweep_bounds([], 0.2, [10.0, 20.0], 0.22) == []

    def test_single_point_matches_direct_eval(self):
        rows = sweep_bounds([0.5], 0.2, [100.0], 0.22)
        assert len(rows) == 1
        assert rows[0].report.rate_single == pytest.approx(DW1_100, rel=REL)

    def test_rates_monotone_in_length(self):
        rows = sweep_bounds([0.5], 0.2, [float(L) for L in range(0, 201, 5)], 0.22)
        singles = [r.report.rate_single for r in rows]
        duals = [r.report.rate_dual for r in rows]
        assert all(b <= a for a, b in zip(singles, singles[1:]))
        assert all(b <= a for a, b in zip(duals, duals[1:]))

    def test_capacity_flagged_at_short_lengths(self):
        rows = sweep_bounds([0.5], 0.2, [0.0, 5.0, 100.0], 0.22)
        assert rows[0].report.cap_combined is None  # t_B = 1
        assert rows[2].report.cap_combined is not None

    def test_dual_crossover_ordering(self):
        cutoff_05 = _dual_cutoff_km(0.5)
        cutoff_02 = _dual_cutoff_km(0.2)
        assert cutoff_05 == pytest.approx(MU05_DUAL_CUTOFF_KM, abs=0.01)
        assert cutoff_02 is None  # 2*chi stays below 1 for all distances
        lengths = [float(L) for L in range(0, 201)]
        rows = {mu: [r for r in sweep_bounds([mu], 0.2, lengths, 0.22)] for mu in (0.2, 0.5)}
        last_positive = {
            mu: max(r.length_km for r in mu_rows if r.report.rate_dual > 0)
            for mu, mu_rows in rows.items()
        }
        assert last_positive[0.2] > last_positive[0.5]
        assert last_positive[0.2] == 200.0
        assert last_positive[0.5] == pytest.approx(math.floor(cutoff_05), abs=0.5)

    def test_empty_length_range_rejected(self):
        with pytest.raises(ParameterError):
            sweep_bounds([0.5], 0.2, [], 0.22)


class TestReportTypes:
    def test_bsa_inputs_invariants(self):
        with pytest.raises(ParameterError):
            BsaInputs(mean_photon_number=-0.1, transmissivity=0.5, detector_efficiency=0.2)
        with pytest.raises(ParameterError):
            BsaInputs(mean_photon_number=0.5, transmissivity=0.0, detector_efficiency=0.2)

    def test_report_rate_ordering_enforced(self):
        with pytest.raises(ParameterError):
            SecurityBoundReport(
                gamma_e=0.9, chi_single=0.1, chi_dual=0.2,
                rate_single=0.1, rate_dual=0.2,
                cap_combined=None, cap_individual=None,
            )
