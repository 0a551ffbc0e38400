"""Closed-form photonic arithmetic against precomputed high-precision values."""
import math

import pytest
from hypothesis import given, strategies as st

from cowkit import (
    ChannelParams,
    DetectorParams,
    ParameterError,
    SourceParams,
    attenuation_for_target,
    dead_time_throughput,
    dual_detector_throughput,
    ideal_count_rate,
    secure_rate,
    target_power,
    transmissivity,
)
from cowkit.photonics import LIGHT_SPEED, PLANCK, RateBreakdown

REL = 1e-9

# arbitrary-precision evaluations frozen before implementation
PF_REFERENCE = 6.4073938054761202e-11
ALPHA_REFERENCE = -75.895179300666752
TB_80 = 1.7378008287493755e-2
TB_100 = 6.3095734448019325e-3
C0_80_ETA15 = 5.8650777970291422e5
CTH_80_15US = 5.9862290792584053e4
DUAL_80_15US = 1.0863652530747308e5
C0_120_ETA15 = 7.7316783280912340e4
CTH_120_25US = 2.6361712661616056e4
DUAL_120_25US = 3.9317754491764205e4


class TestTargetPower:
    def test_paper_operating_point(self):
        source = SourceParams(mean_photon_number=0.5, repetition_rate=1e9, wavelength=1550.12e-9)
        assert target_power(source) == pytest.approx(PF_REFERENCE, rel=REL)

    def test_zero_photons_zero_power(self):
        assert target_power(SourceParams(mean_photon_number=0.0)) == 0.0

    def test_unit_construction(self):
        # photon energy of 1 J at lambda = h*c
        source = SourceParams(mean_photon_number=1.0, repetition_rate=1.0, wavelength=PLANCK * LIGHT_SPEED)
        assert target_power(source) == pytest.approx(1.0, rel=REL)


class TestAttenuation:
    def test_paper_budget(self):
        source = SourceParams(initial_power=2.49e-3, mean_photon_number=0.5,
                              repetition_rate=1e9, wavelength=1550.12e-9)
        alpha = attenuation_for_target(source)
        assert alpha == pytest.approx(ALPHA_REFERENCE, rel=REL)
        assert abs(alpha) == pytest.approx(75.91, abs=0.05)

    def test_identity_power(self):
        source = SourceParams(initial_power=PF_REFERENCE)
        assert attenuation_for_target(source) == pytest.approx(0.0, abs=1e-9)

    def test_decade(self):
        source = SourceParams(initial_power=10 * target_power(SourceParams()))
        assert attenuation_for_target(source) == pytest.approx(-10.0, rel=REL)

    def test_rejects_zero_mu(self):
        with pytest.raises(ParameterError):
            attenuation_for_target(SourceParams(mean_photon_number=0.0))


class TestTransmissivity:
    def test_80km(self):
        assert transmissivity(ChannelParams(length_km=80)) == pytest.approx(TB_80, rel=REL)

    def test_100km(self):
        assert transmissivity(ChannelParams(length_km=100)) == pytest.approx(TB_100, rel=REL)

    def test_lossless(self):
        assert transmissivity(ChannelParams(length_km=0)) == 1.0

    def test_excess_loss_is_additive_db(self):
        spool = ChannelParams(length_km=10, excess_loss_db=15.4)
        assert transmissivity(spool) == pytest.approx(TB_80, rel=REL)


class TestIdealCountRate:
    def test_80km_eta15(self):
        rate = ideal_count_rate(SourceParams(), ChannelParams(length_km=80),
                                DetectorParams(efficiency=0.15))
        assert rate == pytest.approx(C0_80_ETA15, rel=REL)

    def test_no_light(self):
        rate = ideal_count_rate(SourceParams(mean_photon_number=0.0), ChannelParams(), DetectorParams())
        assert rate == 0.0

    def test_unit_construction(self):
        rate = ideal_count_rate(
            SourceParams(mean_photon_number=1.0, repetition_rate=2.0),
            ChannelParams(length_km=0, data_line_fraction=0.9),
            DetectorParams(efficiency=1.0),
        )
        assert rate == pytest.approx(0.9, rel=REL)

    @given(st.floats(0.5, 2.0), st.floats(0.5, 2.0))
    def test_linear_scaling(self, mu_scale, eta_scale):
        base = ideal_count_rate(SourceParams(), ChannelParams(length_km=50), DetectorParams(efficiency=0.1))
        scaled = ideal_count_rate(
            SourceParams(mean_photon_number=0.5 * mu_scale),
            ChannelParams(length_km=50),
            DetectorParams(efficiency=0.1 * eta_scale),
        )
        assert scaled == pytest.approx(base * mu_scale * eta_scale, rel=1e-9)


class TestDeadTimeThroughput:
    def test_80km_squeeze(self):
        assert dead_time_throughput(C0_80_ETA15, 15e-6) == pytest.approx(CTH_80_15US, rel=REL)

    def test_no_dead_time(self):
        assert dead_time_throughput(12345.0, 0.0) == 12345.0

    def test_saturation_limit(self):
        dead = 15e-6
        assert dead_time_throughput(1e12, dead) == pytest.approx(1.0 / dead, rel=1e-6)
        assert dead_time_throughput(1e12, dead) < 1.0 / dead

    @given(st.floats(1.0, 1e7), st.floats(1e-7, 1e-3))
    def test_monotone_and_bounded(self, c_zero, dead):
        value = dead_time_throughput(c_zero, dead)
        assert 0 < value < 1.0 / dead
        assert value < dead_time_throughput(c_zero * 1.5, dead)
        assert value > dead_time_throughput(c_zero, dead * 1.5)

    @given(st.floats(1.0, 1e7), st.floats(1e-7, 1e-3))
    def test_regime_penalty(self, c_zero, dead):
        # relative dead-time penalty crosses 1/2 exactly at c_zero = 1/dead
        penalty = (c_zero - dead_time_throughput(c_zero, dead)) / c_zero
        if c_zero < 1.0 / dead:
            assert penalty < 0.5
        elif c_zero > 1.0 / dead:
            assert penalty > 0.5

    def test_rejects_negative(self):
        with pytest.raises(ParameterError):
            dead_time_throughput(-1.0, 1e-6)
        with pytest.raises(ParameterError):
            dead_time_throughput(1.0, -1e-6)


class TestDualDetectorThroughput:
    def test_80km_gain(self):
        dual = dual_detector_throughput(C0_80_ETA15, 15e-6)
        assert dual == pytest.approx(DUAL_80_15US, rel=REL)
        assert dual / CTH_80_15US == pytest.approx(1.8148, abs=5e-4)

    def test_no_dead_time_no_gain(self):
        assert dual_detector_throughput(4242.0, 0.0) == pytest.approx(4242.0, rel=REL)

    def test_120km_gain(self):
        assert C0_120_ETA15 == pytest.approx(7.73e4, rel=1e-3)
        dual = dual_detector_throughput(C0_120_ETA15, 25e-6)
        single = dead_time_throughput(C0_120_ETA15, 25e-6)
        assert dual == pytest.approx(DUAL_120_25US, rel=REL)
        assert single == pytest.approx(CTH_120_25US, rel=REL)
        assert dual / single == pytest.approx(1.4915, abs=5e-4)

    @given(st.floats(1.0, 1e7), st.floats(1e-7, 1e-3))
    def test_bounded_by_single_and_double(self, c_zero, dead):
        single = dead_time_throughput(c_zero, dead)
        dual = dual_detector_throughput(c_zero, dead)
        assert single < dual <= 2.0 * single


class TestSecureRate:
    def test_direct_product(self):
        assert secure_rate(1000.0, 0.1, 0.9) == pytest.approx(90.0, rel=REL)

    def test_full_compression(self):
        assert secure_rate(1000.0, 0.1, 1.0) == 0.0

    def test_table_magnitude(self):
        # back-solved: the 2-SPD 80 km eta=0.15 entry is ~3.7 kbps
        assert secure_rate(41111.0, 0.1, 0.9) == pytest.approx(3700.0, rel=1e-3)

    @given(st.floats(0.0, 1e6))
    def test_identity_and_linearity(self, skr):
        assert secure_rate(skr, 0.0, 0.0) == skr
        assert secure_rate(2 * skr, 0.1, 0.9) == pytest.approx(2 * secure_rate(skr, 0.1, 0.9), rel=1e-12)


class TestValidation:
    def test_rate_breakdown_invariants(self):
        with pytest.raises(ParameterError):
            RateBreakdown(c_th_zero=1.0, c_th=2.0, c_exp=0.0, sifted_rate=0.0, qber=0.0, secure_rate=0.0)
        with pytest.raises(ParameterError):
            RateBreakdown(c_th_zero=1.0, c_th=0.5, c_exp=0.0, sifted_rate=1.0, qber=0.0, secure_rate=2.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"repetition_rate": 0.0},
            {"mean_photon_number": -0.1},
            {"decoy_fraction": 1.0},
            {"wavelength": -1.0},
        ],
    )
    def test_source_invariants(self, kwargs):
        with pytest.raises(ParameterError):
            SourceParams(**kwargs)

    def test_detector_invariants(self):
        with pytest.raises(ParameterError):
            DetectorParams(efficiency=0.0)
        with pytest.raises(ParameterError):
            DetectorParams(dead_time=-1e-6)

    def test_channel_invariants(self):
        with pytest.raises(ParameterError):
            ChannelParams(length_km=-1.0)
        with pytest.raises(ParameterError):
            ChannelParams(data_line_fraction=0.0)
