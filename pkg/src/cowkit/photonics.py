"""Closed-form photonic and detector arithmetic for a COW QKD link.

Power budgets, fiber transmissivity, ideal and dead-time-limited count
rates, the split-data-line dual-detector throughput model, and the final
secure-rate distillation product. All functions are pure and safe to call
concurrently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError

# CODATA fixed values, not configuration.
PLANCK = 6.62607015e-34  # J*s
LIGHT_SPEED = 299792458.0  # m/s


@dataclass(frozen=True)
class SourceParams:
    """Transmitter description.

    repetition_rate: pulse (slot) rate in Hz; the slot period is 1/repetition_rate.
    mean_photon_number: mean photons per non-empty weak coherent pulse.
    decoy_fraction: probability that a symbol is a two-pulse decoy.
    wavelength: laser wavelength in meters.
    initial_power: average optical power before the attenuators, in watts.
    """

    repetition_rate: float = 1e9
    mean_photon_number: float = 0.5
    decoy_fraction: float = 0.1
    wavelength: float = 1550.12e-9
    initial_power: float = 2.49e-3

    def __post_init__(self):
        if self.repetition_rate <= 0:
            raise ParameterError(f"repetition_rate must be > 0, got {self.repetition_rate}")
        if self.wavelength <= 0:
            raise ParameterError(f"wavelength must be > 0, got {self.wavelength}")
        if self.initial_power <= 0:
            raise ParameterError(f"initial_power must be > 0, got {self.initial_power}")
        if self.mean_photon_number < 0:
            raise ParameterError(f"mean_photon_number must be >= 0, got {self.mean_photon_number}")
        if not 0 <= self.decoy_fraction < 1:
            raise ParameterError(f"decoy_fraction must be in [0, 1), got {self.decoy_fraction}")

    @property
    def slot_period(self) -> float:
        return 1.0 / self.repetition_rate


@dataclass(frozen=True)
class ChannelParams:
    """Fiber loss model. Excess attenuator loss is additive in dB, which is
    how longer distances are emulated on a short physical spool."""

    fiber_loss_db_per_km: float = 0.22
    length_km: float = 80.0
    excess_loss_db: float = 0.0
    data_line_fraction: float = 0.9

    def __post_init__(self):
        if self.fiber_loss_db_per_km < 0:
            raise ParameterError(f"fiber_loss_db_per_km must be >= 0, got {self.fiber_loss_db_per_km}")
        if self.length_km < 0:
            raise ParameterError(f"length_km must be >= 0, got {self.length_km}")
        if self.excess_loss_db < 0:
            raise ParameterError(f"excess_loss_db must be >= 0, got {self.excess_loss_db}")
        if not 0 < self.data_line_fraction <= 1:
            raise ParameterError(f"data_line_fraction must be in (0, 1], got {self.data_line_fraction}")

    @property
    def total_loss_db(self) -> float:
        return self.fiber_loss_db_per_km * self.length_km + self.excess_loss_db


@dataclass(frozen=True)
class DetectorParams:
    """Single-photon detector: quantum efficiency, dead time, dark counts."""

    efficiency: float = 0.15
    dead_time: float = 15e-6
    dark_count_rate: float = 0.0

    def __post_init__(self):
        if not 0 < self.efficiency <= 1:
            raise ParameterError(f"efficiency must be in (0, 1], got {self.efficiency}")
        if self.dead_time < 0:
            raise ParameterError(f"dead_time must be >= 0, got {self.dead_time}")
        if self.dark_count_rate < 0:
            raise ParameterError(f"dark_count_rate must be >= 0, got {self.dark_count_rate}")


@dataclass(frozen=True)
class RateBreakdown:
    """The full rate ledger of one link.

    c_th_zero: dead-time-free theoretical count rate (cps).
    c_th: dead-time-limited theoretical count rate for the configured
        receiver (single- or dual-detector model), cps.
    c_exp: observed raw count rate (cps).
    sifted_rate: sifted key rate, bits/s.
    qber: estimated quantum bit error rate.
    secure_rate: distilled secure key rate, bits/s.
    """

    c_th_zero: float
    c_th: float
    c_exp: float
    sifted_rate: float
    qber: float
    secure_rate: float

    def __post_init__(self):
        if not 0 <= self.c_th <= self.c_th_zero:
            raise ParameterError(f"c_th must lie in [0, c_th_zero], got {self.c_th} vs {self.c_th_zero}")
        if self.c_exp < 0:
            raise ParameterError(f"c_exp must be >= 0, got {self.c_exp}")
        if not 0 <= self.qber <= 1:
            raise ParameterError(f"qber must be in [0, 1], got {self.qber}")
        if self.secure_rate > self.sifted_rate:
            raise ParameterError(f"secure_rate {self.secure_rate} exceeds sifted_rate {self.sifted_rate}")


def target_power(source: SourceParams) -> float:
    """Average emitted power mu * F * h * c / lambda in watts."""
    return (
        source.mean_photon_number
        * source.repetition_rate
        * PLANCK
        * LIGHT_SPEED
        / source.wavelength
    )


def attenuation_for_target(source: SourceParams) -> float:
    """Signed attenuator gain 10*log10(P_f / P_i) in dB.

    Negative for any real attenuation; report abs() as the attenuator
    setting. Rejects mean_photon_number == 0 (log of zero target power).
    """
    p_f = target_power(source)
    if p_f <= 0:
        raise ParameterError("attenuation undefined for zero mean photon number")
    return 10.0 * math.log10(p_f / source.initial_power)


def transmissivity(channel: ChannelParams) -> float:
    """Channel transmissivity 10^(-(loss dB)/10), excess loss included."""
    return 10.0 ** (-channel.total_loss_db / 10.0)


def ideal_count_rate(source: SourceParams, channel: ChannelParams, det: DetectorParams) -> float:
    """Dead-time-free count rate: fraction * eta * mu * (F/2) * t_B.

    F/2 is the symbol rate; every bit symbol carries one non-empty pulse.
    """
    return (
        channel.data_line_fraction
        * det.efficiency
        * source.mean_photon_number
        * (source.repetition_rate / 2.0)
        * transmissivity(channel)
    )


def dead_time_throughput(c_zero: float, dead_time: float) -> float:
    """Dead-time-limited count rate c0 / (1 + t_d * c0).

    Equals c_zero at t_d = 0 and saturates below 1/t_d as c_zero grows.
    """
    if c_zero < 0:
        raise ParameterError(f"c_zero must be >= 0, got {c_zero}")
    if dead_time < 0:
        raise ParameterError(f"dead_time must be >= 0, got {dead_time}")
    return c_zero / (1.0 + dead_time * c_zero)


def dual_detector_throughput(c_zero: float, dead_time: float) -> float:
    """Merged count rate of two detectors behind a 50:50 splitter.

    Each detector sees c_zero/2 and is dead-time limited independently:
    2 * dead_time_throughput(c_zero / 2, dead_time). Bounded between the
    single-detector throughput and twice it; the gain appears only when
    dead time is the bottleneck.
    """
    return 2.0 * dead_time_throughput(c_zero / 2.0, dead_time)


def secure_rate(skr: float, disclosed: float, compression: float) -> float:
    """Distilled secure rate SKR * (1 - DR) * (1 - CR), bits/s."""
    if not 0 <= disclosed <= 1:
        raise ParameterError(f"disclosed fraction must be in [0, 1], got {disclosed}")
    if not 0 <= compression <= 1:
        raise ParameterError(f"compression fraction must be in [0, 1], got {compression}")
    return skr * (1.0 - disclosed) * (1.0 - compression)
