"""Collective beam-splitting-attack security bounds for COW links.

Eve replaces the lossy fiber with a lossless one plus a beam splitter and
stores the diverted fraction t_E = 1 - t_B in quantum memory; the attack
leaves QBER and visibility untouched. Her per-signal information is
bounded by the Holevo quantity of the two retained coherent states, and
the asymptotic secret fraction follows the Devetak-Winter form. Pure-loss
bosonic broadcast capacities give the protocol-independent ceilings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .photonics import ChannelParams, transmissivity

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class BsaInputs:
    """Operating point of the beam-splitting attack."""

    mean_photon_number: float
    transmissivity: float
    detector_efficiency: float

    def __post_init__(self):
        if self.mean_photon_number < 0:
            raise ParameterError(f"mean_photon_number must be >= 0, got {self.mean_photon_number}")
        if not 0 < self.transmissivity <= 1:
            raise ParameterError(f"transmissivity must be in (0, 1], got {self.transmissivity}")
        if not 0 < self.detector_efficiency <= 1:
            raise ParameterError(f"detector_efficiency must be in (0, 1], got {self.detector_efficiency}")


@dataclass(frozen=True)
class SecurityBoundReport:
    """Bound outputs at one (mu, t_B) point.

    cap_combined / cap_individual are None where the broadcast capacity
    expressions are undefined (t_B >= 1/2, i.e. short links).
    """

    gamma_e: float
    chi_single: float
    chi_dual: float
    rate_single: float
    rate_dual: float
    cap_combined: float | None
    cap_individual: float | None

    def __post_init__(self):
        if self.rate_dual > self.rate_single:
            raise ParameterError("rate_dual cannot exceed rate_single")
        if self.rate_single < 0 or self.rate_dual < 0:
            raise ParameterError("rates must be >= 0")


@dataclass(frozen=True)
class BoundSweepPoint:
    """One row of a distance sweep."""

    mean_photon_number: float
    length_km: float
    transmissivity: float
    report: SecurityBoundReport


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2(1-x), with h(0) = h(1) = 0."""
    if not 0 <= x <= 1:
        raise ParameterError(f"binary_entropy argument must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def gamma_e(mu: float, t_b: float) -> float:
    """Eve's retained-state overlap exp(-mu * (1 - t_B))."""
    if mu < 0:
        raise ParameterError(f"mu must be >= 0, got {mu}")
    if not 0 < t_b <= 1:
        raise ParameterError(f"t_b must be in (0, 1], got {t_b}")
    return math.exp(-mu * (1.0 - t_b))


def holevo_chi(mu: float, t_b: float) -> float:
    """Eve's Holevo information h((1 - gamma_E) / 2) in bits per signal."""
    return binary_entropy((1.0 - gamma_e(mu, t_b)) / 2.0)


def dw_rate_single(mu: float, t_b: float, eta: float) -> float:
    """Single-receiver Devetak-Winter bound, secret bits per pulse.

    (1/2) * (1 - exp(-mu t_B eta)) * max(0, 1 - chi).
    """
    if not 0 < eta <= 1:
        raise ParameterError(f"eta must be in (0, 1], got {eta}")
    sift = 0.5 * -math.expm1(-mu * t_b * eta)
    return sift * max(0.0, 1.0 - holevo_chi(mu, t_b))


def dw_rate_dual(mu: float, t_b: float, eta: float) -> float:
    """Per-receiver bound when Eve correlates both broadcast channels.

    Same sifted prefactor, with Eve's information doubled: the bracket is
    max(0, 1 - 2*chi), clamped so that no-key regions read exactly zero.
    """
    if not 0 < eta <= 1:
        raise ParameterError(f"eta must be in (0, 1], got {eta}")
    sift = 0.5 * -math.expm1(-mu * t_b * eta)
    return sift * max(0.0, 1.0 - 2.0 * holevo_chi(mu, t_b))


def capacity_combined(t_b: float) -> float:
    """Two-receiver pure-loss broadcast ceiling -log2(1 - 2 t_B), bits per use.

    Defined only for t_B < 1/2; diverges at t_B -> 1/2.
    """
    if not 0 < t_b < 0.5:
        raise ParameterError(f"capacity_combined requires t_b in (0, 1/2), got {t_b}")
    return -math.log1p(-2.0 * t_b) / _LN2


def capacity_individual(t_b: float, as_printed: bool = False) -> float:
    """Per-receiver broadcast ceiling log2((1 - t_B) / (1 - 2 t_B)), bits per use.

    The positive orientation is returned by default: it is positive on
    (0, 1/2), sits below capacity_combined, and their difference is the
    point-to-point -log2(1 - t_B). Set as_printed=True for the
    sign-flipped variant -log2((1 - t_B)/(1 - 2 t_B)), which is negative
    everywhere on the domain and kept only for comparison.
    """
    if not 0 < t_b < 0.5:
        raise ParameterError(f"capacity_individual requires t_b in (0, 1/2), got {t_b}")
    value = (math.log1p(-t_b) - math.log1p(-2.0 * t_b)) / _LN2
    return -value if as_printed else value


def sweep_bounds(
    mus: list[float],
    eta: float,
    lengths_km: list[float],
    fiber_loss_db_per_km: float,
    excess_loss_db: float = 0.0,
) -> list[BoundSweepPoint]:
    """Evaluate all bounds over a (mu, distance) grid.

    One row per (mu, L), in the given order. Transmissivity uses the same
    loss model as the link simulation, excess loss included. Capacity
    cells are None where t_B >= 1/2.
    """
    if not lengths_km:
        raise ParameterError("length sweep must be non-empty")
    rows: list[BoundSweepPoint] = []
    for mu in mus:
        for length in lengths_km:
            channel = ChannelParams(
                fiber_loss_db_per_km=fiber_loss_db_per_km,
                length_km=length,
                excess_loss_db=excess_loss_db,
            )
            t_b = transmissivity(channel)
            chi = holevo_chi(mu, t_b)
            defined = t_b < 0.5
            report = SecurityBoundReport(
                gamma_e=gamma_e(mu, t_b),
                chi_single=chi,
                chi_dual=2.0 * chi,
                rate_single=dw_rate_single(mu, t_b, eta),
                rate_dual=dw_rate_dual(mu, t_b, eta),
                cap_combined=capacity_combined(t_b) if defined else None,
                cap_individual=capacity_individual(t_b) if defined else None,
            )
            rows.append(BoundSweepPoint(mu, length, t_b, report))
    return rows
