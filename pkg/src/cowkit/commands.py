"""Experiment orchestration behind the CLI: sweep execution on a worker
pool, CSV emission, the multipoint report, and the power budget."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import bounds as bounds_mod
from .config import BoundsSpec, ExperimentConfig, SweepSpec
from .errors import ConfigError, ParameterError
from .multipoint import (
    KeyMaterial,
    NetworkTopology,
    chain_segments,
    equalize,
    finalize_session_key,
    reconstruct_from_relay,
    relay_broadcasts,
    validate_topology,
)
from .photonics import (
    ChannelParams,
    RateBreakdown,
    SourceParams,
    attenuation_for_target,
    dead_time_throughput,
    ideal_count_rate,
    target_power,
    transmissivity,
)
from .session import SessionResult, run_session

RATES_BASE_COLUMNS = ("axis_value", "c_th_zero", "c_th")
RATES_MODE_COLUMNS = {
    "single": ("c_exp_single", "skr_single", "qber_single", "secure_single"),
    "dual": ("c_exp_dual", "skr_dual", "qber_dual", "secure_dual"),
}
# Column order fixed by contract: c_exp, skr, qber, secure interleaved per mode.
RATES_COLUMN_ORDER = (
    "axis_value",
    "c_th_zero",
    "c_th",
    "c_exp_single",
    "c_exp_dual",
    "skr_single",
    "skr_dual",
    "qber_single",
    "qber_dual",
    "secure_single",
    "secure_dual",
)

BOUNDS_COLUMNS = (
    "mu",
    "L_km",
    "t_B",
    "gamma_e",
    "chi",
    "rate_single",
    "rate_dual",
    "cap_combined",
    "cap_individual",
)


def format_cell(value: float | None) -> str:
    """Full-precision scientific notation (17 significant digits); None -> empty."""
    return "" if value is None else f"{value:.16e}"


def render_csv(header: Sequence[str], rows: Iterable[dict]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(row.get(col)) for col in header))
    return "\n".join(lines) + "\n"


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[dict]) -> None:
    Path(path).write_text(render_csv(header, rows))


def _apply_axis(config: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    if axis == "dead_time":
        return replace(config, detectors=tuple(replace(d, dead_time=value) for d in config.detectors))
    if axis == "efficiency":
        return replace(config, detectors=tuple(replace(d, efficiency=value) for d in config.detectors))
    if axis == "length_km":
        return replace(config, channel=replace(config.channel, length_km=value))
    if axis == "mean_photon_number":
        return replace(config, source=replace(config.source, mean_photon_number=value))
    raise ParameterError(f"unknown sweep axis {axis!r}")


def _mode_detectors(config: ExperimentConfig, mode: str):
    if mode == "single":
        return (config.detectors[0],)
    second = config.detectors[1] if len(config.detectors) == 2 else config.detectors[0]
    return (config.detectors[0], second)


def _rates_point(task: tuple[ExperimentConfig, tuple[str, ...], float]) -> dict:
    config, modes, axis_value = task
    det0 = config.detectors[0]
    c_zero = ideal_count_rate(config.source, config.channel, det0)
    row = {
        "axis_value": axis_value,
        "c_th_zero": c_zero,
        "c_th": dead_time_throughput(c_zero, det0.dead_time),
    }
    mode_seeds = np.random.SeedSequence(config.seed).spawn(2)
    for child, mode in zip(mode_seeds, ("single", "dual")):
        if mode not in modes:
            continue
        session_config = replace(
            config,
            detectors=_mode_detectors(config, mode),
            seed=int(child.generate_state(1, np.uint64)[0]),
        )
        result = run_session(session_config)
        row[f"c_exp_{mode}"] = result.breakdown.c_exp
        row[f"skr_{mode}"] = result.breakdown.sifted_rate
        row[f"qber_{mode}"] = result.breakdown.qber
        row[f"secure_{mode}"] = result.breakdown.secure_rate
    return row


def _worker_count(n_points: int) -> int:
    env = os.environ.get("COWKIT_THREADS")
    if env is not None:
        try:
            workers = int(env)
        except ValueError:
            raise ConfigError(f"COWKIT_THREADS must be an integer, got {env!r}") from None
        if workers < 1:
            raise ConfigError(f"COWKIT_THREADS must be >= 1, got {workers}")
    else:
        workers = min(4, os.cpu_count() or 1)
    return max(1, min(workers, n_points))


def cmd_rates(config: ExperimentConfig, sweep: SweepSpec) -> tuple[list[str], list[dict]]:
    """Run single/dual sessions along a sweep axis; one CSV row per value.

    Each point runs on a derived seed (base seed + point index), so
    parallel and serial execution produce identical tables.
    """
    modes = tuple(m for m in sweep.modes if m != "bounds")
    if len(modes) != len(sweep.modes):
        raise ConfigError("the rates command supports modes 'single' and 'dual'; use the bounds command for bound curves")
    header = [c for c in RATES_COLUMN_ORDER if c in RATES_BASE_COLUMNS or c in
              tuple(col for m in modes for col in RATES_MODE_COLUMNS[m])]
    tasks = [
        (_apply_axis(config, sweep.axis, value).with_seed(config.seed + index), modes, value)
        for index, value in enumerate(sweep.values)
    ]
    workers = _worker_count(len(tasks))
    if workers == 1:
        rows = [_rates_point(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_rates_point, tasks))
    return header, rows


def cmd_bounds(spec: BoundsSpec) -> tuple[list[str], list[dict]]:
    """Security-bound sweep: one row per (mu, L); capacity cells empty
    where the broadcast bound is undefined (t_B >= 1/2)."""
    try:
        points = bounds_mod.sweep_bounds(
            list(spec.mus),
            spec.efficiency,
            list(spec.lengths_km),
            spec.fiber_loss_db_per_km,
            spec.excess_loss_db,
        ) if spec.mus else []
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    rows = []
    for point in points:
        report = point.report
        rows.append(
            {
                "mu": point.mean_photon_number,
                "L_km": point.length_km,
                "t_B": point.transmissivity,
                "gamma_e": report.gamma_e,
                "chi": report.chi_single,
                "rate_single": report.rate_single,
                "rate_dual": report.rate_dual,
                "cap_combined": report.cap_combined,
                "cap_individual": report.cap_individual,
            }
        )
    return list(BOUNDS_COLUMNS), rows


@dataclass(frozen=True)
class LinkReport:
    segment_index: int
    alice: str
    bob: str
    length_km: float
    breakdown: RateBreakdown
    qber_estimate: float
    qber_flagged: bool
    key_bits: int


@dataclass(frozen=True)
class MultipointReport:
    links: tuple[LinkReport, ...]
    stalled: bool
    keys_match: bool | None
    network_key_hex: str | None
    network_key_bits: int | None
    network_rate_monte_carlo: float | None
    network_rate_dual_bob_bound: float | None
    longest_hop_km: float

    def flagged_links(self) -> list[LinkReport]:
        return [link for link in self.links if link.qber_flagged]

    def to_dict(self) -> dict:
        return {
            "links": [
                {
                    "segment_index": link.segment_index,
                    "alice": link.alice,
                    "bob": link.bob,
                    "length_km": link.length_km,
                    "qber_estimate": None if math.isnan(link.qber_estimate) else link.qber_estimate,
                    "qber_flagged": link.qber_flagged,
                    "key_bits": link.key_bits,
                    "breakdown": asdict(link.breakdown),
                }
                for link in self.links
            ],
            "stalled": self.stalled,
            "keys_match": self.keys_match,
            "network_key_hex": self.network_key_hex,
            "network_key_bits": self.network_key_bits,
            "network_rate_monte_carlo": self.network_rate_monte_carlo,
            "network_rate_dual_bob_bound": self.network_rate_dual_bob_bound,
            "longest_hop_km": self.longest_hop_km,
        }


def _link_session(config: ExperimentConfig, length_km: float, seed: int) -> SessionResult:
    link_config = replace(
        config, channel=replace(config.channel, length_km=length_km), seed=seed
    )
    return run_session(link_config)


def cmd_multipoint(
    config: ExperimentConfig, topology: NetworkTopology, policy: str = "stall"
) -> MultipointReport:
    """One session per Alice-Bob link, then OTP combination across segments.

    Every party's reconstruction of the network key is verified against
    the chained key. When any link's QBER estimate exceeds the threshold,
    policy 'stall' withholds the network key (the default); 'proceed'
    combines anyway.
    """
    if policy not in ("stall", "proceed"):
        raise ParameterError(f"policy must be 'stall' or 'proceed', got {policy!r}")
    violations = validate_topology(topology)
    if violations:
        raise ConfigError("invalid topology: " + "; ".join(violations))
    links: list[tuple[int, str, str, float]] = []
    for index, (bob1, alice, bob2) in enumerate(topology.segments):
        links.append((index, alice, bob1, topology.distance(alice, bob1)))
        links.append((index, alice, bob2, topology.distance(alice, bob2)))
    seeds = np.random.SeedSequence(config.seed).spawn(len(links) + 1)
    link_reports: list[LinkReport] = []
    link_keys: list[KeyMaterial] = []
    for (segment_index, alice, bob, dist), child in zip(links, seeds):
        result = _link_session(config, dist, int(child.generate_state(1, np.uint64)[0]))
        link_reports.append(
            LinkReport(
                segment_index=segment_index,
                alice=alice,
                bob=bob,
                length_km=dist,
                breakdown=result.breakdown,
                qber_estimate=result.qber_estimate,
                qber_flagged=result.qber_flagged,
                key_bits=len(result.kept_alice),
            )
        )
        # error correction is modeled by the DR/CR factors; post-EC both
        # ends hold Alice's kept string
        link_keys.append(KeyMaterial(result.kept_alice, origin=f"{alice}-{bob}"))
    longest = max(
        max(topology.distance(b1, a), topology.distance(a, b2))
        for b1, a, b2 in topology.segments
    )
    any_flagged = any(link.qber_flagged for link in link_reports)
    if (any_flagged and policy == "stall") or any(key.length == 0 for key in link_keys):
        return MultipointReport(
            links=tuple(link_reports),
            stalled=True,
            keys_match=None,
            network_key_hex=None,
            network_key_bits=None,
            network_rate_monte_carlo=None,
            network_rate_dual_bob_bound=None,
            longest_hop_km=longest,
        )
    segment_keys: list[KeyMaterial] = []
    for index in range(len(topology.segments)):
        k1, k2 = equalize(link_keys[2 * index], link_keys[2 * index + 1])
        segment_keys.append(finalize_session_key(k1, k2))
    party_copies = {party: None for party in topology.parties()}
    for index, segment in enumerate(topology.segments):
        for party in segment:
            if party_copies[party] is None:
                party_copies[party] = (index, segment_keys[index].bits)
    broadcasts = relay_broadcasts(segment_keys)
    network_key = chain_segments(segment_keys)
    keys_match = all(
        reconstruct_from_relay(bits, index, broadcasts) == network_key.bits
        for index, bits in party_copies.values()
    )
    rate_seed = int(seeds[-1].generate_state(1, np.uint64)[0])
    mc_rate = _link_session(config, longest, rate_seed).breakdown.secure_rate
    bound_channel = replace(config.channel, length_km=longest)
    bound_rate = bounds_mod.dw_rate_dual(
        config.source.mean_photon_number,
        transmissivity(bound_channel),
        config.detectors[0].efficiency,
    )
    return MultipointReport(
        links=tuple(link_reports),
        stalled=False,
        keys_match=keys_match,
        network_key_hex=network_key.to_hex(),
        network_key_bits=network_key.length,
        network_rate_monte_carlo=mc_rate,
        network_rate_dual_bob_bound=bound_rate,
        longest_hop_km=longest,
    )


@dataclass(frozen=True)
class BudgetReport:
    target_power_w: float
    attenuation_db: float
    fiber_length_km: float
    fiber_loss_db: float
    excess_loss_db: float
    total_loss_db: float
    transmissivity: float
    emulated_length_km: float | None

    @property
    def attenuation_db_magnitude(self) -> float:
        return abs(self.attenuation_db)

    def lines(self) -> list[str]:
        out = [
            f"target power P_f: {self.target_power_w:.6g} W",
            f"attenuator setting: {self.attenuation_db_magnitude:.6g} dB (gain {self.attenuation_db:.6g} dB)",
            f"fiber loss: {self.fiber_loss_db:.6g} dB over {self.fiber_length_km:.6g} km",
            f"excess (attenuator) loss: {self.excess_loss_db:.6g} dB",
            f"total channel loss: {self.total_loss_db:.6g} dB",
            f"channel transmissivity t_B: {self.transmissivity:.6g}",
        ]
        if self.emulated_length_km is not None:
            out.insert(5, f"emulated distance: {self.emulated_length_km:.6g} km")
        return out


def cmd_budget(
    source: SourceParams, channel: ChannelParams, spool_km: float | None = None
) -> BudgetReport:
    """Power and loss budget of one link.

    With spool_km, channel.length_km is the target distance realised on a
    physical spool of spool_km; the report shows the attenuator loss
    needed on top of the spool to emulate the full distance.
    """
    attenuation = attenuation_for_target(source)
    if spool_km is None:
        return BudgetReport(
            target_power_w=target_power(source),
            attenuation_db=attenuation,
            fiber_length_km=channel.length_km,
            fiber_loss_db=channel.fiber_loss_db_per_km * channel.length_km,
            excess_loss_db=channel.excess_loss_db,
            total_loss_db=channel.total_loss_db,
            transmissivity=transmissivity(channel),
            emulated_length_km=None,
        )
    if not 0 <= spool_km <= channel.length_km:
        raise ParameterError(f"spool_km must lie in [0, length_km], got {spool_km}")
    emulation_excess = channel.fiber_loss_db_per_km * (channel.length_km - spool_km)
    return BudgetReport(
        target_power_w=target_power(source),
        attenuation_db=attenuation,
        fiber_length_km=spool_km,
        fiber_loss_db=channel.fiber_loss_db_per_km * spool_km,
        excess_loss_db=emulation_excess + channel.excess_loss_db,
        total_loss_db=channel.total_loss_db,
        transmissivity=transmissivity(channel),
        emulated_length_km=channel.length_km,
    )
