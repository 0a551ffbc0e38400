"""Seeded Monte Carlo simulation of one COW session.

Pipeline: symbol generation -> detection with dead-time gating and dark
counts on one or two data-line detectors -> time-tag merging -> sifting
-> QBER estimation -> key distillation. Every stage is deterministic for
a fixed seed; a session owns its RNG streams, so sessions can run in
parallel without coordination.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING, Sequence, TextIO

import numpy as np

from .errors import ParameterError
from .photonics import (
    ChannelParams,
    DetectorParams,
    RateBreakdown,
    SourceParams,
    dead_time_throughput,
    dual_detector_throughput,
    ideal_count_rate,
    secure_rate,
    transmissivity,
)

if TYPE_CHECKING:
    from .config import ExperimentConfig


class Symbol(IntEnum):
    """Two-slot symbol kinds. The bit value equals the enum value."""

    BIT0 = 0  # vacuum in the earlier slot, pulse in the later slot
    BIT1 = 1  # pulse in the earlier slot, vacuum in the later slot
    DECOY = 2  # pulses in both slots


# Counter-based splitmix64: symbol i's uniform depends only on (key, i),
# giving O(1) random access into the emitted stream without materializing it.
_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _uniform_block(key: int, indices: np.ndarray) -> np.ndarray:
    x = np.uint64(key) + (indices.astype(np.uint64) + np.uint64(1)) * np.uint64(_GOLDEN)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_MIX1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_MIX2)
    x ^= x >> np.uint64(31)
    return (x >> np.uint64(11)) * 2.0**-53


_BITS_TO_CHARS = bytes.maketrans(bytes([0, 1]), b"01")
_CHARS_TO_BITS = bytes.maketrans(b"01", bytes([0, 1]))


def bits_to_str(bits: np.ndarray) -> str:
    """Render a 0/1 integer array as a '0101...' key string."""
    return np.asarray(bits, dtype=np.uint8).tobytes().translate(_BITS_TO_CHARS).decode("ascii")


def str_to_bits(key: str) -> np.ndarray:
    """Parse a '0101...' key string back into a uint8 array."""
    return np.frombuffer(key.encode("ascii").translate(_CHARS_TO_BITS), dtype=np.uint8)


@dataclass
class SymbolSequence:
    """Alice's emitted two-slot symbols.

    Kinds are derived on demand from a counter-based hash keyed by the
    seed, so gigaslot sessions never hold the full stream in memory;
    `kinds` materializes (and caches) the explicit array when the whole
    sequence is actually needed.
    """

    count: int
    decoy_fraction: float
    slot_period: float
    seed: int
    _kinds_cache: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.count < 1:
            raise ParameterError(f"symbol count must be >= 1, got {self.count}")
        if not 0 <= self.decoy_fraction < 1:
            raise ParameterError(f"decoy_fraction must be in [0, 1), got {self.decoy_fraction}")
        if self.slot_period <= 0:
            raise ParameterError(f"slot_period must be > 0, got {self.slot_period}")
        self._key = int(np.random.SeedSequence(self.seed).generate_state(1, np.uint64)[0])
        self._bit0_threshold = self.decoy_fraction + (1.0 - self.decoy_fraction) / 2.0

    def __len__(self) -> int:
        return self.count

    @property
    def n_slots(self) -> int:
        return 2 * self.count

    def _classify(self, u: np.ndarray) -> np.ndarray:
        return np.where(
            u < self.decoy_fraction,
            np.uint8(Symbol.DECOY),
            np.where(u < self._bit0_threshold, np.uint8(Symbol.BIT0), np.uint8(Symbol.BIT1)),
        ).astype(np.uint8)

    def kind_at(self, index: int) -> int:
        if not 0 <= index < self.count:
            raise ParameterError(f"symbol index {index} out of range")
        if self._kinds_cache is not None:
            return int(self._kinds_cache[index])
        x = (self._key + (index + 1) * _GOLDEN) & _MASK64
        x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
        x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
        x ^= x >> 31
        u = (x >> 11) * 2.0**-53
        if u < self.decoy_fraction:
            return int(Symbol.DECOY)
        return int(Symbol.BIT0) if u < self._bit0_threshold else int(Symbol.BIT1)

    def kinds_at(self, indices: np.ndarray) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        if self._kinds_cache is not None:
            return self._kinds_cache[idx]
        return self._classify(_uniform_block(self._key, idx))

    @property
    def kinds(self) -> np.ndarray:
        if self._kinds_cache is None:
            out = np.empty(self.count, dtype=np.uint8)
            step = 1 << 22
            for lo in range(0, self.count, step):
                hi = min(lo + step, self.count)
                u = _uniform_block(self._key, np.arange(lo, hi, dtype=np.uint64))
                out[lo:hi] = self._classify(u)
            self._kinds_cache = out
        return self._kinds_cache


def generate_symbols(
    count: int, decoy_fraction: float, seed: int, slot_period: float = 1e-9
) -> SymbolSequence:
    """Draw a symbol sequence with P0 = P1 = (1-f)/2 and P_decoy = f."""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    return SymbolSequence(
        count=int(count),
        decoy_fraction=float(decoy_fraction),
        slot_period=float(slot_period),
        seed=int(seed),
    )


@dataclass(frozen=True)
class NoiseParams:
    """Receiver noise knobs.

    optical_error_prob flips each detected bit independently;
    dark_count_rate (cps, per detector) overrides the detectors' own rate
    when set, otherwise each detector uses its hardware value.
    """

    optical_error_prob: float = 0.0
    dark_count_rate: float | None = None

    def __post_init__(self):
        if not 0 <= self.optical_error_prob <= 0.5:
            raise ParameterError(f"optical_error_prob must be in [0, 0.5], got {self.optical_error_prob}")
        if self.dark_count_rate is not None and self.dark_count_rate < 0:
            raise ParameterError(f"dark_count_rate must be >= 0, got {self.dark_count_rate}")


@dataclass
class TimeTagStream:
    """Click records as parallel detector-id / global-slot-index arrays.

    Slots are non-decreasing overall and strictly increasing per detector.
    """

    detector_ids: np.ndarray
    slots: np.ndarray

    def __post_init__(self):
        self.detector_ids = np.asarray(self.detector_ids, dtype=np.uint8)
        self.slots = np.asarray(self.slots, dtype=np.int64)
        if self.detector_ids.shape != self.slots.shape:
            raise ParameterError("detector_ids and slots must have equal length")
        if self.slots.size > 1:
            if np.any(np.diff(self.slots) < 0):
                raise ParameterError("time tags must be sorted by slot index")
            for det in np.unique(self.detector_ids):
                own = self.slots[self.detector_ids == det]
                if own.size > 1 and np.any(np.diff(own) <= 0):
                    raise ParameterError(f"detector {det} tags must be strictly increasing")

    def __len__(self) -> int:
        return int(self.slots.size)

    def write_text(self, fh: TextIO) -> None:
        """Emit one `detector_id,slot_index` pair per line (debug export)."""
        for det, slot in zip(self.detector_ids.tolist(), self.slots.tolist()):
            fh.write(f"{det},{slot}\n")


def merge_time_tags(streams: Sequence[TimeTagStream]) -> TimeTagStream:
    """Sorted union of per-detector streams.

    Ties are ordered by detector id; same-slot clicks on different
    detectors collapse to a single tag (one photon, one bit), keeping the
    lower detector id.
    """
    if not streams:
        return TimeTagStream(np.empty(0, np.uint8), np.empty(0, np.int64))
    for stream in streams:
        if stream.slots.size > 1 and np.any(np.diff(stream.slots) < 0):
            raise ParameterError("input stream is not sorted")
    slots = np.concatenate([s.slots for s in streams])
    dets = np.concatenate([s.detector_ids for s in streams])
    order = np.lexsort((dets, slots))
    slots = slots[order]
    dets = dets[order]
    keep = np.ones(slots.size, dtype=bool)
    keep[1:] = slots[1:] != slots[:-1]
    return TimeTagStream(dets[keep], slots[keep])


def _dead_window_slots(dead_time: float, slot_period: float) -> int:
    # epsilon guards float noise in exact-integer ratios like 15us / 1ns
    ratio = dead_time / slot_period
    return max(1, math.ceil(ratio - 1e-9)) if ratio > 0 else 1


def _walk_events(
    seq: SymbolSequence,
    rng: np.random.Generator,
    p_signal: float,
    q_dark: float,
    dead_slots: int,
) -> np.ndarray:
    """Event-skipping detection walk.

    Candidate clicks are drawn with geometric gaps at the non-empty-slot
    click probability, then thinned: candidates on empty slots survive
    only as dark counts. Exactly the per-slot Bernoulli law, without
    touching the quiet slots.
    """
    n_slots = seq.n_slots
    p_max = 1.0 - (1.0 - p_signal) * (1.0 - q_dark)
    # below ~1e-16 the expected click count of any feasible session is ~0
    # and geometric gaps would overflow int64
    if p_max <= 1e-16:
        return np.empty(0, np.int64)
    accept_empty = q_dark / p_max
    key = seq._key
    f = seq.decoy_fraction
    bit0_thr = seq._bit0_threshold
    out: list[int] = []
    live = 0
    block = 8192
    gaps = np.empty(0, np.int64)
    accepts = np.empty(0, np.float64)
    cursor = 0
    while live < n_slots:
        if cursor >= gaps.size:
            gaps = rng.geometric(p_max, block)
            accepts = rng.random(block)
            cursor = 0
        cand = live - 1 + int(gaps[cursor])
        u_accept = accepts[cursor]
        cursor += 1
        if cand >= n_slots:
            break
        sym = cand >> 1
        x = (key + (sym + 1) * _GOLDEN) & _MASK64
        x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
        x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
        x ^= x >> 31
        u = (x >> 11) * 2.0**-53
        if u < f:
            nonempty = True
        elif u < bit0_thr:
            nonempty = (cand & 1) == 1
        else:
            nonempty = (cand & 1) == 0
        if nonempty or u_accept < accept_empty:
            out.append(cand)
            live = cand + dead_slots
        else:
            live = cand + 1
    return np.asarray(out, dtype=np.int64)


def _walk_slots(
    seq: SymbolSequence,
    rng: np.random.Generator,
    p_signal: float,
    q_dark: float,
    dead_slots: int,
) -> np.ndarray:
    """Reference engine: one Bernoulli draw per slot, then dead-time gating.

    Materializes the full sequence; intended for reduced repetition rates.
    """
    kinds = seq.kinds
    nonempty = np.empty(seq.n_slots, dtype=bool)
    nonempty[0::2] = (kinds == Symbol.BIT1) | (kinds == Symbol.DECOY)
    nonempty[1::2] = (kinds == Symbol.BIT0) | (kinds == Symbol.DECOY)
    u = rng.random(seq.n_slots)
    p_nonempty = 1.0 - (1.0 - p_signal) * (1.0 - q_dark)
    raw = np.where(nonempty, u < p_nonempty, u < q_dark)
    kept: list[int] = []
    live = 0
    for slot in np.flatnonzero(raw):
        slot = int(slot)
        if slot >= live:
            kept.append(slot)
            live = slot + dead_slots
    return np.asarray(kept, dtype=np.int64)


def simulate_detections(
    seq: SymbolSequence,
    source: SourceParams,
    channel: ChannelParams,
    detectors: Sequence[DetectorParams],
    noise: NoiseParams,
    seed: int,
    engine: str = "events",
) -> list[TimeTagStream]:
    """Detect the emitted sequence on one or two data-line detectors.

    Per non-empty slot each detector clicks with probability
    1 - exp(-mu * t_B * data_fraction * eta / n_det); the 1/n_det models
    the 50:50 split feeding dual detectors. Dark counts land uniformly in
    random slots at the dark rate; clicks inside a detector's dead window
    are discarded. engine='events' skips between clicks (any session
    size), engine='slots' draws every slot (reference, small sessions).
    Deterministic per seed; the dead-time gating invariant is asserted on
    every run.
    """
    if len(seq) < 1:
        raise ParameterError("symbol sequence is empty")
    if not 1 <= len(detectors) <= 2:
        raise ParameterError(f"detector count must be 1 or 2, got {len(detectors)}")
    if engine not in ("events", "slots"):
        raise ParameterError(f"unknown engine {engine!r}")
    t_b = transmissivity(channel)
    n_det = len(detectors)
    walk = _walk_events if engine == "events" else _walk_slots
    children = np.random.SeedSequence(seed).spawn(n_det)
    streams = []
    for det_id, det in enumerate(detectors):
        mu_eff = (
            source.mean_photon_number * t_b * channel.data_line_fraction * det.efficiency / n_det
        )
        p_signal = -math.expm1(-mu_eff)
        dark_rate = noise.dark_count_rate if noise.dark_count_rate is not None else det.dark_count_rate
        q_dark = -math.expm1(-dark_rate * seq.slot_period)
        dead_slots = _dead_window_slots(det.dead_time, seq.slot_period)
        rng = np.random.default_rng(children[det_id])
        slots = walk(seq, rng, p_signal, q_dark, dead_slots)
        if slots.size > 1:
            assert int(np.diff(slots).min()) >= dead_slots, "dead-time gating violated"
        streams.append(TimeTagStream(np.full(slots.size, det_id, np.uint8), slots))
    return streams


@dataclass(frozen=True)
class SiftResult:
    """Matched keys plus click accounting.

    matched bits + decoy_hits + unmatched_clicks equals the merged tag
    count fed to sift().
    """

    alice_key: str
    bob_key: str
    decoy_hits: int
    unmatched_clicks: int

    def __post_init__(self):
        if len(self.alice_key) != len(self.bob_key):
            raise ParameterError("alice and bob keys must have equal length")


def sift(
    seq: SymbolSequence, tags: TimeTagStream, noise: NoiseParams, seed: int
) -> SiftResult:
    """Match Bob's merged clicks against Alice's symbols.

    Bob decodes each click from its slot position inside the symbol
    (earlier slot -> 1, later slot -> 0), so a dark count in the vacuum
    slot of a bit symbol reads as the wrong bit; optical_error_prob then
    flips detected bits independently. Clicks on decoy symbols are tallied
    in decoy_hits and excluded from the keys. Each bit symbol yields at
    most one key bit (the earliest click); later clicks on the same symbol
    count as unmatched.
    """
    slots = tags.slots
    if slots.size and (int(slots[0]) < 0 or int(slots[-1]) >= seq.n_slots):
        raise ParameterError("time tag outside the session span")
    symbols = slots >> 1
    parity = (slots & 1).astype(np.uint8)
    kinds = seq.kinds_at(symbols) if slots.size else np.empty(0, np.uint8)
    decoy_mask = kinds == Symbol.DECOY
    decoy_hits = int(decoy_mask.sum())
    bit_symbols = symbols[~decoy_mask]
    bit_parity = parity[~decoy_mask]
    bit_kinds = kinds[~decoy_mask]
    # slots are sorted, so unique() keeps the earliest click per symbol
    _, first = np.unique(bit_symbols, return_index=True)
    alice = bit_kinds[first]
    bob = (1 - bit_parity[first]).astype(np.uint8)
    if noise.optical_error_prob > 0 and bob.size:
        rng = np.random.default_rng(seed)
        flips = rng.random(bob.size) < noise.optical_error_prob
        bob = np.bitwise_xor(bob, flips.astype(np.uint8))
    unmatched = int(bit_symbols.size - alice.size)
    return SiftResult(bits_to_str(alice), bits_to_str(bob), decoy_hits, unmatched)


def estimate_qber(
    result: SiftResult, disclosed: float, seed: int
) -> tuple[float, str, str]:
    """Compare a random ceil(disclosed * n)-subset and remove it.

    Returns (estimate, kept_alice, kept_bob); the estimate is NaN when the
    keys are empty (nothing to compare).
    """
    if not 0 < disclosed < 1:
        raise ParameterError(f"disclosed fraction must be in (0, 1), got {disclosed}")
    alice = str_to_bits(result.alice_key)
    bob = str_to_bits(result.bob_key)
    if alice.size == 0:
        return float("nan"), "", ""
    subset = math.ceil(disclosed * alice.size)
    rng = np.random.default_rng(seed)
    disclosed_idx = rng.choice(alice.size, size=subset, replace=False)
    estimate = float(np.mean(alice[disclosed_idx] != bob[disclosed_idx]))
    keep = np.ones(alice.size, dtype=bool)
    keep[disclosed_idx] = False
    return estimate, bits_to_str(alice[keep]), bits_to_str(bob[keep])


@dataclass(frozen=True)
class SessionResult:
    """One session's rate ledger, sift output, and post-disclosure keys."""

    breakdown: RateBreakdown
    sift: SiftResult
    qber_estimate: float
    kept_alice: str
    kept_bob: str
    qber_flagged: bool
    seed: int


def run_session(config: "ExperimentConfig", engine: str = "events") -> SessionResult:
    """Run one full COW session and assemble its RateBreakdown.

    Deterministic per (config, seed). A QBER estimate above the distill
    threshold flags the session instead of aborting it. The closed-form
    c_th uses the single- or dual-detector model matching the configured
    receiver, evaluated at the first detector's parameters.
    """
    source, channel = config.source, config.channel
    count = int(round(config.duration_s * source.repetition_rate / 2.0))
    c_zero = ideal_count_rate(source, channel, config.detectors[0])
    dead = config.detectors[0].dead_time
    if len(config.detectors) == 2:
        c_th = dual_detector_throughput(c_zero, dead)
    else:
        c_th = dead_time_throughput(c_zero, dead)
    if count == 0:
        breakdown = RateBreakdown(c_zero, c_th, 0.0, 0.0, 0.0, 0.0)
        empty = SiftResult("", "", 0, 0)
        return SessionResult(breakdown, empty, float("nan"), "", "", False, config.seed)
    stage_seeds = [
        int(child.generate_state(1, np.uint64)[0])
        for child in np.random.SeedSequence(config.seed).spawn(4)
    ]
    seq = generate_symbols(
        count, source.decoy_fraction, stage_seeds[0], slot_period=source.slot_period
    )
    streams = simulate_detections(
        seq, source, channel, config.detectors, config.noise, stage_seeds[1], engine=engine
    )
    merged = merge_time_tags(streams)
    sift_result = sift(seq, merged, config.noise, stage_seeds[2])
    estimate, kept_alice, kept_bob = estimate_qber(
        sift_result, config.distill.disclosed_fraction, stage_seeds[3]
    )
    duration = config.duration_s
    sifted_rate = len(sift_result.alice_key) / duration
    breakdown = RateBreakdown(
        c_th_zero=c_zero,
        c_th=c_th,
        c_exp=len(merged) / duration,
        sifted_rate=sifted_rate,
        qber=0.0 if math.isnan(estimate) else estimate,
        secure_rate=secure_rate(
            sifted_rate,
            config.distill.disclosed_fraction,
            config.distill.compression_fraction,
        ),
    )
    flagged = (not math.isnan(estimate)) and estimate > config.distill.qber_threshold
    return SessionResult(
        breakdown, sift_result, estimate, kept_alice, kept_bob, flagged, config.seed
    )
