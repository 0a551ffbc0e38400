"""Point-to-multipoint one-time-pad key combination and the segment-chained
N-party network extension with the longest-hop rate rule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import KeyConsumedError, ParameterError


def _xor_bits(a: str, b: str) -> str:
    if len(a) != len(b):
        raise ParameterError(f"key length mismatch: {len(a)} vs {len(b)}")
    if not a:
        return ""
    return format(int(a, 2) ^ int(b, 2), f"0{len(a)}b")


@dataclass
class KeyMaterial:
    """A single-use key: a bit string plus its origin label.

    Combination operations (finalize_session_key, chain_segments) consume
    their inputs; a consumed key cannot enter another combination.
    """

    bits: str
    origin: str = ""
    consumed: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.bits.strip("01") != "":
            raise ParameterError("key bits must be a string of 0s and 1s")

    @property
    def length(self) -> int:
        return len(self.bits)

    @classmethod
    def random(cls, n_bits: int, seed: int, origin: str = "") -> "KeyMaterial":
        rng = np.random.default_rng(seed)
        bits = "".join("01"[b] for b in rng.integers(0, 2, size=n_bits))
        return cls(bits, origin)

    def to_hex(self) -> str:
        """`<bit length>:<hex>` with the hex left-padded to ceil(n/4) digits."""
        n = len(self.bits)
        if n == 0:
            return "0:"
        return f"{n}:{format(int(self.bits, 2), f'0{math.ceil(n / 4)}x')}"

    @classmethod
    def from_hex(cls, text: str, origin: str = "") -> "KeyMaterial":
        head, _, hexpart = text.partition(":")
        try:
            n = int(head)
        except ValueError:
            raise ParameterError(f"bad key header in {text!r}") from None
        if n < 0:
            raise ParameterError("key length must be >= 0")
        if n == 0:
            if hexpart:
                raise ParameterError("zero-length key carries no hex digits")
            return cls("", origin)
        if len(hexpart) != math.ceil(n / 4):
            raise ParameterError(f"hex length {len(hexpart)} does not match {n} bits")
        value = int(hexpart, 16)
        if value >> n:
            raise ParameterError("hex value overflows the declared bit length")
        return cls(format(value, f"0{n}b"), origin)


def equalize(k1: KeyMaterial, k2: KeyMaterial) -> tuple[KeyMaterial, KeyMaterial]:
    """Trim trailing bits of the longer key; both outputs have the min length."""
    if not k1.bits or not k2.bits:
        raise ParameterError("cannot equalize an empty key")
    n = min(k1.length, k2.length)
    return KeyMaterial(k1.bits[:n], k1.origin), KeyMaterial(k2.bits[:n], k2.origin)


def xor_combine(k1: KeyMaterial, k2: KeyMaterial) -> KeyMaterial:
    """Bitwise XOR of two equal-length keys."""
    return KeyMaterial(_xor_bits(k1.bits, k2.bits), f"{k1.origin}^{k2.origin}")


def recover(k_own: KeyMaterial, k_combined: KeyMaterial) -> KeyMaterial:
    """Undo a combination: recover(k1, k1 xor k2) == k2."""
    return KeyMaterial(_xor_bits(k_own.bits, k_combined.bits), f"recovered~{k_own.origin}")


def finalize_session_key(k1: KeyMaterial, k2: KeyMaterial) -> KeyMaterial:
    """Combine a segment's two link keys into the shared three-party key.

    Both inputs are consumed: each served as a one-time pad for the
    broadcast, so neither may enter another combination.
    """
    if k1.consumed or k2.consumed:
        raise KeyConsumedError("key already consumed in a previous combination")
    if k1.length != k2.length:
        raise ParameterError("finalize requires equalized keys")
    combined = xor_combine(k1, k2)
    k1.consumed = True
    k2.consumed = True
    return combined


def relay_broadcasts(segment_keys: Sequence[KeyMaterial]) -> list[str]:
    """Classical relay messages k_i xor k_{i+1}, at the common key length.

    Pure: broadcasts are public ciphertext and may be recomputed freely.
    """
    if not segment_keys:
        raise ParameterError("at least one segment key is required")
    n = min(key.length for key in segment_keys)
    trimmed = [key.bits[:n] for key in segment_keys]
    return [_xor_bits(trimmed[i], trimmed[i + 1]) for i in range(len(trimmed) - 1)]


def reconstruct_from_relay(own_bits: str, segment_index: int, broadcasts: Sequence[str]) -> str:
    """Fold relay messages from a party's own segment key down to segment 0's key."""
    n = len(broadcasts[0]) if broadcasts else len(own_bits)
    bits = own_bits[:n]
    for i in range(segment_index - 1, -1, -1):
        bits = _xor_bits(bits, broadcasts[i])
    return bits


def chain_segments(segment_keys: Sequence[KeyMaterial]) -> KeyMaterial:
    """Chain segment keys into one network-wide key.

    All keys are equalized to the global minimum length; every party can
    reconstruct the result (the first segment's equalized key) by folding
    the relay broadcasts. Inputs are consumed. A single segment passes
    through unchanged.
    """
    if not segment_keys:
        raise ParameterError("at least one segment key is required")
    for key in segment_keys:
        if key.consumed:
            raise KeyConsumedError(f"segment key {key.origin!r} already consumed")
    n = min(key.length for key in segment_keys)
    if n == 0:
        raise ParameterError("cannot chain an empty key")
    final = KeyMaterial(segment_keys[0].bits[:n], "network")
    for key in segment_keys:
        key.consumed = True
    return final


@dataclass(frozen=True)
class NetworkTopology:
    """Segment-chained party graph.

    segments are ordered (bob1, alice, bob2) triples; geometry comes from
    either line positions in km or an explicit symmetric distance table.
    """

    segments: tuple[tuple[str, str, str], ...]
    positions: Mapping[str, float] | None = None
    distances: Mapping[tuple[str, str], float] | None = None

    def __post_init__(self):
        if (self.positions is None) == (self.distances is None):
            raise ParameterError("provide exactly one of positions or distances")
        if not self.segments:
            raise ParameterError("topology needs at least one segment")

    def parties(self) -> list[str]:
        seen: dict[str, None] = {}
        for segment in self.segments:
            for party in segment:
                seen.setdefault(party)
        return list(seen)

    def distance(self, a: str, b: str) -> float:
        if self.positions is not None:
            try:
                return abs(self.positions[a] - self.positions[b])
            except KeyError as exc:
                raise ParameterError(f"party {exc.args[0]!r} has no position") from None
        key = (a, b) if a <= b else (b, a)
        try:
            return self.distances[key]  # type: ignore[index]
        except KeyError:
            raise ParameterError(f"no distance for pair {a!r}-{b!r}") from None


def validate_topology(topology: NetworkTopology) -> list[str]:
    """Return all invariant violations (empty list means valid); never raises."""
    violations: list[str] = []
    for i, (bob1, alice, bob2) in enumerate(topology.segments):
        label = f"segment {i} ({bob1}, {alice}, {bob2})"
        if alice == bob1 or alice == bob2:
            violations.append(f"{label}: alice coincides with a bob")
        for a, b in ((bob1, alice), (alice, bob2)):
            if a != b:
                try:
                    topology.distance(a, b)
                except ParameterError as exc:
                    violations.append(f"{label}: {exc}")
    for i in range(len(topology.segments) - 1):
        shared = set(topology.segments[i]) & set(topology.segments[i + 1])
        if len(shared) != 1:
            violations.append(
                f"segments {i} and {i + 1} must share exactly one vertex, share {sorted(shared)}"
            )
    return violations


def network_rate(topology: NetworkTopology, rate_fn: Callable[[float], float]) -> float:
    """Rate of the chained network: rate_fn at the longest within-segment hop.

    The rule is deliberately independent of the end-to-end network span;
    only the worst single Alice-Bob hop matters.
    """
    violations = validate_topology(topology)
    if violations:
        raise ParameterError("invalid topology: " + "; ".join(violations))
    longest = max(
        max(topology.distance(bob1, alice), topology.distance(alice, bob2))
        for bob1, alice, bob2 in topology.segments
    )
    return rate_fn(longest)
