"""E91 bit generation: pair emission, state collapse, detection, sifting and CHSH.

The quantum state travelling to Bob is modelled by two classical attributes, a
bit and the basis it was measured in.  A measurement in another basis keeps the
bit with the same-bit probability ``(1 - u_in . u_meas) / 2``, so identical
bases always flip the bit (perfect anti-correlation).
"""
from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import (
    EKERT_BASES,
    EXPECTED_MEASUREMENTS_PER_SIFTED_BIT,
    TSIRELSON_BOUND,
    A1,
    A3,
    B1,
    B3,
    BasisSet,
    DetectorParams,
    InsufficientStatisticsError,
    MeasurementBasis,
    PumpLimitExceededError,
    RandomStream,
    RunConfig,
    sample_uniform_basis,
    unit_vector,
)

#: Basis pairs entering the CHSH statistic, with their sign.
CHSH_TERMS: tuple[tuple[MeasurementBasis, MeasurementBasis, int], ...] = (
    (A1, B1, +1),
    (A1, B3, -1),
    (A3, B1, +1),
    (A3, B3, +1),
)


class Classification(enum.Enum):
    NO_PAIR = "no_pair"
    LOST = "lost"
    SAME_BASIS = "same_basis_coincidence"
    DIFF_BASIS = "diff_basis_coincidence"


class Detection(enum.Enum):
    """What made a detector click, if anything."""

    NONE = 0
    SIGNAL = 1  # the first (entangled) photon was absorbed
    LATER_PHOTON = 2  # first photon missed, a second-pair photon clicked
    NOISE = 3  # no photon absorbed, noise count


@dataclass(frozen=True)
class PumpEventRecord:
    alice_basis: MeasurementBasis
    bob_basis: MeasurementBasis
    alice_bit: Optional[int]
    bob_bit: Optional[int]
    eve_intercepted: bool
    photon_count_alice: int
    photon_count_bob: int
    classification: Classification


@dataclass
class BitGenResult:
    alice_raw_key: np.ndarray
    bob_raw_key: np.ndarray
    diff_basis_records: list[PumpEventRecord]
    raw_key_rate: float
    raw_qber: float
    s_value: float
    elapsed_time: float
    pump_count: int
    pair_count: int = 0
    coincidence_count: int = 0
    uncapped_s_value: float = float("nan")
    counters: dict[str, int] = field(default_factory=dict)

    @property
    def key_length(self) -> int:
        return len(self.alice_raw_key)


# --- closed-form helpers -------------------------------------------------

def same_bit_probability(a: MeasurementBasis, b: MeasurementBasis) -> float:
    p = (1.0 - float(unit_vector(a) @ unit_vector(b))) / 2.0
    # dot products of exactly parallel bases can land a few ulp outside [0, 1]
    return min(1.0, max(0.0, p))


def ideal_correlation(a: MeasurementBasis, b: MeasurementBasis) -> float:
    return -float(unit_vector(a) @ unit_vector(b))


def theoretical_s(bases: BasisSet = EKERT_BASES) -> float:
    """S with ideal correlations ``E = -a.b``; equals ``-2 sqrt 2`` for the Ekert bases."""
    return sum(sign * ideal_correlation(bases.by_label(a.label), bases.by_label(b.label))
               for a, b, sign in CHSH_TERMS)


def classical_s() -> float:
    """S when every basis looks the same (all dot products 1)."""
    return sum(-sign for _, _, sign in CHSH_TERMS)


def required_pump_target(desired_key_length: int, excess_bit_factor: float) -> int:
    """Number of sifted bits bit generation must collect."""
    if desired_key_length < 1 or excess_bit_factor < 1:
        raise ValueError("desired_key_length and excess_bit_factor must be >= 1")
    return math.ceil(desired_key_length * excess_bit_factor - 1e-9)


def expected_measurements_per_sifted_bit() -> float:
    return EXPECTED_MEASUREMENTS_PER_SIFTED_BIT


# --- detector POVM ----------------------------------------------------------

def povm_no_click(n: int, d: DetectorParams) -> float:
    """P(0|n): probability of registering nothing with ``n`` incident photons."""
    return (1.0 - d.v_d) * (1.0 - d.eta_d) ** n


def povm_single_click(n: int, d: DetectorParams) -> float:
    """P(1|n): probability of registering exactly one photon."""
    eta, v, rho = d.eta_d, d.v_d, d.rho_d
    signal = sum(eta * (1.0 - eta) ** k * (1.0 - rho * eta) ** (n - 1 - k) for k in range(n))
    return v * (1.0 - rho * eta) ** n + (1.0 - v) * signal


def detection_outcome(stream: RandomStream, n: int, d: DetectorParams) -> Detection:
    """Sample which mechanism, if any, makes the detector click.

    Photons are absorbed independently with probability ``eta_d``; a noise
    count fires with probability ``v_d``.  The no-click probability is
    therefore exactly ``povm_no_click(n, d)``.
    """
    if n < 0:
        raise ValueError("photon count must be non-negative")
    u = stream.random()
    if n >= 1:
        if u < d.eta_d:
            return Detection.SIGNAL
        u -= d.eta_d
        later = (1.0 - d.eta_d) * (1.0 - (1.0 - d.eta_d) ** (n - 1))
        if u < later:
            return Detection.LATER_PHOTON
        u -= later
    if u < d.v_d * (1.0 - d.eta_d) ** n:
        return Detection.NOISE
    return Detection.NONE


def detector_registers(stream: RandomStream, n: int, d: DetectorParams) -> bool:
    return detection_outcome(stream, n, d) is not Detection.NONE


def apply_noise_flip(stream: RandomStream, bit: int, d: DetectorParams) -> int:
    return 1 - bit if stream.random() < d.v_d else bit


# --- state collapse -----------------------------------------------------------

def collapse_measure(stream: RandomStream, incoming_bit: int, incoming_basis: MeasurementBasis,
                     measuring_basis: MeasurementBasis) -> int:
    if stream.random() < same_bit_probability(incoming_basis, measuring_basis):
        return incoming_bit
    return 1 - incoming_bit


def eve_collapse(stream: RandomStream, incoming_bit: int, incoming_basis: MeasurementBasis,
                 bases: BasisSet = EKERT_BASES) -> tuple[int, MeasurementBasis]:
    """Intercept-resend: Eve measures in a random Bob basis and forwards her result."""
    eve_basis = sample_uniform_basis(stream, "bob", bases)
    return collapse_measure(stream, incoming_bit, incoming_basis, eve_basis), eve_basis


# --- one pump slot ---------------------------------------------------------------

def _register(stream: RandomStream, bit: int, n: int, d: DetectorParams) -> Optional[int]:
    outcome = detection_outcome(stream, n, d)
    if outcome is Detection.NONE:
        return None
    if outcome is not Detection.SIGNAL:
        # second-pair photons and noise counts carry no information about the pair
        bit = int(stream.random() < 0.5)
    return apply_noise_flip(stream, bit, d)


def simulate_pair_event(stream: RandomStream, cfg: RunConfig, bases: BasisSet = EKERT_BASES) -> PumpEventRecord:
    """Simulate a pump slot that is known to have produced an entangled pair."""
    src = cfg.source
    alice_basis = sample_uniform_basis(stream, "alice", bases)
    alice_state = int(stream.random() < 0.5)
    n = 2 if stream.random() < src.second_pair_prob else 1

    eve = stream.random() < src.eve_prob
    bob_basis = sample_uniform_basis(stream, "bob", bases)
    if eve:
        eve_bit, eve_basis = eve_collapse(stream, alice_state, alice_basis, bases)
        bob_state = collapse_measure(stream, eve_bit, eve_basis, bob_basis)
    else:
        bob_state = collapse_measure(stream, alice_state, alice_basis, bob_basis)

    alice_bit = _register(stream, alice_state, n, cfg.alice_detector)
    bob_bit = _register(stream, bob_state, n, cfg.bob_detector_params)

    if alice_bit is None or bob_bit is None:
        kind = Classification.LOST
    elif bases.is_same_basis(alice_basis, bob_basis):
        kind = Classification.SAME_BASIS
    else:
        kind = Classification.DIFF_BASIS
    return PumpEventRecord(alice_basis, bob_basis, alice_bit, bob_bit, eve, n, n, kind)


def simulate_pump_event(stream: RandomStream, cfg: RunConfig, bases: BasisSet = EKERT_BASES) -> PumpEventRecord:
    """Simulate a single pump slot, which may or may not emit a pair."""
    if stream.random() >= cfg.source.first_pair_prob:
        return PumpEventRecord(bases.alice[0], bases.bob[0], None, None, False, 0, 0, Classification.NO_PAIR)
    return simulate_pair_event(stream, cfg, bases)


# --- CHSH ---------------------------------------------------------------------------

def estimate_correlation(records: Iterable[PumpEventRecord], a: MeasurementBasis, b: MeasurementBasis) -> float:
    """Empirical ``P11 + P00 - P10 - P01`` over coincidences measured in ``(a, b)``."""
    agree = total = 0
    for r in records:
        if r.alice_basis.label is not a.label or r.bob_basis.label is not b.label:
            continue
        if r.alice_bit is None or r.bob_bit is None:
            continue
        total += 1
        agree += r.alice_bit == r.bob_bit
    if total == 0:
        raise InsufficientStatisticsError(f"no coincidences recorded for bases ({a}, {b})")
    return (2 * agree - total) / total


def cap_s(s: float) -> float:
    if abs(s) > TSIRELSON_BOUND:
        return math.copysign(TSIRELSON_BOUND, s)
    return s


def estimate_s_uncapped(records: Sequence[PumpEventRecord]) -> float:
    return sum(sign * estimate_correlation(records, a, b) for a, b, sign in CHSH_TERMS)


def estimate_s(records: Sequence[PumpEventRecord]) -> float:
    """CHSH statistic from different-basis coincidences, clamped to the Tsirelson bound."""
    return cap_s(estimate_s_uncapped(records))


# --- full bit generation -----------------------------------------------------------------

def run_bit_generation(cfg: RunConfig, stream: RandomStream, bases: BasisSet = EKERT_BASES) -> BitGenResult:
    """Generate raw keys until ``desired_key_length * excess_bit_factor`` sifted bits exist.

    Empty pump slots are skipped in one draw: the gap to the next pair is
    geometric with success probability ``first_pair_prob``.  This is
    distributionally identical to testing each slot and keeps 1 GHz pump runs
    tractable.
    """
    target = required_pump_target(cfg.desired_key_length, cfg.excess_bit_factor)
    p_pair = cfg.source.first_pair_prob
    if p_pair <= 0.0:
        raise PumpLimitExceededError("first_pair_prob is 0: no pairs are ever generated")

    alice_key: list[int] = []
    bob_key: list[int] = []
    diff: list[PumpEventRecord] = []
    counts: Counter = Counter()
    pumps = pairs = 0
    while len(alice_key) < target:
        pumps += int(stream.geometric(p_pair))
        if pumps > cfg.max_pumps:
            raise PumpLimitExceededError(
                f"pump limit {cfg.max_pumps:g} reached with {len(alice_key)}/{target} sifted bits "
                f"({pairs} pairs, {counts[Classification.LOST]} lost)"
            )
        pairs += 1
        rec = simulate_pair_event(stream, cfg, bases)
        counts[rec.classification] += 1
        if rec.eve_intercepted:
            counts["eve"] += 1
        if rec.classification is Classification.SAME_BASIS:
            alice_key.append(rec.alice_bit)
            # same-basis results are anti-correlated; Bob inverts his bit
            bob_key.append(1 - rec.bob_bit)
        elif rec.classification is Classification.DIFF_BASIS:
            diff.append(rec)

    alice = np.array(alice_key, dtype=np.uint8)
    bob = np.array(bob_key, dtype=np.uint8)
    elapsed = pumps / cfg.source.pump_rate
    raw_s = estimate_s_uncapped(diff)
    return BitGenResult(
        alice_raw_key=alice,
        bob_raw_key=bob,
        diff_basis_records=diff,
        raw_key_rate=len(alice) / elapsed,
        raw_qber=float(np.count_nonzero(alice != bob)) / len(alice),
        s_value=cap_s(raw_s),
        elapsed_time=elapsed,
        pump_count=pumps,
        pair_count=pairs,
        coincidence_count=counts[Classification.SAME_BASIS] + counts[Classification.DIFF_BASIS],
        uncapped_s_value=raw_s,
        counters={
            "pairs": pairs,
            "lost": counts[Classification.LOST],
            "same_basis": counts[Classification.SAME_BASIS],
            "diff_basis": counts[Classification.DIFF_BASIS],
            "eve_intercepted": counts["eve"],
        },
    )
