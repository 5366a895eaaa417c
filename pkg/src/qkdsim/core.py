"""Shared domain types, configuration records and the seeded random stream.

Every stochastic routine in the package draws from a ``numpy.random.Generator``
backed by PCG64.  One generator drives one trial; ensemble members use the
child seed ``seed + trial_index`` (wrapped to 64 bits).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

RandomStream = np.random.Generator

SEED_MASK = (1 << 64) - 1
TSIRELSON_BOUND = 2.0 * math.sqrt(2.0)
CLASSICAL_LIMIT = 2.0
#: Average number of coincident measurements spent per sifted key bit (1 / P_same).
EXPECTED_MEASUREMENTS_PER_SIFTED_BIT = 9.0 / 2.0


class QKDSimError(Exception):
    """Base error.  ``stage`` names the pipeline stage that raised it."""

    stage = "core"


class InsufficientStatisticsError(QKDSimError):
    stage = "bitgen"


class PumpLimitExceededError(QKDSimError):
    stage = "bitgen"


class KeyTooShortError(QKDSimError, ValueError):
    stage = "privacy"


def make_stream(seed: int) -> RandomStream:
    """PCG64 generator for ``seed`` (reduced modulo 2**64)."""
    return np.random.Generator(np.random.PCG64(int(seed) & SEED_MASK))


def child_seed(seed: int, trial_index: int) -> int:
    return (int(seed) + int(trial_index)) & SEED_MASK


class BasisLabel(enum.Enum):
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    B1 = "B1"
    B2 = "B2"
    B3 = "B3"

    @property
    def side(self) -> str:
        return "alice" if self.value[0] == "A" else "bob"


@dataclass(frozen=True)
class MeasurementBasis:
    """Polarization basis given by the angle of its ``|0>`` state from horizontal."""

    label: BasisLabel
    angle: float

    def __post_init__(self):
        if not 0.0 <= self.angle < math.pi:
            raise ValueError(f"basis angle must lie in [0, pi), got {self.angle!r}")

    def __str__(self) -> str:
        return self.label.value


def unit_vector(basis: MeasurementBasis) -> np.ndarray:
    return np.array([math.cos(basis.angle), math.sin(basis.angle)])


A1 = MeasurementBasis(BasisLabel.A1, 0.0)
A2 = MeasurementBasis(BasisLabel.A2, math.pi / 4)
A3 = MeasurementBasis(BasisLabel.A3, math.pi / 2)
B1 = MeasurementBasis(BasisLabel.B1, math.pi / 4)
B2 = MeasurementBasis(BasisLabel.B2, math.pi / 2)
B3 = MeasurementBasis(BasisLabel.B3, 3 * math.pi / 4)


@dataclass(frozen=True)
class BasisSet:
    """Alice's and Bob's three measurement bases.

    The default is the Ekert configuration; the key-bearing pairs are
    ``(A2, B1)`` and ``(A3, B2)``.
    """

    alice: tuple[MeasurementBasis, ...] = (A1, A2, A3)
    bob: tuple[MeasurementBasis, ...] = (B1, B2, B3)

    def __post_init__(self):
        if len(self.alice) != 3 or len(self.bob) != 3:
            raise ValueError("each side needs exactly three bases")
        if any(b.label.side != "alice" for b in self.alice):
            raise ValueError("alice bases must carry A* labels")
        if any(b.label.side != "bob" for b in self.bob):
            raise ValueError("bob bases must carry B* labels")

    @property
    def same_basis_pairs(self) -> frozenset[tuple[BasisLabel, BasisLabel]]:
        return frozenset({(BasisLabel.A2, BasisLabel.B1), (BasisLabel.A3, BasisLabel.B2)})

    def is_same_basis(self, a: MeasurementBasis, b: MeasurementBasis) -> bool:
        return (a.label, b.label) in self.same_basis_pairs

    def side(self, side: str) -> tuple[MeasurementBasis, ...]:
        if side == "alice":
            return self.alice
        if side == "bob":
            return self.bob
        raise ValueError(f"side must be 'alice' or 'bob', got {side!r}")

    def by_label(self, label: BasisLabel) -> MeasurementBasis:
        for basis in self.alice + self.bob:
            if basis.label is label:
                return basis
        raise KeyError(label)


EKERT_BASES = BasisSet()


def sample_uniform_basis(stream: RandomStream, side: str, bases: BasisSet = EKERT_BASES) -> MeasurementBasis:
    choices = bases.side(side)
    # floor(3u) with u in [0, 1) is uniform over {0, 1, 2}
    return choices[int(stream.random() * 3)]


def _check_probability(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
        raise ValueError(f"{name} must be a probability in [0, 1], got {value!r}")


@dataclass(frozen=True)
class SourceParams:
    """Pumped SPDC source plus the per-pair interception probability."""

    pump_rate: float = 1e9
    first_pair_prob: float = 4e-6
    second_pair_prob: float = 1 / 3
    eve_prob: float = 0.0

    def __post_init__(self):
        if not self.pump_rate > 0:
            raise ValueError(f"pump_rate must be positive, got {self.pump_rate!r}")
        _check_probability("first_pair_prob", self.first_pair_prob)
        _check_probability("second_pair_prob", self.second_pair_prob)
        _check_probability("eve_prob", self.eve_prob)


@dataclass(frozen=True)
class DetectorParams:
    """Detector POVM parameters: efficiency, noise-count probability, PNR quality."""

    eta_d: float = 0.8
    v_d: float = 2e-4
    rho_d: float = 0.8

    def __post_init__(self):
        _check_probability("eta_d", self.eta_d)
        _check_probability("v_d", self.v_d)
        _check_probability("rho_d", self.rho_d)


@dataclass(frozen=True)
class RunConfig:
    desired_key_length: int = 300
    excess_bit_factor: float = 2.0
    cascade_iterations: int = 4
    source: SourceParams = field(default_factory=SourceParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    seed: int = 0
    #: Optional override for Bob's detector; ``None`` means both sides use ``detector``.
    bob_detector: Optional[DetectorParams] = None
    max_pumps: int = 10**10
    #: Re-open earlier Cascade passes after each correction.
    cascade_trace_back: bool = True

    def __post_init__(self):
        if int(self.desired_key_length) != self.desired_key_length or self.desired_key_length < 1:
            raise ValueError(f"desired_key_length must be an integer >= 1, got {self.desired_key_length!r}")
        if not self.excess_bit_factor >= 1:
            raise ValueError(f"excess_bit_factor must be >= 1, got {self.excess_bit_factor!r}")
        if int(self.cascade_iterations) != self.cascade_iterations or self.cascade_iterations < 1:
            raise ValueError(f"cascade_iterations must be an integer >= 1, got {self.cascade_iterations!r}")
        if not 0 <= int(self.seed) <= SEED_MASK:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not self.max_pumps >= 1:
            raise ValueError(f"max_pumps must be >= 1, got {self.max_pumps!r}")

    @property
    def alice_detector(self) -> DetectorParams:
        return self.detector

    @property
    def bob_detector_params(self) -> DetectorParams:
        return self.bob_detector if self.bob_detector is not None else self.detector
