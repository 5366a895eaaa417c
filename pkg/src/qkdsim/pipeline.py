"""Trial orchestration: bit generation, Cascade, ParityHash, link budget.

``run_trial`` chains the three stages on one random stream.  ``run_ensemble``
repeats it with child seeds ``seed + i`` and reduces the per-trial budgets in
trial order, so the summary does not depend on worker scheduling.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .bitgen import BitGenResult, run_bit_generation
from .cascade import CascadeResult, run_cascade
from .core import CLASSICAL_LIMIT, QKDSimError, RunConfig, child_seed, make_stream
from .parityhash import SecretKeyResult, run_privacy_amplification

STATISTICS = (
    "s_value",
    "raw_qber",
    "reconciled_corrected_qber",
    "reconciled_uncorrected_qber",
    "raw_key_rate",
    "reconciled_key_rate",
    "secret_key_rate",
    "elapsed_time",
)


@dataclass(frozen=True)
class LinkBudget:
    s_value: float
    raw_qber: float
    reconciled_corrected_qber: float
    reconciled_uncorrected_qber: float
    raw_key_rate: float
    reconciled_key_rate: float
    secret_key_rate: float
    elapsed_time: float
    eve_detected: bool
    trial_seed: int

    @property
    def discard_recommended(self) -> bool:
        """CHSH shows no violation, so the key should not be used."""
        return self.eve_detected


@dataclass
class TrialOutcome:
    """Everything one trial produced; ``budget`` is the reported summary."""

    budget: LinkBudget
    bitgen: BitGenResult
    cascade: CascadeResult
    secret: SecretKeyResult


class TrialError(QKDSimError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message


@dataclass(frozen=True)
class FailedTrial:
    trial_index: int
    seed: int
    stage: str
    message: str


@dataclass(frozen=True)
class StatSummary:
    mean: float
    std: float
    min: float
    max: float

    @classmethod
    def of(cls, values) -> "StatSummary":
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            nan = float("nan")
            return cls(nan, nan, nan, nan)
        return cls(float(arr.mean()), float(arr.std()), float(arr.min()), float(arr.max()))


@dataclass
class EnsembleSummary:
    trials: list[LinkBudget]
    trial_indices: list[int]
    failures: list[FailedTrial] = field(default_factory=list)
    stats: dict[str, StatSummary] = field(default_factory=dict)
    abs_s: Optional[StatSummary] = None
    eve_detection_rate: float = float("nan")

    @classmethod
    def from_trials(cls, trials: list[LinkBudget], trial_indices: list[int],
                    failures: Optional[list[FailedTrial]] = None) -> "EnsembleSummary":
        stats = {name: StatSummary.of([getattr(t, name) for t in trials]) for name in STATISTICS}
        rate = float(np.mean([t.eve_detected for t in trials])) if trials else float("nan")
        return cls(
            trials=list(trials),
            trial_indices=list(trial_indices),
            failures=list(failures or []),
            stats=stats,
            abs_s=StatSummary.of([abs(t.s_value) for t in trials]),
            eve_detection_rate=rate,
        )

    @property
    def n_completed(self) -> int:
        return len(self.trials)

    def is_consistent(self) -> bool:
        """Recompute the aggregate statistics from the per-trial list and compare."""
        again = EnsembleSummary.from_trials(self.trials, self.trial_indices, self.failures)
        return _same(asdict(again), asdict(self))

    def to_dict(self) -> dict:
        return {
            "trials": [dict(trial_index=i, **asdict(t)) for i, t in zip(self.trial_indices, self.trials)],
            "failures": [asdict(f) for f in self.failures],
            "summary": {
                "completed": self.n_completed,
                "failed": len(self.failures),
                "eve_detection_rate": self.eve_detection_rate,
                "abs_s_value": asdict(self.abs_s) if self.abs_s else None,
                **{name: asdict(s) for name, s in self.stats.items()},
            },
        }


def _same(a, b) -> bool:
    if isinstance(a, float) and isinstance(b, float):
        return a == b or (math.isnan(a) and math.isnan(b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_same(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return a == b


def is_eve_detected(s_value: float) -> bool:
    """No CHSH violation: ``|S| <= 2``."""
    return abs(s_value) <= CLASSICAL_LIMIT


def run_trial_detailed(cfg: RunConfig) -> TrialOutcome:
    stream = make_stream(cfg.seed)
    try:
        raw = run_bit_generation(cfg, stream)
    except QKDSimError as exc:
        raise TrialError("bitgen", str(exc)) from exc

    try:
        rec = run_cascade(raw.alice_raw_key, raw.bob_raw_key, cfg.cascade_iterations, raw.raw_qber,
                          stream, trace_back=cfg.cascade_trace_back)
    except (QKDSimError, ValueError) as exc:
        raise TrialError("reconcile", str(exc)) from exc

    try:
        secret = run_privacy_amplification(rec.alice_key, rec.bob_key, cfg.desired_key_length,
                                           raw.elapsed_time)
    except (QKDSimError, ValueError) as exc:
        raise TrialError("privacy", str(exc)) from exc

    n = rec.key_length
    t = raw.elapsed_time
    budget = LinkBudget(
        s_value=raw.s_value,
        raw_qber=raw.raw_qber,
        reconciled_corrected_qber=rec.corrected_errors / n,
        reconciled_uncorrected_qber=rec.residual_errors / n,
        raw_key_rate=raw.raw_key_rate,
        # leakage can exceed the key at very high error rates; the rate floors at zero
        reconciled_key_rate=max(n - rec.leaked_bits, 0) / t,
        secret_key_rate=secret.secret_key_rate,
        elapsed_time=t,
        eve_detected=is_eve_detected(raw.s_value),
        trial_seed=cfg.seed,
    )
    return TrialOutcome(budget, raw, rec, secret)


def run_trial(cfg: RunConfig) -> LinkBudget:
    return run_trial_detailed(cfg).budget


def _ensemble_member(args: tuple[RunConfig, int]) -> Union[LinkBudget, FailedTrial]:
    cfg, index = args
    seed = child_seed(cfg.seed, index)
    try:
        return run_trial(replace(cfg, seed=seed))
    except TrialError as exc:
        return FailedTrial(index, seed, exc.stage, exc.message)


def run_ensemble(cfg: RunConfig, trials: int, jobs: int = 1) -> EnsembleSummary:
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    work = [(cfg, i) for i in range(trials)]
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_ensemble_member, work))
    else:
        results = [_ensemble_member(w) for w in work]

    budgets, indices, failures = [], [], []
    for i, r in enumerate(results):
        if isinstance(r, FailedTrial):
            failures.append(r)
        else:
            budgets.append(r)
            indices.append(i)
    return EnsembleSummary.from_trials(budgets, indices, failures)
