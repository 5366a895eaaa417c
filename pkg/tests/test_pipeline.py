import json
from dataclasses import asdict, replace

import numpy as np
import pytest

from qkdsim.core import TSIRELSON_BOUND, RunConfig
from qkdsim.pipeline import (
    EnsembleSummary,
    LinkBudget,
    TrialError,
    is_eve_detected,
    run_ensemble,
    run_trial,
    run_trial_detailed,
)


def test_ideal_trial(ideal_cfg):
    out = run_trial_detailed(ideal_cfg)
    b = out.budget
    assert not b.eve_detected and not b.discard_recommended
    assert b.raw_qber == 0.0
    assert b.reconciled_corrected_qber == 0.0 and b.reconciled_uncorrected_qber == 0.0
    assert len(out.secret.alice_secret) == 300 and out.secret.keys_match
    assert b.trial_seed == ideal_cfg.seed


def test_stage_length_bookkeeping(ref_cfg):
    out = run_trial_detailed(ref_cfg)
    assert out.bitgen.key_length >= 300 * 2
    assert out.cascade.key_length == out.bitgen.key_length
    assert len(out.secret.alice_secret) == len(out.secret.bob_secret) == 300


def test_budget_fields_are_consistent(ref_cfg):
    out = run_trial_detailed(ref_cfg)
    b, raw, rec = out.budget, out.bitgen, out.cascade
    n = raw.key_length
    assert b.reconciled_corrected_qber == rec.corrected_errors / n
    assert b.reconciled_uncorrected_qber == rec.residual_errors / n
    assert b.reconciled_key_rate == pytest.approx((n - rec.leaked_bits) / raw.elapsed_time)
    assert b.secret_key_rate == pytest.approx(300 / raw.elapsed_time)
    assert b.secret_key_rate <= b.reconciled_key_rate <= b.raw_key_rate
    assert b.reconciled_corrected_qber + b.reconciled_uncorrected_qber == pytest.approx(b.raw_qber)
    assert abs(b.s_value) <= TSIRELSON_BOUND + 1e-12


@pytest.mark.parametrize("s, detected", [(-2.0, True), (1.99, True), (-2.0001, False), (2.5, False)])
def test_eve_detection_rule(s, detected):
    assert is_eve_detected(s) is detected


def test_eve_trial_still_completes(eve_cfg):
    out = run_trial_detailed(eve_cfg)
    assert len(out.secret.alice_secret) == 48
    assert out.budget.eve_detected == (abs(out.budget.s_value) <= 2)


def test_stage_errors_are_labelled():
    cfg = RunConfig(max_pumps=1000)
    with pytest.raises(TrialError) as info:
        run_trial(cfg)
    assert info.value.stage == "bitgen"


def test_ensemble_single_trial_equals_trial(ref_cfg):
    summary = run_ensemble(ref_cfg, 1)
    single = run_trial(ref_cfg)
    assert summary.trials == [single]
    assert summary.stats["s_value"].mean == single.s_value
    assert summary.stats["s_value"].std == 0.0
    assert summary.eve_detection_rate == float(single.eve_detected)


def test_ensemble_child_seeds(ref_cfg):
    cfg = replace(ref_cfg, desired_key_length=40, seed=100)
    summary = run_ensemble(cfg, 4)
    assert [t.trial_seed for t in summary.trials] == [100, 101, 102, 103]
    assert summary.trials[2] == run_trial(replace(cfg, seed=102))


def test_ensemble_determinism_and_consistency(eve_cfg):
    a = run_ensemble(eve_cfg, 6)
    b = run_ensemble(eve_cfg, 6)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    assert a.is_consistent()


def test_ensemble_parallel_matches_serial(ref_cfg):
    cfg = replace(ref_cfg, desired_key_length=60)
    serial = run_ensemble(cfg, 4, jobs=1)
    parallel = run_ensemble(cfg, 4, jobs=2)
    assert serial.to_dict() == parallel.to_dict()


def test_ensemble_records_failures(ref_cfg):
    cfg = replace(ref_cfg, max_pumps=10_000)
    summary = run_ensemble(cfg, 3)
    assert summary.n_completed == 0
    assert [f.trial_index for f in summary.failures] == [0, 1, 2]
    assert all(f.stage == "bitgen" for f in summary.failures)
    assert np.isnan(summary.eve_detection_rate)


def test_summary_detects_tampering(eve_cfg):
    summary = run_ensemble(eve_cfg, 3)
    summary.trials[0] = replace(summary.trials[0], raw_qber=0.99)
    assert not summary.is_consistent()


def test_summary_from_trials_stats():
    t = [LinkBudget(-2.5, 0.05, 0.05, 0.0, 600.0, 500.0, 300.0, 1.0, False, 1),
         LinkBudget(-1.5, 0.25, 0.2, 0.05, 400.0, 200.0, 100.0, 2.0, True, 2)]
    s = EnsembleSummary.from_trials(t, [0, 1])
    assert s.stats["raw_qber"].mean == pytest.approx(0.15)
    assert s.stats["raw_qber"].std == pytest.approx(0.10)
    assert (s.stats["s_value"].min, s.stats["s_value"].max) == (-2.5, -1.5)
    assert s.abs_s.mean == pytest.approx(2.0)
    assert s.eve_detection_rate == 0.5
    assert asdict(s.stats["elapsed_time"]) == {"mean": 1.5, "std": 0.5, "min": 1.0, "max": 2.0}


def test_ensemble_rejects_zero_trials(ref_cfg):
    with pytest.raises(ValueError):
        run_ensemble(ref_cfg, 0)
