from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qkdsim.cascade import (
    binary_parity_correct,
    cascade_iteration,
    initial_block_size,
    next_block_size,
    run_cascade,
    shuffle_in_unison,
)
from qkdsim.core import make_stream


def bits(text):
    return np.array([int(c) for c in text], dtype=np.uint8)


def noisy_pair(rng, n, n_errors):
    alice = rng.integers(0, 2, n).astype(np.uint8)
    bob = alice.copy()
    bob[rng.choice(n, n_errors, replace=False)] ^= 1
    return alice, bob


@pytest.mark.parametrize("qber, expected", [(0.05, 15), (0.73, 2), (0.01, 73), (0.5, 2), (0.1, 7)])
def test_initial_block_size(qber, expected):
    assert initial_block_size(qber, 600) == expected


def test_initial_block_size_edges():
    assert initial_block_size(0.0, 600) == 600
    assert initial_block_size(0.001, 600) == 600
    with pytest.raises(ValueError):
        initial_block_size(-0.1, 600)


def test_next_block_size():
    assert next_block_size(15, 600) == 30
    assert next_block_size(400, 600) == 600
    assert next_block_size(2, 600) == 4


def test_binary_parity_correct_examples():
    fixed = binary_parity_correct(bits("1010"), bits("1010"))
    assert fixed.corrections == 0 and fixed.parities == 1
    fixed = binary_parity_correct(bits("1010"), bits("1000"))
    assert fixed.corrections == 1
    assert np.array_equal(fixed.bob_block, bits("1010"))
    fixed = binary_parity_correct(bits("1010"), bits("0000"))
    assert fixed.corrections == 0
    assert np.array_equal(fixed.bob_block, bits("0000"))


def test_binary_parity_correct_does_not_mutate_input():
    bob = bits("1000")
    binary_parity_correct(bits("1010"), bob)
    assert np.array_equal(bob, bits("1000"))


@pytest.mark.parametrize("size", range(1, 65))
def test_single_error_found_at_every_position(size):
    rng = make_stream(size)
    alice = rng.integers(0, 2, size).astype(np.uint8)
    for pos in range(size):
        bob = alice.copy()
        bob[pos] ^= 1
        fixed = binary_parity_correct(alice, bob)
        assert fixed.corrections == 1
        assert np.array_equal(fixed.bob_block, alice)
        # one block parity plus one per halving, plus the base-case bit
        assert fixed.parities <= 2 + int(np.ceil(np.log2(max(size, 2))))


@given(st.integers(2, 64).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n))))
def test_binary_parity_correct_never_adds_errors(pair):
    alice, bob = map(lambda x: np.array(x, dtype=np.uint8), pair)
    before = np.count_nonzero(alice != bob)
    fixed = binary_parity_correct(alice, bob)
    after = np.count_nonzero(alice != fixed.bob_block)
    assert after == before - fixed.corrections
    assert fixed.corrections == before % 2


def test_cascade_iteration_examples():
    rng = make_stream(0)
    alice = rng.integers(0, 2, 100).astype(np.uint8)
    step = cascade_iteration(alice, alice, 15)
    assert step.corrections == 0
    assert step.parities == 7  # ceil(100 / 15) blocks

    bob = alice.copy()
    bob[42] ^= 1
    step = cascade_iteration(alice, bob, 15)
    assert step.corrections == 1
    assert np.array_equal(step.bob_key, alice)

    bob = alice.copy()
    bob[[30, 33]] ^= 1  # both inside block [30, 45)
    step = cascade_iteration(alice, bob, 15)
    assert step.corrections == 0


def test_shuffle_in_unison_keeps_error_pattern():
    rng = make_stream(3)
    alice, bob = noisy_pair(rng, 200, 17)
    a2, b2 = shuffle_in_unison(rng, alice, bob)
    assert np.count_nonzero(a2 != b2) == 17
    assert sorted(a2) == sorted(alice)


def test_shuffle_in_unison_determinism():
    alice, bob = noisy_pair(make_stream(1), 50, 5)
    x = shuffle_in_unison(make_stream(8), alice, bob)
    y = shuffle_in_unison(make_stream(8), alice, bob)
    assert all(np.array_equal(p, q) for p, q in zip(x, y))


def test_shuffle_uniform_over_permutations():
    rng = make_stream(2024)
    key = np.arange(4, dtype=np.uint8)
    index = {p: i for i, p in enumerate(permutations(range(4)))}
    counts = np.zeros(24, dtype=int)
    for _ in range(100_000):
        a, b = shuffle_in_unison(rng, key, key)
        assert np.array_equal(a, b)
        counts[index[tuple(int(x) for x in a)]] += 1
    assert stats.chisquare(counts).pvalue > 0.01


def test_run_cascade_identical_keys():
    alice = make_stream(0).integers(0, 2, 300).astype(np.uint8)
    res = run_cascade(alice, alice.copy(), 4, 0.03, make_stream(1))
    assert res.corrected_errors == 0 and res.residual_errors == 0 and res.leaked_bits == 0
    assert np.array_equal(res.alice_key, res.bob_key)


@pytest.mark.parametrize("trace_back", [True, False])
def test_run_cascade_invariants(trace_back):
    for seed in range(30):
        rng = make_stream(seed)
        n_err = int(rng.integers(0, 60))
        alice, bob = noisy_pair(rng, 600, n_err)
        res = run_cascade(alice, bob, 4, max(n_err, 1) / 600, rng, trace_back=trace_back)
        assert len(res.alice_key) == len(res.bob_key) == 600
        assert np.array_equal(res.alice_key, alice)
        assert res.corrected_errors + res.residual_errors == n_err == res.initial_errors
        assert res.leaked_bits == 2 * res.corrected_errors >= 0
        assert res.leaked_parities >= res.corrected_errors
        assert list(res.residual_after_iteration) == sorted(res.residual_after_iteration, reverse=True)
        assert res.residual_after_iteration[-1] == res.residual_errors


def test_block_sizes_follow_doubling_schedule():
    alice, bob = noisy_pair(make_stream(4), 600, 30)
    res = run_cascade(alice, bob, 4, 0.05, make_stream(5))
    assert res.block_sizes == (15, 30, 60, 120)
    res = run_cascade(alice, bob, 6, 0.005, make_stream(5))
    assert res.block_sizes == (146, 292, 584, 600, 600, 600)


def test_run_cascade_determinism():
    alice, bob = noisy_pair(make_stream(6), 600, 25)
    x = run_cascade(alice, bob, 4, 25 / 600, make_stream(7))
    y = run_cascade(alice, bob, 4, 25 / 600, make_stream(7))
    assert np.array_equal(x.bob_key, y.bob_key)
    assert (x.leaked_bits, x.leaked_parities, x.residual_errors) == (y.leaked_bits, y.leaked_parities, y.residual_errors)


def test_trace_back_beats_forward_only():
    def failures(trace_back):
        bad = 0
        for seed in range(60):
            rng = make_stream(500 + seed)
            alice, bob = noisy_pair(rng, 600, 18)
            bad += run_cascade(alice, bob, 4, 0.03, rng, trace_back=trace_back).residual_errors > 0
        return bad

    assert failures(True) < failures(False)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.integers(20, 400), st.floats(0.0, 0.2))
def test_run_cascade_property(seed, n, qber):
    rng = make_stream(seed)
    n_err = int(round(qber * n))
    alice, bob = noisy_pair(rng, n, n_err)
    res = run_cascade(alice, bob, 4, qber, rng)
    assert res.corrected_errors + res.residual_errors == n_err
    assert np.count_nonzero(res.alice_key != res.bob_key) == res.residual_errors
