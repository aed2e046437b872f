import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from tomdmvc.exceptions import ValidationError
from tomdmvc.metrics import (
    accuracy,
    adjusted_rand,
    contingency,
    evaluate,
    nmi,
    pair_counting_prf,
)

labelings = st.integers(2, 12).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 4), min_size=n, max_size=n),
                        st.lists(st.integers(0, 4), min_size=n, max_size=n))
)


def test_identical():
    y = [0, 0, 1, 2, 2]
    assert pair_counting_prf(y, y) == (1.0, 1.0, 1.0)
    assert nmi(y, y) == 1.0 and adjusted_rand(y, y) == 1.0 and accuracy(y, y) == 1.0


def test_one_cluster_vs_singletons():
    assert pair_counting_prf([0] * 4, [0, 1, 2, 3]) == (0.0, 0.0, 0.0)


def test_worked_pair_example():
    f, p, r = pair_counting_prf([0, 0, 1, 1], [0, 0, 0, 1])
    assert (p, r) == (0.5, 1 / 3) and abs(f - 0.4) <= 1e-15
    assert oracles.pair_counts([0, 0, 1, 1], [0, 0, 0, 1])[:3] == (1, 1, 2)


def test_nmi_independent():
    assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == 0.0


def test_nmi_degenerate_conventions():
    assert nmi([0, 0, 0], [1, 1, 1]) == 1.0
    assert nmi([0, 0, 0], [0, 1, 2]) == 0.0


def test_nmi_arithmetic_option():
    p, t = [0, 0, 1, 1, 2], [0, 0, 1, 2, 2]
    assert nmi(p, t, "arithmetic") >= nmi(p, t) - 1e-15
    with pytest.raises(ValueError):
        nmi(p, t, "max")


def test_ari_worked_example():
    p, t = [0, 0, 1, 1], [0, 1, 0, 1]
    assert abs(adjusted_rand(p, t) - oracles.ari_by_permutation(p, t)) <= 1e-12


def test_ari_matches_permutation_expectation(rng):
    for _ in range(40):
        n = int(rng.integers(3, 7))
        p = [int(v) for v in rng.integers(0, 3, n)]
        t = [int(v) for v in rng.integers(0, 3, n)]
        if len(set(p)) < 2 and len(set(t)) < 2:
            continue
        try:
            want = oracles.ari_by_permutation(p, t)
        except ZeroDivisionError:
            continue
        assert abs(adjusted_rand(p, t) - want) <= 1e-12


def test_accuracy_examples():
    assert accuracy([1, 1, 0, 2], [0, 0, 2, 1]) == 1.0
    assert accuracy([0, 0, 0, 0], [0, 0, 1, 1]) == 0.5


def test_length_mismatch():
    for fn in (pair_counting_prf, nmi, adjusted_rand, accuracy):
        with pytest.raises(ValidationError):
            fn([0, 1], [0, 1, 1])


def test_contingency():
    assert contingency(["a", "b", "a"], [1, 1, 2]).tolist() == [[1, 1], [1, 0]]


def test_small_partitions_exhaustive():
    for n in range(2, 5):
        parts = list(oracles.set_partitions(n))
        for p, q in itertools.product(parts, parts):
            got = evaluate(p, q)
            assert abs(got.nmi - oracles.nmi(p, q)) <= 1e-12
            assert abs(got.acc - oracles.acc(p, q)) <= 1e-12
            assert abs(got.ar - oracles.ari(p, q)) <= 1e-12
            f, pr, rc = oracles.prf(p, q)
            assert abs(got.f_score - f) + abs(got.precision - pr) + abs(got.recall - rc) <= 1e-12


def test_partition_counts_are_bell_numbers():
    assert [len(list(oracles.set_partitions(n))) for n in range(1, 7)] == [1, 2, 5, 15, 52, 203]


@given(labelings, st.permutations(range(5)), st.permutations(range(5)))
@settings(max_examples=80)
def test_relabeling_invariance(pair, sigma, pi):
    p, t = pair
    p2 = [sigma[v] for v in p]
    t2 = [pi[v] for v in t]
    a, b = evaluate(p, t).as_dict(), evaluate(p2, t2).as_dict()
    for key in a:
        assert abs(a[key] - b[key]) <= 1e-12


@given(labelings)
@settings(max_examples=80)
def test_ranges_and_identity_bound(pair):
    p, t = pair
    m = evaluate(p, t)
    for key in ("f_score", "precision", "recall", "nmi", "acc"):
        assert 0 <= getattr(m, key) <= 1
    assert -0.5 - 1e-12 <= m.ar <= 1
    assert m.acc >= np.mean(np.array(p) == np.array(t)) - 1e-12
    if m.precision > 0 and m.recall > 0:
        assert abs(m.f_score - 2 * m.precision * m.recall / (m.precision + m.recall)) <= 1e-12


def test_accuracy_beats_random_assignments(rng):
    for _ in range(5):
        table = rng.integers(0, 10, (4, 4))
        pred = np.repeat(np.repeat(np.arange(4), 4), table.ravel())
        truth = np.repeat(np.tile(np.arange(4), 4), table.ravel())
        best = accuracy(pred, truth)
        for _ in range(1000):
            perm = rng.permutation(4)
            assert best >= table[np.arange(4), perm].sum() / table.sum() - 1e-12
