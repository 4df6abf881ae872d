import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from txembed import _rng
from txembed.alias import AliasTable, expand_alias


def test_expansion_is_exact_for_simple_vector():
    t = AliasTable.from_probs([0.2, 0.3, 0.5])
    np.testing.assert_allclose(t.expand(), [0.2, 0.3, 0.5], atol=1e-15)


def test_unnormalized_input_is_normalized():
    np.testing.assert_allclose(AliasTable.from_probs([1, 1, 2]).expand(), [0.25, 0.25, 0.5],
                               atol=1e-15)


@pytest.mark.parametrize("bad", [[], [0, 0], [-1, 2], [np.nan, 1], [[0.5, 0.5]]])
def test_rejects_bad_vectors(bad):
    with pytest.raises(ValueError):
        AliasTable.from_probs(bad)


def test_sampling_is_seeded():
    t = AliasTable.from_probs(np.arange(1, 11))
    assert np.array_equal(t.sample(1000, 3), t.sample(1000, 3))
    assert not np.array_equal(t.sample(1000, 3), t.sample(1000, 4))


def test_chi_square_small_fixture():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    counts = np.bincount(AliasTable.from_probs(p).sample(200_000, 1), minlength=4)
    assert stats.chisquare(counts, p * counts.sum()).pvalue > 1e-6


def test_uniform_draws_are_in_range():
    s = _rng.stream(5)
    from txembed.alias import _draw_many
    t = AliasTable.from_probs(np.ones(7))
    out = _draw_many(t.prob, t.alias, 10_000, s)
    assert out.min() == 0 and out.max() == 6


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=64).filter(lambda v: sum(v) > 0))
def test_expansion_matches_input(weights):
    p = np.asarray(weights) / np.sum(weights)
    t = AliasTable.from_probs(weights)
    assert np.all((t.prob >= 0) & (t.prob <= 1 + 1e-12))
    assert np.all((t.alias >= 0) & (t.alias < len(p)))
    np.testing.assert_allclose(expand_alias(t.prob, t.alias), p, atol=1e-12)
