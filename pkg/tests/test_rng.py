import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from icqkd.rng import ROUND_WIDTH, SEED_MAX, derive_seed, round_uniforms, session_generator

seeds = st.integers(0, SEED_MAX)


@given(seed=seeds, start=st.integers(0, 10**12), count=st.integers(0, 20), offset=st.integers(0, 20))
def test_rounds_are_addressable(seed, start, count, offset):
    block = round_uniforms(seed, start, count + offset)
    assert block.shape == (count + offset, ROUND_WIDTH)
    np.testing.assert_array_equal(block[offset:], round_uniforms(seed, start + offset, count))


@given(seed=seeds)
def test_session_streams_disjoint_from_rounds(seed):
    rounds = round_uniforms(seed, 0, 4).ravel()
    tagged = session_generator(seed, 1).random(rounds.size)
    assert not np.intersect1d(rounds, tagged).size


def test_seeds_differ():
    assert not np.array_equal(round_uniforms(1, 0, 3), round_uniforms(2, 0, 3))


@pytest.mark.parametrize("bad", [-1, SEED_MAX + 1])
def test_seed_range(bad):
    with pytest.raises(ValueError):
        round_uniforms(bad, 0, 1)


def test_tags_start_at_one():
    with pytest.raises(ValueError):
        session_generator(0, 0)


@given(seed=seeds, i=st.integers(0, 1000))
def test_derived_seeds(seed, i):
    child = derive_seed(seed, i)
    assert 0 <= child <= SEED_MAX
    assert child == derive_seed(seed, i) != derive_seed(seed, i + 1)
