import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluxladder.basis import (
    SectorBasis,
    SiteIndex,
    enumerate_sector,
    hop,
    popcount,
    raise_lower,
)


def test_site_index_flat_map():
    assert SiteIndex(1, 1).flat == 0
    assert SiteIndex(1, 2).flat == 1
    assert SiteIndex(2, 1).flat == 2
    assert SiteIndex(5, 2).flat == 9
    for k in range(14):
        assert SiteIndex.from_flat(k).flat == k


def test_site_index_validation():
    with pytest.raises(ValueError):
        SiteIndex(0, 1)
    with pytest.raises(ValueError):
        SiteIndex(1, 3)


def test_enumerate_small():
    b = enumerate_sector(1, 1)
    assert list(b.states) == [0b01, 0b10]
    assert enumerate_sector(7, 7).dimension == 3432
    assert enumerate_sector(10, 2).dimension == 190


def test_enumerate_validation():
    with pytest.raises(ValueError):
        enumerate_sector(0, 0)
    with pytest.raises(ValueError):
        enumerate_sector(2, 5)
    with pytest.raises(ValueError):
        enumerate_sector(2, -1)


@pytest.mark.parametrize("L", range(1, 8))
def test_sectors_partition_full_space(L):
    total = sum(enumerate_sector(L, N).dimension for N in range(2 * L + 1))
    assert total == 4**L


@given(L=st.integers(1, 7), data=st.data())
@settings(max_examples=40, deadline=None)
def test_rank_unrank_roundtrip(L, data):
    N = data.draw(st.integers(0, 2 * L))
    b = enumerate_sector(L, N)
    i = data.draw(st.integers(0, b.dimension - 1))
    assert b.rank_of(int(b.states[i])) == i


@pytest.mark.parametrize("L,N", [(3, 2), (4, 4), (7, 7)])
def test_states_sorted_and_weighted(L, N):
    b = enumerate_sector(L, N)
    assert (np.diff(b.states.astype(np.int64)) > 0).all()
    assert (popcount(b.states) == N).all()


def test_enumeration_deterministic():
    a = enumerate_sector(5, 4).states
    b = enumerate_sector(5, 4).states
    assert (a == b).all()


def test_hop_rules():
    s0, s1 = SiteIndex(1, 1), SiteIndex(1, 2)
    assert hop(0b01, s0, s1) == (0b10, True)
    assert hop(0b11, s0, s1) == (0b11, False)   # target occupied
    assert hop(0b00, s0, s1) == (0b00, False)   # source empty
    with pytest.raises(ValueError):
        hop(0b01, s0, s0)


@given(word=st.integers(0, 2**14 - 1), u=st.integers(0, 13), v=st.integers(0, 13))
@settings(max_examples=200, deadline=None)
def test_hop_conserves_population(word, u, v):
    if u == v:
        return
    new, ok = hop(word, SiteIndex.from_flat(u), SiteIndex.from_flat(v))
    if ok:
        assert int(popcount(new)) == int(popcount(word))
        assert new != word
    else:
        assert new == word


def test_raise_lower_rules():
    s = SiteIndex(1, 1)
    assert raise_lower(0b1, s, "annihilate") == (0b0, True)
    assert raise_lower(0b1, s, "create") == (0b1, False)   # hardcore
    assert raise_lower(0b0, s, "create") == (0b1, True)
    with pytest.raises(ValueError):
        raise_lower(0b0, s, "sideways")


@given(word=st.integers(0, 2**10 - 1), k=st.integers(0, 9),
       direction=st.sampled_from(["create", "annihilate"]))
@settings(max_examples=200, deadline=None)
def test_raise_lower_changes_population_by_one(word, k, direction):
    new, ok = raise_lower(word, SiteIndex.from_flat(k), direction)
    if ok:
        delta = int(popcount(new)) - int(popcount(word))
        assert delta == (1 if direction == "create" else -1)
        assert bin(new ^ word).count("1") == 1
