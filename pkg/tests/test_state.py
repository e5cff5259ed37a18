import math

import numpy as np
import pytest

from affinet.domain import Geometry, torus_distance
from affinet.errors import EmptySystemError, MissingParticleError, UnsupportedRadiusError
from affinet.kernels import LocalAffinity
from affinet.state import SystemState


def make_state(positions=(), cell_side=0.1):
    return SystemState.from_positions(
        np.asarray(positions, dtype=np.float64).reshape(-1, 2), cell_side=cell_side,
        affinity=LocalAffinity(A_f=1.0, a_f=0.1),
    )


def brute_force_neighbors(state, y, r):
    d = torus_distance(state.positions, np.asarray(y))
    return sorted(int(state.ids[i]) for i in np.flatnonzero(d <= r))


def test_insert_counts():
    s = make_state()
    s.insert([0.5, 0.5])
    assert s.size == 1


def test_duplicate_positions_are_multiset():
    s = make_state()
    a = s.insert([0.25, 0.25])
    b = s.insert([0.25, 0.25])
    assert s.size == 2 and a != b


def test_insert_is_queryable():
    s = make_state()
    pid = s.insert([0.42, 0.17])
    assert pid in s.neighbors_within([0.42, 0.17], 0.1)


def test_remove_inverse():
    s = make_state()
    pid = s.insert([0.3, 0.3])
    s.remove(pid)
    assert s.size == 0


def test_remove_unknown_raises():
    s = make_state([[0.1, 0.1]])
    with pytest.raises(MissingParticleError):
        s.remove(12345)


def test_remove_preserves_other_queries():
    s = make_state([[0.2, 0.2], [0.24, 0.2], [0.7, 0.7]])
    before = s.neighbors_within([0.22, 0.2], 0.1)
    s.remove(2)
    after = s.neighbors_within([0.22, 0.2], 0.1)
    assert sorted(before) == sorted(after) == [0, 1]


def test_uniform_particle_degenerate():
    s = make_state([[0.5, 0.5]])
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert s.uniform_particle(rng).id == 0


def test_uniform_particle_frequencies():
    s = make_state([[0.1, 0.1], [0.5, 0.5], [0.9, 0.9]])
    rng = np.random.default_rng(42)
    draws = 300_000
    counts = np.zeros(3)
    for _ in range(draws):
        counts[s.uniform_particle(rng).id] += 1
    expected = draws / 3
    sigma = math.sqrt(draws * (1 / 3) * (2 / 3))
    assert np.all(np.abs(counts - expected) < 5 * sigma)


def test_uniform_particle_empty_raises():
    with pytest.raises(EmptySystemError):
        make_state().uniform_particle(np.random.default_rng(0))


def test_neighbors_examples():
    s = make_state([[0.55, 0.5], [0.7, 0.5]])  # distances 0.05 and 0.2 from y
    assert s.neighbors_within([0.5, 0.5], 0.1) == [0]


def test_neighbors_includes_coincident():
    s = make_state([[0.5, 0.5]])
    assert s.neighbors_within([0.5, 0.5], 0.1) == [0]


def test_neighbors_radius_guard():
    s = make_state([[0.5, 0.5]])
    with pytest.raises(UnsupportedRadiusError):
        s.neighbors_within([0.5, 0.5], 0.2)


def test_neighbors_match_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = rng.integers(1, 40)
        s = make_state(rng.random((n, 2)))
        y = rng.random(2)
        r = float(rng.uniform(0.01, 0.1))
        assert sorted(s.neighbors_within(y, r)) == brute_force_neighbors(s, y, r)


def test_index_coherent_under_churn():
    rng = np.random.default_rng(99)
    s = make_state(rng.random((50, 2)))
    alive = list(range(50))
    next_expected = 50
    for _ in range(10_000):
        if alive and rng.random() < 0.5:
            victim = alive.pop(int(rng.random() * len(alive)))
            s.remove(victim)
        else:
            alive.append(s.insert(rng.random(2)))
            next_expected += 1
    assert s.size == len(alive)
    for _ in range(50):
        y = rng.random(2)
        assert sorted(s.neighbors_within(y, 0.1)) == brute_force_neighbors(s, y, 0.1)


def test_affinity_field_examples():
    s = make_state()
    assert s.affinity_field([0.5, 0.5]) == 0.0
    s.insert([0.55, 0.5])
    assert s.affinity_field([0.5, 0.5]) == pytest.approx(0.5)
    s2 = make_state([[0.525, 0.5], [0.55, 0.5]])
    assert s2.affinity_field([0.5, 0.5]) == pytest.approx(1.25)


def test_affinity_field_bounded(rng):
    s = make_state(rng.random((200, 2)))
    for _ in range(100):
        y = rng.random(2)
        assert s.affinity_field(y) <= 1.0 * s.size


def test_ids_never_reused():
    s = make_state([[0.1, 0.1]])
    s.remove(0)
    assert s.insert([0.2, 0.2]) == 1


def test_copy_is_independent():
    s = make_state([[0.1, 0.1], [0.2, 0.2]])
    dup = s.copy()
    s.remove(0)
    assert dup.size == 2 and s.size == 1
    assert sorted(dup.neighbors_within([0.1, 0.1], 0.05)) == [0]


def test_snapshot_dict_roundtrip():
    s = make_state([[0.1, 0.2]])
    s.time = 3.5
    s.beta_current = 1.25
    doc = s.snapshot_dict()
    assert doc["N"] == 1 and doc["time"] == 3.5 and doc["beta_current"] == 1.25
    assert doc["particles"][0]["pos"] == [0.1, 0.2]


def test_small_torus_index_wraps():
    geo = Geometry(side=0.25)
    s = SystemState.from_positions(
        np.array([[0.01, 0.01], [0.24, 0.24]]), geometry=geo, cell_side=0.1
    )
    # wrap-around distance sqrt(0.02^2 + 0.02^2) ~ 0.028
    assert sorted(s.neighbors_within([0.0, 0.0], 0.05)) == [0, 1]
