import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affinet.domain import Geometry, Params, torus_distance, torus_wrap, validate_params
from affinet.errors import InvalidPositionError, ValidationError

finite_coord = st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False)


def test_wrap_examples():
    np.testing.assert_allclose(torus_wrap([1.05, 0.5]), [0.05, 0.5], atol=1e-12)
    np.testing.assert_allclose(torus_wrap([-0.1, 0.2]), [0.9, 0.2], atol=1e-12)
    np.testing.assert_array_equal(torus_wrap([0.3, 0.7]), [0.3, 0.7])


def test_wrap_rejects_non_finite():
    with pytest.raises(InvalidPositionError):
        torus_wrap([math.nan, 0.5])
    with pytest.raises(InvalidPositionError):
        torus_wrap([math.inf, 0.0])


def test_wrap_stays_in_range_for_tiny_negatives():
    out = torus_wrap([-1e-20, 0.0])
    assert 0.0 <= out[0] < 1.0


@given(st.lists(finite_coord, min_size=2, max_size=2))
def test_wrap_idempotent(coords):
    once = torus_wrap(coords)
    twice = torus_wrap(once)
    np.testing.assert_array_equal(once, twice)
    assert np.all(once >= 0) and np.all(once < 1.0)


def test_distance_examples():
    assert torus_distance([0.95, 0.5], [0.05, 0.5]) == pytest.approx(0.1, abs=1e-12)
    assert torus_distance([0.2, 0.2], [0.2, 0.2]) == 0.0
    assert torus_distance([0.0, 0.0], [0.5, 0.5]) == pytest.approx(math.sqrt(0.5), rel=1e-12)


def test_distance_broadcasts():
    pts = np.array([[0.0, 0.0], [0.5, 0.5], [0.9, 0.9]])
    d = torus_distance(pts, np.array([0.0, 0.0]))
    np.testing.assert_allclose(d, [0.0, math.sqrt(0.5), math.sqrt(0.02)], atol=1e-12)


@given(
    st.lists(finite_coord, min_size=2, max_size=2),
    st.lists(finite_coord, min_size=2, max_size=2),
    st.lists(finite_coord, min_size=2, max_size=2),
)
@settings(max_examples=300)
def test_distance_metric_axioms(a, b, c):
    p, q, r = torus_wrap(a), torus_wrap(b), torus_wrap(c)
    dpq = torus_distance(p, q)
    assert dpq == torus_distance(q, p)
    assert dpq <= math.sqrt(2) / 2 + 1e-12
    if np.array_equal(p, q):
        assert dpq == 0.0
    assert torus_distance(p, r) <= dpq + torus_distance(q, r) + 1e-12


def test_validate_reference_params(base_params):
    assert validate_params(base_params) is base_params


def test_validate_rejects_negative_alpha():
    with pytest.raises(ValidationError, match="alpha"):
        validate_params(Params(alpha=-1.0, beta0=1.0, A_f=1.0, a_f=0.1, sigma=0.01))


def test_validate_allows_degenerate_zero_rates():
    validate_params(Params(alpha=0.0, beta0=1.0, A_f=0.0, a_f=0.1, sigma=0.01))


def test_validate_affinity_radius_geometry():
    with pytest.raises(ValidationError, match="a_f must be < side/2"):
        validate_params(Params(alpha=1.0, beta0=1.0, A_f=1.0, a_f=0.6, sigma=0.01))


def test_validate_names_every_violation():
    with pytest.raises(ValidationError) as err:
        validate_params(Params(alpha=-1.0, beta0=-2.0, A_f=1.0, a_f=0.1, sigma=0.01, gamma1=0.5))
    msg = str(err.value)
    assert "alpha" in msg and "beta0" in msg and "gamma1" in msg


def test_validate_rejects_non_finite():
    with pytest.raises(ValidationError, match="finite"):
        validate_params(Params(alpha=math.nan, beta0=1.0, A_f=1.0, a_f=0.1, sigma=0.01))


def test_geometry_invariants():
    with pytest.raises(ValidationError):
        Geometry(d=0)
    with pytest.raises(ValidationError):
        Geometry(side=-1.0)
    assert Geometry(d=3, side=2.0).volume == 8.0
