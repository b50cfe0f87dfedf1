import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from metricgi.lp_space import PNormSpace, conjugate_exponent, dual_map, pnorm, signed_power

exponents = st.floats(min_value=1.05, max_value=12.0)
vectors = arrays(
    np.float64, st.integers(1, 8),
    elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False),
)


def test_pnorm_examples():
    assert pnorm([3.0, 4.0], 2) == 5.0
    assert pnorm(np.zeros(3), 3.7) == 0.0
    assert pnorm([1.0, 1.0], 4) == pytest.approx(2 ** 0.25, rel=1e-15)
    assert pnorm([1.0, 1.0], 4) == pytest.approx(1.189207, abs=1e-6)


def test_dual_map_examples():
    assert np.array_equal(dual_map([3.0, 4.0], 2), [3.0, 4.0])
    assert np.array_equal(dual_map(np.zeros(4), 1.5), np.zeros(4))
    x = np.array([1.0, 1.0])
    f = dual_map(x, 4)
    np.testing.assert_allclose(f, [2 ** -0.5, 2 ** -0.5], rtol=1e-15)
    assert f @ x == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert pnorm(f, 4 / 3) == pytest.approx(2 ** 0.25, rel=1e-14)


@pytest.mark.parametrize("p, expected", [(2.0, 2.0), (4.0, 4.0 / 3.0), (1.5, 3.0)])
def test_conjugate_exponent(p, expected):
    assert conjugate_exponent(p) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("p", [1.0, 0.5, math.inf, -2.0])
def test_space_rejects_bad_exponent(p):
    with pytest.raises(ValueError, match="p must exceed 1"):
        PNormSpace(3, p)


def test_space_rejects_bad_dimension():
    with pytest.raises(ValueError):
        PNormSpace(0, 2.0)


def test_space_checks_vectors():
    s = PNormSpace(3, 3.0)
    with pytest.raises(ValueError):
        s.norm([1.0, 2.0])
    with pytest.raises(ValueError):
        s.norm([1.0, np.nan, 0.0])


def test_signed_power_underflow_guard():
    out = signed_power(np.array([1e-310, -1e-310, 0.0, -4.0]), 0.5)
    assert np.array_equal(out[:3], [0.0, 0.0, 0.0])
    assert out[3] == -2.0
    assert np.all(np.isfinite(out))


@given(x=vectors, p=exponents, lam=st.floats(-1e3, 1e3))
def test_dual_map_homogeneous(x, p, lam):
    lhs = dual_map(lam * x, p)
    rhs = lam * dual_map(x, p)
    scale = max(np.max(np.abs(rhs), initial=0.0), 1e-300)
    assert np.max(np.abs(lhs - rhs), initial=0.0) <= 1e-12 * scale


@given(x=vectors, p=exponents)
def test_dual_map_defining_identities(x, p):
    f = dual_map(x, p)
    nx = pnorm(x, p)
    assert f @ x == pytest.approx(nx**2, rel=1e-10, abs=1e-300)
    assert pnorm(f, conjugate_exponent(p)) == pytest.approx(nx, rel=1e-10, abs=1e-300)


def test_dual_map_identities_bulk():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10_000):
        p = rng.uniform(1.05, 10.0)
        x = rng.standard_normal(rng.integers(1, 9)) * 10.0 ** rng.uniform(-3, 3)
        f = dual_map(x, p)
        nx = pnorm(x, p)
        worst = max(worst, abs(f @ x - nx**2) / nx**2, abs(pnorm(f, conjugate_exponent(p)) - nx) / nx)
    assert worst <= 1e-10


@given(p=exponents, data=st.data())
def test_dual_map_strictly_monotone(p, data):
    n = data.draw(st.integers(1, 6))
    elems = st.floats(-10, 10, allow_nan=False)
    x = data.draw(arrays(np.float64, n, elements=elems))
    y = data.draw(arrays(np.float64, n, elements=elems))
    if np.max(np.abs(x - y)) < 1e-3:
        return
    assert (dual_map(x, p) - dual_map(y, p)) @ (x - y) > 0.0
