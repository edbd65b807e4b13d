import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grainkin.errors import InvalidArgument
from grainkin.grid import (Field, FrequencyGrid, PowerTail, cubic_weights, extended_rule,
                           fit_power_tail, integrate, interpolate, lagrange_weights, make_grid,
                           quadrature, sample)
from grainkin.profiles import maxwell_profile


def test_small_grid_nodes():
    g = make_grid(1.0, 4)
    assert g.h == 0.5
    np.testing.assert_array_equal(g.x, [-1.0, -0.5, 0.0, 0.5])


def test_spacing_arithmetic():
    assert make_grid(40.0, 2048).h == 0.0390625


@pytest.mark.parametrize("L, N", [(1.0, 5), (1.0, 0), (0.0, 8), (-2.0, 8), (1.0, 2), (1.0, 7.5)])
def test_make_grid_rejects(L, N):
    with pytest.raises(InvalidArgument):
        make_grid(L, N)


def test_nodes_are_read_only():
    g = make_grid(2.0, 8)
    with pytest.raises(ValueError):
        g.x[0] = 1.0


@given(st.integers(2, 512).map(lambda n: 2 * n), st.floats(0.5, 300.0))
def test_zero_is_a_node_and_spacing_constant(N, L):
    g = make_grid(L, N)
    assert g.x[g.center] == 0.0
    np.testing.assert_allclose(np.diff(g.x), g.h, rtol=1e-12)


@given(st.integers(2, 512).map(lambda n: 2 * n), st.floats(0.5, 300.0))
def test_doubled_node_identity(N, L):
    g = make_grid(L, N)
    j = np.arange(N)
    k = g.doubled_index(j)
    ok = (k >= 0) & (k < N)
    # bitwise equality: both sides are (integer) * h
    assert np.array_equal(2.0 * g.x[j[ok]], g.x[k[ok]])


def test_quadrature_of_zero_and_constant():
    g = make_grid(3.0, 64)
    assert quadrature(Field(g, np.zeros(64))) == 0.0
    assert abs(quadrature(Field(g, np.ones(64))) - 2 * g.L) <= g.h


def test_quadrature_of_maxwell_profile():
    g = make_grid(40.0, 4096)
    assert abs(quadrature(sample(maxwell_profile, g)) - 1.0) <= 1e-5


@settings(max_examples=50)
@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 2**32 - 1))
def test_quadrature_is_linear(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    g = make_grid(5.0, 128)
    f, h = Field(g, rng.normal(size=128)), Field(g, rng.normal(size=128))
    lhs = quadrature(alpha * f + beta * h)
    rhs = alpha * quadrature(f) + beta * quadrature(h)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(alpha) + abs(beta)) * 128


def test_interpolate_at_nodes_is_exact():
    g = make_grid(4.0, 64)
    f = sample(lambda x: np.cos(x) * np.exp(-x * x), g)
    np.testing.assert_array_equal(interpolate(f, g.x), f.samples)


@pytest.mark.parametrize("x", [4.0, 5.0, -4.5, 100.0])
def test_interpolate_outside_is_zero(x):
    g = make_grid(4.0, 64)
    f = sample(lambda x: 1.0 + 0 * x, g)
    assert interpolate(f, x) == 0.0


def test_interpolate_maxwell_quarter():
    g = make_grid(20.0, 4096)
    f = sample(maxwell_profile, g)
    assert abs(interpolate(f, 0.25) - 2 / (math.pi * 1.0625**2)) <= 10 * g.h**4


def test_interpolation_fourth_order():
    xs = np.linspace(-3, 3, 1001) + 1e-3
    errs = []
    for N in (128, 256):
        g = make_grid(8.0, N)
        f = sample(lambda x: np.exp(-x * x), g)
        errs.append(np.max(np.abs(interpolate(f, xs) - np.exp(-xs * xs))))
    assert 12.0 <= errs[0] / errs[1] <= 20.0


@given(st.floats(0.0, 1.0))
def test_lagrange_weights_partition_of_unity(theta):
    for p in (2, 4, 6, 8):
        assert abs(sum(lagrange_weights(theta, p)) - 1.0) <= 1e-12
    np.testing.assert_allclose(lagrange_weights(theta, 4), cubic_weights(theta), atol=1e-14)


def test_lagrange_weights_rejects_odd():
    with pytest.raises(InvalidArgument):
        lagrange_weights(0.5, 3)


def test_quintic_more_accurate_than_cubic():
    g = make_grid(6.0, 96)
    f = sample(lambda x: np.exp(-x * x), g)
    xs = np.linspace(-4, 4, 501) + 1e-3
    e4 = np.max(np.abs(interpolate(f, xs) - np.exp(-xs * xs)))
    e6 = np.max(np.abs(interpolate(f, xs, 6) - np.exp(-xs * xs)))
    assert e6 < e4 / 5


def test_field_validation():
    g = make_grid(1.0, 8)
    with pytest.raises(InvalidArgument):
        Field(g, np.ones(7))
    with pytest.raises(InvalidArgument):
        Field(g, np.full(8, np.nan))
    with pytest.raises(InvalidArgument):
        Field(g, np.ones(8)) + Field(make_grid(2.0, 8), np.ones(8))


def test_probability_like_flag():
    g = make_grid(40.0, 4096)
    H = sample(maxwell_profile, g)
    assert H.is_probability_like(1e-4)
    assert not (-1 * H).is_probability_like()
    assert not (2 * H).is_probability_like()


def test_frequency_grid():
    fg = FrequencyGrid(60.0, 8192)
    assert fg.xi[0] == 0.0 and fg.xi[-1] == 60.0
    assert fg.xi_min == fg.dxi and fg.first_admitted == 1
    floored = FrequencyGrid(60.0, 8192, xi_floor=0.1)
    assert floored.xi_min == 0.1
    assert floored.xi[floored.first_admitted] >= 0.1 * (1 - 1e-12)


@given(st.integers(1, 2048))
def test_halving_lands_on_even_nodes(m):
    fg = FrequencyGrid(60.0, 4096)
    xi = fg.dxi * (2 * m)
    assert xi / 2 == fg.xi[m]


def test_power_tail_recovers_maxwell_mass():
    g = make_grid(40.0, 4096)
    H = sample(maxwell_profile, g)
    tail = fit_power_tail(H)
    assert isinstance(tail, PowerTail)
    assert abs(tail.p - 4.0) < 0.05
    # the truncated second moment misses ~4/(pi L); the closed rule recovers it
    m2_box = integrate(H, lambda x: x * x)
    m2 = integrate(H, lambda x: x * x, tail=True)
    assert abs(m2_box - 1.0) > 0.02
    assert abs(m2 - 1.0) < 1e-3


def test_power_tail_absent_for_compact_data():
    g = make_grid(10.0, 256)
    f = sample(lambda x: np.where(np.abs(x) < 5, 1.0, 0.0), g)
    assert fit_power_tail(f) is None
    xs, ws, vs = extended_rule(f, True)
    assert xs.size == g.N
