import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grainkin.errors import InvalidArgument
from grainkin.grid import FrequencyGrid, make_grid, sample
from grainkin.maxwell_fourier import (SpectralState, barrier_ratio, equilibrium_phi,
                                      equilibrium_state, fit_decay_rate, fourier_norm_k,
                                      fourier_norm_kp, free_transport, halve, kernel_mode,
                                      normalized, probe_fourier_norm_k,
                                      second_derivative_at_zero, sigma_k, sigma_kp,
                                      step_linearized, step_nonlinear, to_physical, to_spectral)
from grainkin.profiles import cauchy, maxwell_profile


@pytest.fixture(scope="module")
def fg():
    return FrequencyGrid(40.0, 4096)


def gaussian_state(grid, energy=1.0):
    return SpectralState(grid, np.exp(-0.5 * energy * grid.xi**2), energy, -energy)


# ------------------------------------------------------------ equilibrium

@pytest.mark.parametrize("xi, expected", [(0.0, 1.0), (1.0, 2 / math.e), (-1.0, 2 / math.e)])
def test_equilibrium_values(xi, expected):
    assert equilibrium_phi(xi) == pytest.approx(expected, rel=1e-15)


def test_equilibrium_curvature(fg):
    h = fg.dxi
    d2 = 2 * (equilibrium_phi(h) - 1.0) / h**2
    assert d2 == pytest.approx(-1.0, abs=2 * h)
    assert second_derivative_at_zero(equilibrium_state(fg)) == pytest.approx(-1.0, abs=1e-6)


# ------------------------------------------------------------ free transport and halving

def test_transport_identity(fg):
    s = gaussian_state(fg)
    np.testing.assert_array_equal(free_transport(s, 0.0).values, s.values)


def test_transport_norm_scaling():
    grid = FrequencyGrid(60.0, 8192)
    psi = kernel_mode(grid)
    ratio = fourier_norm_k(free_transport(psi, 1.0), 2.0) / fourier_norm_k(psi, 2.0)
    assert ratio == pytest.approx(math.exp(-0.5), rel=1e-2)


def test_equilibrium_not_fixed_by_transport(fg):
    s = equilibrium_state(fg)
    assert np.max(np.abs(free_transport(s, 1.0).values - s.values)) > 0.1


def test_transport_rejects_negative_time(fg):
    with pytest.raises(InvalidArgument):
        free_transport(equilibrium_state(fg), -0.1)


def test_halving_exact_on_even_nodes(fg):
    s = gaussian_state(fg)
    out = halve(s).values
    np.testing.assert_array_equal(out[0::2], s.values[: fg.M // 2 + 1])
    np.testing.assert_allclose(out.real, np.exp(-fg.xi**2 / 8), atol=1e-10)


# ------------------------------------------------------------ time stepping

def test_equilibrium_is_steady(fg):
    s = equilibrium_state(fg)
    for method in ("rk4", "heun"):
        t = s
        for _ in range(5):
            nxt = step_nonlinear(t, 0.01, method)
            assert np.max(np.abs(nxt.values - t.values)) <= 1e-8
            t = nxt


def test_linearized_zero_and_kernel(fg):
    z = SpectralState(fg, np.zeros(fg.M + 1), 1.0, 0.0)
    assert np.all(step_linearized(z, 0.01).values == 0)
    s = kernel_mode(fg)
    for _ in range(5):
        nxt = step_linearized(s, 0.01)
        assert np.max(np.abs(nxt.values - s.values)) <= 1e-8
        s = nxt


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.3, 3.0))
def test_linearized_step_is_linear(alpha, beta, width):
    grid = FrequencyGrid(30.0, 1024)
    xi = grid.xi
    a = SpectralState(grid, xi**3 * np.exp(-xi), 1.0, 0.0)
    b = SpectralState(grid, xi**2 * np.exp(-width * xi) - xi**2 * np.exp(-xi), 1.0, 2.0 - 2.0)
    comb = SpectralState(grid, alpha * a.values + beta * b.values, 1.0, 0.0)
    lhs = step_linearized(comb, 0.05).values
    rhs = alpha * step_linearized(a, 0.05).values + beta * step_linearized(b, 0.05).values
    # the exponential extrapolation beyond xi_max is not linear; compare interior nodes
    inner = xi * math.exp(0.05 / 4) <= grid.xi_max
    assert np.max(np.abs(lhs - rhs)[inner]) <= 1e-12 * (1 + abs(alpha) + abs(beta))


def test_gaussian_relaxes_monotonically():
    grid = FrequencyGrid(40.0, 2048)
    s = gaussian_state(grid)
    dist = [fourier_norm_k(s.deviation(), 2.5)]
    dt = 0.05
    for n in range(1, 1001):
        s = step_nonlinear(s, dt)
        if n % 20 == 0:
            dist.append(fourier_norm_k(s.deviation(), 2.5))
    assert all(b < a for a, b in zip(dist, dist[1:]))
    assert abs(s.values[0] - 1.0) <= 1e-12
    assert s.curvature == -1.0


def test_scaling_invariance():
    """Data of energy E evolve like the unit-energy run with xi rescaled by sqrt(E)."""
    E, k = 4.0, 2.5
    ref = gaussian_state(FrequencyGrid(40.0, 2048))
    big = gaussian_state(FrequencyGrid(20.0, 2048), E)
    for _ in range(40):
        ref, big = step_nonlinear(ref, 0.05), step_nonlinear(big, 0.05)
    a = fourier_norm_k(ref.deviation(), k)
    b = fourier_norm_k(big.deviation(), k)
    assert b == pytest.approx(E ** (k / 2) * a, rel=1e-6)


@pytest.mark.parametrize("dt", [0.0, -0.1, 0.6])
def test_step_rejects_dt(fg, dt):
    with pytest.raises(InvalidArgument):
        step_nonlinear(equilibrium_state(fg), dt)


def test_step_rejects_method_and_mass(fg):
    with pytest.raises(InvalidArgument):
        step_nonlinear(equilibrium_state(fg), 0.01, method="euler")
    s = SpectralState(fg, 2 * equilibrium_phi(fg.xi), 1.0, -2.0)
    with pytest.raises(InvalidArgument):
        step_nonlinear(s, 0.01)
    assert normalized(s).values[0] == 1.0


# ------------------------------------------------------------ norms

def test_norm_k_of_kernel_mode():
    grid = FrequencyGrid(60.0, 8192)
    assert fourier_norm_k(kernel_mode(grid), 2.0) == pytest.approx(math.exp(-grid.xi_min), rel=1e-12)


def test_norm_k_cubic():
    grid = FrequencyGrid(60.0, 8192)
    s = SpectralState(grid, grid.xi**3 * np.exp(-grid.xi), 1.0, 0.0)
    # grid maximum: the nearest node is within dxi/2 of the peak at 1/2
    assert fourier_norm_k(s, 2.5) == pytest.approx(math.sqrt(0.5) * math.exp(-0.5), abs=grid.dxi**2 / 10)


def test_norm_k_divergence_flag():
    grid = FrequencyGrid(60.0, 8192)
    value, diverged = probe_fourier_norm_k(kernel_mode(grid), 2.5)
    assert diverged and value > 0
    assert fourier_norm_k(kernel_mode(grid), 2.5) == math.inf


def test_norm_kp_cubic():
    grid = FrequencyGrid(60.0, 8192)
    s = SpectralState(grid, grid.xi**3 * np.exp(-grid.xi), 1.0, 0.0)
    assert fourier_norm_kp(s, 2.5, 2.0) == pytest.approx(math.sqrt(0.5), abs=1e-5)


@pytest.mark.parametrize("k, p", [(0.4, 2.0), (3.6, 2.0), (2.5, 0.5)])
def test_norm_kp_rejects(fg, k, p):
    with pytest.raises(InvalidArgument):
        fourier_norm_kp(kernel_mode(fg), k, p)


def test_norm_k_rejects(fg):
    with pytest.raises(InvalidArgument):
        fourier_norm_k(kernel_mode(fg), 3.0)


@given(st.floats(0.01, 10.0), st.floats(2.05, 2.95))
def test_norm_k_homogeneous(scale, k):
    grid = FrequencyGrid(20.0, 512)
    s = SpectralState(grid, grid.xi**3 * np.exp(-grid.xi), 1.0, 0.0)
    t = SpectralState(grid, scale * s.values, 1.0, 0.0)
    assert fourier_norm_k(t, k) == pytest.approx(scale * fourier_norm_k(s, k), rel=1e-12)


def test_sigma_values():
    assert sigma_k(2.0) == 0.0 and sigma_k(3.0) == 0.0
    assert sigma_k(2.5) == pytest.approx(0.0214466, abs=1e-7)
    assert sigma_kp(2.8, 2.0) == pytest.approx(0.425 - 2**-1.3, abs=1e-15)
    assert sigma_kp(2.8, 2.0) == pytest.approx(0.0188738, abs=1e-7)


@given(st.floats(2.01, 2.99))
def test_sigma_positive_inside(k):
    assert sigma_k(k) > 0


# ------------------------------------------------------------ decay fits and barriers

def test_fit_decay_rate_examples():
    t = np.arange(11.0)
    assert fit_decay_rate(zip(t, np.exp(-0.3 * t))).rate == pytest.approx(0.3, abs=1e-9)
    assert fit_decay_rate(zip(t, np.full(11, 2.0))).rate == pytest.approx(0.0, abs=1e-12)
    t = np.linspace(0, 100, 201)
    v = np.exp(-0.02 * t) * (1 + 0.01 * np.sin(t))
    assert fit_decay_rate(zip(t, v)).rate == pytest.approx(0.02, abs=5e-3)


def test_fit_decay_rate_rejects():
    with pytest.raises(InvalidArgument):
        fit_decay_rate([(0, 1), (1, 1)])
    with pytest.raises(InvalidArgument):
        fit_decay_rate([(t, -1.0) for t in range(6)])


def test_barrier(fg):
    s = equilibrium_state(fg)
    assert barrier_ratio(s, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert barrier_ratio(s, 2.0) > 1.0


# ------------------------------------------------------------ transforms

@pytest.fixture(scope="module")
def wide():
    return make_grid(200.0, 2**14)


def test_transform_of_maxwell(wide):
    grid = FrequencyGrid(60.0, 8192)
    s = to_spectral(sample(maxwell_profile, wide), grid, tail=True)
    assert np.max(np.abs(s.values - equilibrium_phi(grid.xi))) <= 1e-4
    assert s.energy == pytest.approx(1.0, abs=1e-4)


def test_transform_of_cauchy(wide):
    grid = FrequencyGrid(60.0, 8192)
    s = to_spectral(sample(cauchy, wide), grid, energy=1.0, tail=True)
    assert np.max(np.abs(s.values - np.exp(-grid.xi))) <= 1e-4


def test_transform_round_trip():
    v = make_grid(15.0, 512)
    f = sample(lambda x: np.exp(-x * x / 2) / math.sqrt(2 * math.pi), v)
    s = to_spectral(f, FrequencyGrid(40.0, 4096))
    assert s.energy == pytest.approx(1.0, abs=1e-10)
    back = to_physical(s, v)
    assert np.max(np.abs(back.samples - f.samples)) <= 1e-8
