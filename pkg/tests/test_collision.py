import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grainkin.collision import (CollisionParams, collision, collision_freq, dissipation_integral,
                                energy_production, i0_functional, i_gamma_functional,
                                kernel_weights, l2_norm, lambda_gamma_fn, moment, moment_report,
                                q_minus, q_plus, weak_apply, weighted_norm)
from grainkin.errors import InvalidArgument
from grainkin.grid import Field, make_grid, quadrature, sample
from grainkin.profiles import LAMBDA0, LOG2, g0_profile, gaussian, maxwell_profile
from grainkin.selfsim import derivative


@pytest.fixture(scope="module")
def big():
    return make_grid(200.0, 2**14)


@pytest.fixture(scope="module")
def H_big(big):
    return sample(maxwell_profile, big)


@pytest.fixture(scope="module")
def small():
    return make_grid(12.0, 512)


def gaussian_field(grid, energy=1.0, center=0.0):
    return sample(lambda x: gaussian(x, energy, center), grid)


positive_gaussians = st.tuples(st.floats(0.3, 2.0), st.floats(-1.0, 1.0), st.floats(0.2, 3.0))


def mixture(grid, params):
    return sample(lambda x: sum(w * gaussian(x, e, c) for e, c, w in params), grid)


# ------------------------------------------------------------ params

@pytest.mark.parametrize("gamma", [-0.1, 1.0, 1.5])
def test_params_reject_gamma(gamma):
    with pytest.raises(InvalidArgument, match=r"gamma must lie in \[0,1\)"):
        CollisionParams(gamma)


def test_params_reject_c():
    with pytest.raises(InvalidArgument):
        CollisionParams(0.1, 0.0)


def test_kernel_weights_diagonal_convention(small):
    assert np.all(kernel_weights(small, 0.0) == 1.0)
    w = kernel_weights(small, 0.3)
    assert w[1] == pytest.approx(small.h**0.3)
    assert w[0] > 0  # cusp correction, not the pointwise value 0


# ------------------------------------------------------------ gain and loss terms

def test_q_plus_of_zero(small):
    z = Field(small, np.zeros(small.N))
    for gamma in (0.0, 0.5):
        assert np.all(q_plus(z, z, CollisionParams(gamma)).samples == 0.0)


def test_q_plus_maxwell_at_zero(big, H_big):
    q = q_plus(H_big, H_big, CollisionParams(0.0))
    assert q.samples[big.center] == pytest.approx(5 / (2 * math.pi), abs=1e-6)


def test_q_plus_gaussian_at_zero():
    g = make_grid(12.0, 1024)
    M = sample(lambda x: np.exp(-x * x) / math.sqrt(math.pi), g)
    q = q_plus(M, M, CollisionParams(0.0))
    assert q.samples[g.center] == pytest.approx(0.797885, abs=1e-6)


def test_fft_path_matches_direct(small):
    f = mixture(small, [(1.0, 0.3, 1.0), (0.5, -1.0, 0.5)])
    g = gaussian_field(small, 0.7, 0.4)
    a = q_plus(f, g, CollisionParams(0.0), method="fft").samples
    b = q_plus(f, g, CollisionParams(0.0), method="direct").samples
    assert np.max(np.abs(a - b)) <= 1e-10


def test_fft_path_needs_maxwell(small):
    f = gaussian_field(small)
    with pytest.raises(InvalidArgument):
        q_plus(f, f, CollisionParams(0.2), method="fft")


def test_grid_mismatch(small):
    f = gaussian_field(small)
    g = gaussian_field(make_grid(10.0, 512))
    with pytest.raises(InvalidArgument):
        q_plus(f, g)
    with pytest.raises(InvalidArgument):
        q_minus(f, g)


def test_q_minus_maxwell_kernel(small):
    f = gaussian_field(small, 0.5)
    g = 3.0 * gaussian_field(small, 2.0)
    m = quadrature(g)
    np.testing.assert_allclose(q_minus(f, g, CollisionParams(0.0)).samples, f.samples * m,
                               rtol=0, atol=1e-15)


def test_q_minus_hard_spheres_maxwell(big, H_big):
    q = q_minus(H_big, H_big, 1.0)
    assert q.samples[big.center] == pytest.approx((2 / math.pi) ** 2, abs=1e-4)


def test_collision_freq_examples(big, H_big, small):
    assert np.allclose(collision_freq(H_big, 0.0).samples, quadrature(H_big))
    assert collision_freq(H_big, 1.0).samples[big.center] == pytest.approx(2 / math.pi, abs=1e-4)
    z = Field(small, np.zeros(small.N))
    assert np.all(collision_freq(z, 0.4).samples == 0)


# ------------------------------------------------------------ weak form and conservation

@settings(max_examples=15, deadline=None)
@given(st.lists(positive_gaussians, min_size=1, max_size=3), st.sampled_from([0.0, 0.1, 0.5, 0.9]))
def test_weak_form_conserves_mass_and_momentum(params, gamma):
    g = make_grid(12.0, 256)
    f = mixture(g, params)
    p = CollisionParams(gamma)
    scale = quadrature(f) ** 2
    assert abs(weak_apply(f, f, lambda x: np.ones_like(x), p)) <= 1e-10 * scale
    assert abs(weak_apply(f, f, lambda x: x, p)) <= 1e-10 * scale


@settings(max_examples=15, deadline=None)
@given(st.lists(positive_gaussians, min_size=1, max_size=3), st.sampled_from([0.0, 0.1, 0.5, 0.9]))
def test_discrete_operator_conserves(params, gamma):
    g = make_grid(12.0, 256)
    f = mixture(g, params)
    q = collision(f, f, CollisionParams(gamma)).samples
    scale = quadrature(f) ** 2
    assert abs(g.h * q.sum()) <= 1e-12 * scale
    assert abs(g.h * (g.x * q).sum()) <= 1e-12 * scale


def test_weak_energy_maxwell(H_big):
    e = weak_apply(H_big, H_big, lambda x: x * x, CollisionParams(0.0), tail=True)
    assert e == pytest.approx(-0.5, abs=1e-3)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.4, 2.0), st.floats(-0.5, 0.5), st.sampled_from([0.0, 0.05, 0.3, 0.7]))
def test_energy_dissipation_identity(energy, center, gamma):
    g = make_grid(15.0, 512)
    f = gaussian_field(g, energy, center)
    lhs = energy_production(f, CollisionParams(gamma))
    rhs = -0.25 * dissipation_integral(f, gamma)
    assert abs(lhs - rhs) <= 1e-6 * abs(rhs)


def test_maxwell_steady_residual_converges():
    errs = []
    for N in (1024, 2048, 4096):
        g = make_grid(40.0, N)
        H = sample(maxwell_profile, g)
        r = 0.25 * derivative(g.x * H.samples, g.h) - collision(H, H).samples
        errs.append(g.h * np.sum(np.abs(r)))
    assert errs[2] < errs[1] < errs[0]


def test_q_plus_l2_bound_on_random_trios():
    rng = np.random.default_rng(12345)
    g = make_grid(10.0, 256)

    def draw():
        s = np.zeros(g.N)
        for _ in range(rng.integers(1, 4)):
            s += rng.uniform(0.1, 2) * np.exp(-((g.x - rng.uniform(-5, 5)) / rng.uniform(0.2, 2)) ** 2)
        return Field(g, s)

    for _ in range(100):
        f, k, h = draw(), draw(), draw()
        lhs = g.h * np.sum(q_plus(f, k).samples * h.samples)
        l1 = lambda u: quadrature(u)
        rhs = math.sqrt(2) * l2_norm(h) * min(l1(f) * l2_norm(k), l1(k) * l2_norm(f))
        assert lhs <= rhs


def test_gamma_limit_of_operator():
    # Q_gamma -> Q_0 in L1(w_a), monotonically across the sweep
    g = make_grid(15.0, 512)
    f = gaussian_field(g, 1.0)
    k = gaussian_field(g, 0.6, 0.5)
    q0 = collision(f, k, CollisionParams(0.0))
    dists = [weighted_norm(q0 - collision(f, k, CollisionParams(gm)), 2.5)
             for gm in (0.2, 0.1, 0.05, 0.025)]
    assert all(b < a for a, b in zip(dists, dists[1:]))
    assert dists[-1] < 0.2 * dists[0]


# ------------------------------------------------------------ moments

def test_moments_of_maxwell(big, H_big):
    assert moment(H_big, 0.0) == pytest.approx(1.0, abs=1e-6)
    assert moment(H_big, 2.0, tail=True) == pytest.approx(1.0, abs=1e-4)
    # the |x| term has a kink at 0, so the rectangle rule is only O(h^2) accurate there
    assert weighted_norm(H_big, 2.0, tail=True) == pytest.approx(2 + 4 / math.pi, abs=big.h**2)


def test_energy_of_g0(big):
    G0 = sample(g0_profile, big)
    assert moment(G0, 2.0, tail=True) == pytest.approx(1 / (4 * math.e), abs=1e-6)


def test_moment_rejects_negative_order(small):
    with pytest.raises(InvalidArgument):
        moment(gaussian_field(small), -1.0)


@given(st.lists(positive_gaussians, min_size=1, max_size=3))
def test_moment_report_nonnegative(params):
    g = make_grid(12.0, 256)
    rep = moment_report(mixture(g, params), orders=(0.5, 1.0, 2.5), weights=(2.0, 2.5))
    assert all(v >= 0 for v in rep.fractional.values())
    assert all(np.isfinite(v) for v in rep.weighted.values())
    assert rep.energy >= 0


# ------------------------------------------------------------ dissipation functionals

def test_lambda_gamma_fn():
    assert lambda_gamma_fn(1.0, 0.3) == 0.0
    assert lambda_gamma_fn(math.e, 0.0) == pytest.approx(1.0)
    assert lambda_gamma_fn(2.0, 1e-8) == pytest.approx(math.log(2.0), rel=1e-7)
    with pytest.raises(InvalidArgument):
        lambda_gamma_fn(0.0, 0.1)
    with pytest.raises(InvalidArgument):
        lambda_gamma_fn(np.array([1.0, -1.0]), 0.1)


def test_i0_maxwell(H_big):
    assert i0_functional(H_big, H_big, tail=True) == pytest.approx(2 * LOG2 + 1, rel=1e-3)


def test_i0_g0_maxwell_resolution(big, H_big):
    from grainkin.profiles import kernel_element
    g0 = sample(kernel_element, big)
    val = i0_functional(g0, H_big, tail=True)
    assert val == pytest.approx(-2 * LOG2 - 2, rel=1e-2)
    assert val != pytest.approx(-2 * LOG2 - 5, rel=1e-2)


def test_i_gamma_tends_to_i0():
    g = make_grid(15.0, 512)
    f = gaussian_field(g, 1.0)
    k = gaussian_field(g, 0.5, 0.3)
    i0 = i0_functional(f, k)
    gaps = [abs(i_gamma_functional(f, k, gm) - i0) for gm in (0.1, 0.01, 0.001)]
    # first-order convergence in gamma
    assert gaps[1] == pytest.approx(0.1 * gaps[0], rel=0.1)
    assert gaps[2] == pytest.approx(0.01 * gaps[0], rel=0.1)
    assert i_gamma_functional(f, k, 0.0) == i0


@settings(max_examples=20, deadline=None)
@given(st.lists(positive_gaussians, min_size=1, max_size=2),
       st.lists(positive_gaussians, min_size=1, max_size=2), st.floats(0.0, 0.9))
def test_i_gamma_symmetry(p1, p2, gamma):
    g = make_grid(10.0, 256)
    f, k = mixture(g, p1), mixture(g, p2)
    assert i_gamma_functional(f, k, gamma) == i_gamma_functional(k, f, gamma)


def test_limiting_temperature_constant():
    assert LAMBDA0 == pytest.approx(2 * math.sqrt(math.e))
