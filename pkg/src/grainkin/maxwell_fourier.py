"""Maxwell molecules (gamma = 0) in Fourier variables.

The self-similar equation becomes

    d/dt phi = 1/4 xi phi' + phi(xi/2)**2 - phi,

whose steady state of unit energy is ``Phi(xi) = (1 + |xi|) exp(-|xi|)``.
States are stored on the nonnegative half axis; the solver advances the
deviation ``psi = phi - Phi_E`` from the equilibrium with the same energy,
which keeps ``Phi_E`` an exact fixed point and ``phi(0) = 1`` exact.

Free transport ``T(t) psi(xi) = exp(-t) psi(xi exp(t/4))`` is applied exactly
up to cubic interpolation, and the quadratic term is integrated with an
integrating-factor (Lawson) Runge-Kutta scheme.  Interpolation stencils stay
on the half axis, so the ``|xi|**3`` cusp of typical transforms at the origin
is reproduced exactly by the cubic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidArgument
from .grid import Field, FrequencyGrid, VelocityGrid, fit_power_tail
from .profiles import equilibrium_transform, kernel_transform

__all__ = [
    "SpectralState",
    "DecayFit",
    "equilibrium_phi",
    "kernel_mode",
    "equilibrium_state",
    "free_transport",
    "halve",
    "step_nonlinear",
    "step_linearized",
    "normalized",
    "fourier_norm_k",
    "probe_fourier_norm_k",
    "fourier_norm_kp",
    "sigma_k",
    "sigma_kp",
    "fit_decay_rate",
    "barrier_ratio",
    "second_derivative_at_zero",
    "to_spectral",
    "to_physical",
]

_METHODS = ("rk4", "heun")


@dataclass(frozen=True)
class SpectralState:
    """Samples of a transform on the half axis of ``grid``.

    ``energy`` selects the comparison equilibrium ``Phi(sqrt(energy) xi)``.
    ``curvature`` is the second derivative at the origin (minus the energy
    for a density); it is conserved by both evolutions and carried along
    exactly.  When omitted it is measured from the samples.
    Negative frequencies are ``conj(values)`` by construction.
    """

    grid: FrequencyGrid
    values: np.ndarray
    energy: float = 1.0
    curvature: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.M + 1,):
            raise InvalidArgument(f"expected {self.grid.M + 1} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("spectral values must be finite")
        if not self.energy > 0:
            raise InvalidArgument("energy must be positive")
        v[0] = v[0].real
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.curvature is None:
            object.__setattr__(self, "curvature", _fit_curvature(self.grid.xi, v))

    @property
    def xi(self) -> np.ndarray:
        return self.grid.xi

    def with_values(self, values, curvature: float | None = None) -> "SpectralState":
        """Same grid and energy; ``curvature`` is measured unless given."""
        return SpectralState(self.grid, values, self.energy, curvature)

    def equilibrium(self) -> np.ndarray:
        return equilibrium_transform(math.sqrt(self.energy) * self.grid.xi)

    def deviation(self) -> "SpectralState":
        """``phi - Phi_E`` as a state (used by the norms)."""
        return self.with_values(self.values - self.equilibrium(), self.curvature + self.energy)

    def __sub__(self, other):
        if isinstance(other, SpectralState):
            if other.grid != self.grid:
                raise InvalidArgument("states live on different grids")
            return self.with_values(self.values - other.values)
        return NotImplemented


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit ``log value ~ intercept - rate * t`` on ``window``."""

    rate: float
    intercept: float
    rms: float
    window: tuple[float, float]
    points: int


def equilibrium_phi(xi):
    """``Phi(xi) = (1 + |xi|) exp(-|xi|)``."""
    return equilibrium_transform(xi)


def kernel_mode(grid: FrequencyGrid, energy: float = 1.0) -> SpectralState:
    """The stationary direction ``psi0(xi) = xi**2 exp(-|xi|)`` of the linearized flow."""
    return SpectralState(grid, kernel_transform(grid.xi), energy, 2.0)


def equilibrium_state(grid: FrequencyGrid, energy: float = 1.0) -> SpectralState:
    return SpectralState(grid, equilibrium_transform(math.sqrt(energy) * grid.xi),
                         energy, -energy)


# ------------------------------------------------------------ resampling

def _lagrange4(u):
    """Weights of nodes 0..3 at position ``u``."""
    return (
        -(u - 1) * (u - 2) * (u - 3) / 6,
        u * (u - 2) * (u - 3) / 2,
        -u * (u - 1) * (u - 3) / 2,
        u * (u - 1) * (u - 2) / 6,
    )


def _build_stencil(M: int, t: np.ndarray):
    """Base indices, weights and tail offsets for evaluation at fractional indices ``t``."""
    inside = t <= M
    base = np.clip(np.floor(t).astype(np.int64) - 1, 0, M - 3)
    u = np.where(inside, t - base, 0.0)
    w = np.stack(_lagrange4(u))
    over = np.where(inside, 0.0, t - M)
    return base, w, inside, over


@lru_cache(maxsize=64)
def _scaling_stencil(M: int, scale: float):
    return _build_stencil(M, np.arange(M + 1) * scale)


@lru_cache(maxsize=16)
def _halving_stencil(M: int):
    return _build_stencil(M, np.arange(1, M + 1, 2) / 2.0)


def _tail_rate(values: np.ndarray, dxi: float) -> float:
    """Exponential decay rate of ``|values|`` over the last decade of nodes."""
    M = values.size - 1
    start = max(1, int(0.9 * M))
    mag = np.abs(values[start:])
    if mag.size < 2 or np.any(mag <= 1e-300):
        return math.inf
    slope = np.polyfit(np.arange(mag.size) * dxi, np.log(mag), 1)[0]
    return max(0.0, -slope)


def _resample(values: np.ndarray, dxi: float, stencil) -> np.ndarray:
    base, w, inside, over = stencil
    out = (w[0] * values[base] + w[1] * values[base + 1]
           + w[2] * values[base + 2] + w[3] * values[base + 3])
    if not np.all(inside):
        rate = _tail_rate(values, dxi)
        tail = values[-1] * np.exp(-rate * dxi * over) if np.isfinite(rate) else 0.0
        out = np.where(inside, out, tail)
    return out


def _transport(values: np.ndarray, dxi: float, tau: float) -> np.ndarray:
    if tau == 0.0:
        return values.copy()
    M = values.size - 1
    return math.exp(-tau) * _resample(values, dxi, _scaling_stencil(M, math.exp(tau / 4)))


def _halve(values: np.ndarray) -> np.ndarray:
    M = values.size - 1
    out = np.empty_like(values)
    out[0::2] = values[: M // 2 + 1][: out[0::2].size]
    out[1::2] = _resample(values, 1.0, _halving_stencil(M))
    return out


def free_transport(s: SpectralState, t: float) -> SpectralState:
    """``T(t) s(xi) = exp(-t) s(xi exp(t/4))``."""
    if t < 0:
        raise InvalidArgument("transport time must be nonnegative")
    return s.with_values(_transport(np.asarray(s.values), s.grid.dxi, float(t)),
                         s.curvature * math.exp(-0.5 * t))


def halve(s: SpectralState) -> SpectralState:
    """``xi -> s(xi / 2)``: exact on even nodes, interpolated on odd ones."""
    return s.with_values(_halve(np.asarray(s.values)))


# ------------------------------------------------------------ stepping
#
# With psi = xi**2 u the deviation equations read
#
#     u' = 1/4 xi u_xi - 1/2 u + 1/2 Phi_E(xi/2) u(xi/2) [+ xi**2 u(xi/2)**2 / 16],
#
# the bracket only in the nonlinear case.  In these variables the unstable
# direction ``psi ~ |xi|`` (growth rate 1/4, an infinite-energy perturbation)
# would need ``u ~ 1/xi`` and is never produced by smooth interpolation, and
# the energy offset ``u(0)`` is an exact invariant of the discrete flow
# because node 0 is fixed by both the transport and the halving map.

def _transport_u(u: np.ndarray, tau: float, dxi: float) -> np.ndarray:
    if tau == 0.0:
        return u.copy()
    M = u.size - 1
    return math.exp(-0.5 * tau) * _resample(u, dxi, _scaling_stencil(M, math.exp(tau / 4)))


def _integrate(u: np.ndarray, dxi: float, dt: float, forcing, method: str) -> np.ndarray:
    def T(v, tau):
        return _transport_u(v, tau, dxi)

    if method == "heun":
        Tu = T(u, dt)
        Tk1 = T(forcing(u), dt)
        pred = Tu + dt * Tk1
        return Tu + 0.5 * dt * (Tk1 + forcing(pred))
    half = 0.5 * dt
    k1 = forcing(u)
    Tu_h = T(u, half)
    k2 = forcing(Tu_h + half * T(k1, half))
    k3 = forcing(Tu_h + half * k2)
    Tu = T(u, dt)
    k4 = forcing(Tu + dt * T(k3, half))
    return Tu + (dt / 6.0) * (T(k1, dt) + 2.0 * T(k2 + k3, half) + k4)


def _to_u(psi: np.ndarray, xi: np.ndarray, psi_curvature: float) -> np.ndarray:
    u = np.empty_like(psi)
    u[1:] = psi[1:] / xi[1:] ** 2
    u[0] = 0.5 * psi_curvature
    return u


def _check_step(s: SpectralState, psi0: complex, dt: float, method: str) -> None:
    if not (0.0 < dt <= 0.5):
        raise InvalidArgument(f"time step must lie in (0, 0.5], got {dt}")
    if method not in _METHODS:
        raise InvalidArgument(f"unknown method {method!r}; choose from {_METHODS}")
    if abs(psi0) > 1e-8:
        raise InvalidArgument("state is not normalized at xi = 0; rescale it first")


def step_nonlinear(s: SpectralState, dt: float, method: str = "rk4") -> SpectralState:
    """Advance the self-similar Fourier equation by ``dt``.

    ``method`` is ``"rk4"`` (Lawson integrating-factor Runge-Kutta, default)
    or ``"heun"`` (predictor-corrector on the same Duhamel form).  The state
    must satisfy ``phi(0) = 1``.
    """
    eq = s.equilibrium()
    psi = np.asarray(s.values) - eq
    _check_step(s, psi[0], dt, method)
    xi = s.grid.xi
    phi_half = 0.5 * equilibrium_transform(0.5 * math.sqrt(s.energy) * xi)
    quad = xi * xi / 16.0

    def forcing(u):
        uh = _halve(u)
        return uh * (phi_half + quad * uh)

    u = _integrate(_to_u(psi, xi, s.curvature + s.energy), s.grid.dxi, dt, forcing, method)
    return s.with_values(eq + xi * xi * u, s.curvature)


def step_linearized(s: SpectralState, dt: float, method: str = "rk4") -> SpectralState:
    """Advance ``psi' = 1/4 xi psi_xi - psi + 2 psi(xi/2) Phi_E(xi/2)`` by ``dt``.

    The state must vanish at ``xi = 0``.
    """
    psi = np.asarray(s.values)
    _check_step(s, psi[0], dt, method)
    xi = s.grid.xi
    phi_half = 0.5 * equilibrium_transform(0.5 * math.sqrt(s.energy) * xi)

    def forcing(u):
        return phi_half * _halve(u)

    u = _integrate(_to_u(psi, xi, s.curvature), s.grid.dxi, dt, forcing, method)
    return s.with_values(xi * xi * u, s.curvature)


def normalized(s: SpectralState) -> SpectralState:
    """Divide by ``phi(0)`` (unit mass)."""
    m = s.values[0].real
    if not m > 0:
        raise InvalidArgument("phi(0) must be positive to normalize")
    return s.with_values(np.asarray(s.values) / m, s.curvature / m)


# ------------------------------------------------------------ norms

def probe_fourier_norm_k(s: SpectralState, k: float, threshold: float = 0.02):
    """Grid supremum of ``|s| / xi**k`` and a divergence flag.

    The flag is raised when the maximum sits on the smallest admitted node and
    the local log-slope of the ratio, extrapolated to ``xi -> 0`` from the
    nodes ``xi_1, 2 xi_1, 4 xi_1``, is positive: the ratio then grows like a
    negative power of ``xi`` and the true supremum is infinite.
    """
    g = s.grid
    i1 = g.first_admitted
    xi = g.xi[i1:]
    ratio = np.abs(s.values[i1:]) / xi**k
    top = int(np.argmax(ratio))
    value = float(ratio[top])
    diverged = False
    if top == 0 and 4 * i1 <= g.M and value > 0:
        r1, r2, r4 = ratio[0], ratio[i1], ratio[3 * i1]
        if r2 > 0 and r4 > 0:
            d1 = math.log2(r1 / r2)
            d2 = math.log2(r2 / r4)
            diverged = (2.0 * d1 - d2) > threshold
        else:
            diverged = True
    return value, diverged


def fourier_norm_k(s: SpectralState, k: float) -> float:
    """``sup |s(xi)| / |xi|**k`` over admitted nodes; ``inf`` when the probe flags divergence."""
    if not (0.0 <= k < 3.0):
        raise InvalidArgument("k must lie in [0, 3)")
    value, diverged = probe_fourier_norm_k(s, k)
    return math.inf if diverged else value


def fourier_norm_kp(s: SpectralState, k: float, p: float) -> float:
    """``(int_R |s(xi)|**p / |xi|**(k p) dxi)**(1/p)`` by the trapezoid rule."""
    if not p >= 1:
        raise InvalidArgument("p must be at least 1")
    if not (1.0 / p < k < 3.0 + 1.0 / p):
        raise InvalidArgument(f"(k, p) = ({k}, {p}) outside 1/p < k < 3 + 1/p")
    xi = s.grid.xi
    mag = np.abs(np.asarray(s.values))
    if not np.any(mag[1:]):
        return 0.0
    f = np.empty(xi.size)
    f[1:] = mag[1:] ** p / xi[1:] ** (k * p)
    # the origin value is a removable limit; extrapolate it linearly
    f[0] = max(0.0, 2.0 * f[1] - f[2])
    half = s.grid.dxi * (np.sum(f) - 0.5 * (f[0] + f[-1]))
    return float((2.0 * half) ** (1.0 / p))


def sigma_k(k: float) -> float:
    return 1.0 - 0.25 * k - 2.0 ** (1.0 - k)


def sigma_kp(k: float, p: float) -> float:
    return 1.0 - 0.25 * k + 0.25 / p - 2.0 ** (1.0 + 1.0 / p - k)


def fit_decay_rate(series, window: tuple[float, float] | None = None) -> DecayFit:
    """Fit an exponential to ``(t, value)`` pairs; ``rate`` is minus the log-slope."""
    data = np.asarray(list(series), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise InvalidArgument("series must be a sequence of (t, value) pairs")
    if window is not None:
        lo, hi = window
        data = data[(data[:, 0] >= lo) & (data[:, 0] <= hi)]
    if data.shape[0] < 5:
        raise InvalidArgument("need at least 5 points to fit a rate")
    t, v = data[:, 0], data[:, 1]
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise InvalidArgument("values must be positive and finite")
    slope, intercept = np.polyfit(t, np.log(v), 1)
    resid = np.log(v) - (slope * t + intercept)
    return DecayFit(rate=float(-slope), intercept=float(intercept),
                    rms=float(np.sqrt(np.mean(resid**2))),
                    window=(float(t[0]), float(t[-1])), points=int(t.size))


def barrier_ratio(s: SpectralState, a: float) -> float:
    """``max |phi(xi)| / Phi(a xi)`` over nodes where the barrier is representable."""
    if not a > 0:
        raise InvalidArgument("barrier scale must be positive")
    bar = equilibrium_transform(a * s.grid.xi)
    ok = bar > 1e-280
    return float(np.max(np.abs(s.values[ok]) / bar[ok]))


def _fit_curvature(xi: np.ndarray, values: np.ndarray) -> float:
    """``Re phi''(0)`` from the interpolant through the first five nodes.

    Transforms of densities with a finite third moment but not a fourth
    carry a ``|xi|**3`` term, so even polynomials are not enough; the fit
    uses ``1, xi**2, xi**3, xi**4, xi**5``.
    """
    u = xi[:5] / xi[1]
    v = np.real(values[:5])
    A = np.stack([np.ones(5), u**2, u**3, u**4, u**5], axis=1)
    coef = np.linalg.solve(A, v)
    return float(2.0 * coef[1] / xi[1] ** 2)


def second_derivative_at_zero(s: SpectralState) -> float:
    """Measured ``Re phi''(0)`` of the samples (not the carried ``curvature``)."""
    return _fit_curvature(s.grid.xi, np.asarray(s.values))


# ------------------------------------------------------------ transforms

def _tail_transform(p: float, R: float, xi: np.ndarray, n: int = 64) -> np.ndarray:
    """``J(xi) = int_R^inf x**-p exp(-i xi x) dx`` for ``xi >= 0``.

    On the rotated contour ``x = R - i s`` the oscillation becomes the decay
    ``exp(-xi s)``: Gauss-Laguerre handles ``xi R >= 1``, a rational map of
    ``[0, inf)`` onto ``[0, 1)`` handles the slowly decaying small-xi case.
    """
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.size, dtype=complex)
    big = xi * R >= 1.0
    if np.any(big):
        v, wv = np.polynomial.laguerre.laggauss(n)
        xb = xi[big][:, None]
        vals = (R - 1j * v[None, :] / xb) ** (-p)
        out[big] = -1j * np.exp(-1j * xi[big] * R) / xi[big] * (vals @ wv)
    if np.any(~big):
        tau, wt = np.polynomial.legendre.leggauss(n)
        tau = 0.5 * (tau + 1.0)
        wt = 0.5 * wt * R / (1.0 - tau) ** 2
        sv = R * tau / (1.0 - tau)
        xs = xi[~big][:, None]
        vals = (R - 1j * sv[None, :]) ** (-p) * np.exp(-xs * sv[None, :])
        out[~big] = -1j * np.exp(-1j * xi[~big] * R) * (vals @ wt)
    return out


def to_spectral(f: Field, grid: FrequencyGrid, energy: float | None = None,
                tail: bool = False, chunk: int = 512) -> SpectralState:
    """``f_hat(xi) = int f(x) exp(-i x xi) dx`` by the rectangle rule.

    ``energy`` defaults to the second moment of ``f`` normalized by its mass.
    With ``tail=True`` a fitted power tail closes the transform beyond the box
    (needed for slowly decaying densities such as the Cauchy law); the
    curvature is then measured from the closed transform.
    """
    x = f.grid.x
    w = f.grid.h * np.asarray(f.samples)
    xi = grid.xi
    out = np.empty(xi.size, dtype=complex)
    for start in range(0, xi.size, chunk):
        arg = np.outer(xi[start:start + chunk], x)
        out[start:start + chunk] = np.cos(arg) @ w - 1j * (np.sin(arg) @ w)
    model = fit_power_tail(f) if tail else None
    if model is not None:
        if model.a_right:
            out += model.a_right * _tail_transform(model.p, model.right_edge, xi)
        if model.a_left:
            out += model.a_left * np.conj(_tail_transform(model.p, -model.left_edge, xi))
    mass = float(np.sum(w))
    m2 = float(np.sum(w * x * x))
    if model is not None:
        # the tail changes the curvature; measure it from the closed transform
        state = SpectralState(grid, out)
        mass = state.values[0].real
        m2 = -state.curvature
        curvature = None
    else:
        # the discrete transform's second derivative at 0 is exactly -sum(w x^2)
        curvature = -m2
    if energy is None:
        energy = m2 / mass if mass > 0 and m2 > 0 else 1.0
    return SpectralState(grid, out, energy, curvature)


def to_physical(s: SpectralState, grid: VelocityGrid, chunk: int = 512) -> Field:
    """Inverse transform ``(1/pi) Re int_0^inf phi(xi) exp(i x xi) dxi`` (trapezoid)."""
    xi = s.grid.xi
    w = np.full(xi.size, s.grid.dxi)
    w[0] *= 0.5
    w[-1] *= 0.5
    v = np.asarray(s.values) * w
    x = grid.x
    out = np.empty(x.size)
    for start in range(0, x.size, chunk):
        arg = np.outer(x[start:start + chunk], xi)
        out[start:start + chunk] = np.cos(arg) @ v.real - np.sin(arg) @ v.imag
    return Field(grid, out / math.pi)
