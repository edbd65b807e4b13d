"""The Maxwell operator linearized at G0 and its spectral gap in ``L^1(w_a)``.

``G0 = lam0 H(lam0 x)`` with ``lam0 = 2 sqrt(e)`` is always sampled from the
closed form so the linearization referent carries no solver error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .collision import CollisionParams, q_plus, weighted_norm
from .errors import DivergedError, InvalidArgument
from .grid import Field, VelocityGrid, quadrature
from .maxwell_fourier import DecayFit, fit_decay_rate
from .profiles import LAMBDA0, g0_profile, kernel_element, scaled_kernel_element
from .selfsim import derivative, drift_step

__all__ = [
    "ProjectionBasis",
    "LinearizedOperator",
    "g0_kernel",
    "phi0",
    "moments3",
    "l0_apply",
    "project_P",
    "project_Y0",
    "spectral_gap_bound",
    "spectral_gap_estimate",
]

_MAXWELL = CollisionParams(0.0, 0.25)


def g0_kernel(x):
    """``g0(x) = (2/pi) (1 - 3x^2) / (1 + x^2)^3``."""
    return kernel_element(x)


def phi0(x):
    """``phi0(x) = g0(lam0 x)``, the kernel direction of the linearized operator."""
    return scaled_kernel_element(x)


def moments3(f: Field) -> np.ndarray:
    """Quadrature mass, momentum and energy of ``f``."""
    x = f.x
    w = f.grid.h * np.asarray(f.samples)
    return np.array([np.sum(w), np.sum(w * x), np.sum(w * x * x)])


@dataclass(frozen=True)
class ProjectionBasis:
    """Hermite-weighted profiles ``zeta_1..3`` and their quadrature moment matrix."""

    grid: VelocityGrid

    @cached_property
    def profiles(self) -> np.ndarray:
        x = self.grid.x
        m = np.exp(-x * x) / math.sqrt(math.pi)
        return np.stack([(1.5 - x * x) * m, 2.0 * x * m, (-1.0 + 2.0 * x * x) * m])

    @cached_property
    def matrix(self) -> np.ndarray:
        """``B[i, j]`` = moment ``i`` (1, x, x^2) of ``zeta_j``; the identity up to quadrature."""
        h = self.grid.h
        x = self.grid.x
        z = self.profiles
        return np.stack([h * z @ np.ones_like(x), h * z @ x, h * z @ (x * x)])

    def zeta(self, i: int) -> Field:
        return Field(self.grid, self.profiles[i - 1])

    def combine(self, moments) -> np.ndarray:
        """Samples of the combination of ``zeta``'s carrying ``moments``."""
        coef = np.linalg.solve(self.matrix, np.asarray(moments, dtype=float))
        return coef @ self.profiles


def _basis(grid: VelocityGrid) -> ProjectionBasis:
    return ProjectionBasis(grid)


def project_P(f: Field, basis: ProjectionBasis | None = None) -> Field:
    """Moment projection: the ``zeta`` combination with the mass, momentum and energy of ``f``."""
    basis = basis or _basis(f.grid)
    if not basis.grid.compatible(f.grid):
        raise InvalidArgument("basis and field live on different grids")
    return Field(f.grid, basis.combine(moments3(f)))


def project_Y0(f: Field, basis: ProjectionBasis | None = None) -> Field:
    """``f - P f``: zero mass, momentum and energy."""
    return Field(f.grid, f.samples - project_P(f, basis).samples)


class LinearizedOperator:
    """``L0 h = Q0(h, G0) + Q0(G0, h) - 1/4 d/dx(x h)`` on a fixed grid."""

    def __init__(self, grid: VelocityGrid):
        self.grid = grid
        self.G0 = Field(grid, g0_profile(grid.x))
        self.mass_G0 = quadrature(self.G0)
        self.c = _MAXWELL.c

    def _check(self, h: Field) -> None:
        if not self.grid.compatible(h.grid):
            raise InvalidArgument("perturbation lives on a different grid than G0")

    def collision_part(self, h: Field) -> np.ndarray:
        self._check(h)
        gain = q_plus(h, self.G0, _MAXWELL).samples + q_plus(self.G0, h, _MAXWELL).samples
        loss = h.samples * self.mass_G0 + self.G0.samples * quadrature(h)
        return gain - loss

    def __call__(self, h: Field) -> Field:
        drift = -self.c * derivative(h.x * h.samples, h.grid.h)
        return Field(h.grid, self.collision_part(h) + drift)


_operators: dict = {}


def _operator(grid: VelocityGrid) -> LinearizedOperator:
    key = (grid.L, grid.N)
    if key not in _operators:
        _operators.clear()
        _operators[key] = LinearizedOperator(grid)
    return _operators[key]


def l0_apply(h: Field, op: LinearizedOperator | None = None) -> Field:
    """Apply the linearized operator at G0 (cached per grid unless ``op`` is given)."""
    op = op or _operator(h.grid)
    return op(h)


def spectral_gap_bound(a: float) -> float:
    """``1 - a/4 - 2**(1-a)``, the decay rate below which the gap is guaranteed."""
    return 1.0 - a / 4.0 - 2.0 ** (1.0 - a)


def _drift(h: Field, dt: float, c: float) -> Field:
    """Exact characteristics for signed data (no moment correction)."""
    return drift_step(h, dt, c, fix_moments=False)


def spectral_gap_estimate(a: float, h0: Field, T: float, dt: float,
                          frame_every: float = 1.0, window: tuple[float, float] | None = None,
                          pin_moments: bool = True, series: list | None = None) -> DecayFit:
    """Evolve ``dh/dt = L0 h`` and fit the decay of ``||h(t)||_{L^1(w_a)}``.

    Strang splitting as in the nonlinear solver: exact drift half steps around
    an RK2 step of the linear collision term.  For data with zero mass and
    momentum the exact flow keeps mass, momentum and energy constant; with
    ``pin_moments`` those three are reset to their initial values after each
    step through the ``zeta`` basis, which removes round-off leakage into the
    growing momentum direction.  The rate is fitted on ``window``
    (default ``[T/2, T]``).  ``series``, if given, receives ``(t, norm)``.
    """
    if not 2.0 < a < 3.0:
        raise InvalidArgument("a must lie in (2, 3)")
    if not T > 0 or not 0 < dt <= 0.5:
        raise InvalidArgument("need T > 0 and dt in (0, 0.5]")
    op = _operator(h0.grid)
    basis = _basis(h0.grid)
    target = moments3(h0)
    h = h0
    out = [] if series is None else series
    out.append((0.0, weighted_norm(h, a)))
    n_steps = int(math.ceil(T / dt - 1e-9))
    every = max(1, int(round(frame_every / dt)))
    c = op.c
    for n in range(1, n_steps + 1):
        h = _drift(h, 0.5 * dt, c)
        k1 = op.collision_part(h)
        mid = Field(h.grid, h.samples + dt * k1)
        k2 = op.collision_part(mid)
        h = Field(h.grid, h.samples + 0.5 * dt * (k1 + k2))
        h = _drift(h, 0.5 * dt, c)
        if pin_moments:
            h = Field(h.grid, h.samples - basis.combine(moments3(h) - target))
        if not np.isfinite(h.samples).all() or np.abs(h.samples).max() > 1e12:
            raise DivergedError("linearized evolution blew up", n * dt, None)
        if n % every == 0 or n == n_steps:
            out.append((n * dt, weighted_norm(h, a)))
    win = window or (0.5 * T, T)
    return fit_decay_rate(out, win)
