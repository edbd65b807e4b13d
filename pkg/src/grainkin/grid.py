"""Uniform velocity and frequency grids, quadrature and interpolation.

Every density in the package lives on a :class:`VelocityGrid` with nodes
``x_j = (j - N/2) h``; integrals are rectangle sums.  Densities with
algebraic tails (the Maxwell profile decays like ``|x|**-4``) lose a
visible part of their high moments to the truncation, so a fitted power-law
tail model is available to close integrals beyond the box.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "VelocityGrid",
    "FrequencyGrid",
    "Field",
    "PowerTail",
    "make_grid",
    "sample",
    "quadrature",
    "interpolate",
    "cubic_weights",
    "lagrange_weights",
    "fit_power_tail",
    "extended_rule",
    "integrate",
]


@dataclass(frozen=True)
class VelocityGrid:
    """``N`` nodes covering ``[-L, L)`` with spacing ``h = 2L/N``."""

    L: float
    N: int

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def x(self) -> np.ndarray:
        nodes = (np.arange(self.N) - self.N // 2) * self.h
        nodes.setflags(write=False)
        return nodes

    @property
    def center(self) -> int:
        """Index of the node at ``x = 0``."""
        return self.N // 2

    def doubled_index(self, j):
        """Index of the node at ``2 x_j`` (may fall outside ``[0, N)``)."""
        return 2 * np.asarray(j) - self.N // 2

    def compatible(self, other: "VelocityGrid") -> bool:
        return self.N == other.N and self.L == other.L


def make_grid(L: float, N: int) -> VelocityGrid:
    if not (L > 0 and np.isfinite(L)):
        raise InvalidArgument(f"half width L must be positive, got {L!r}")
    if int(N) != N or N < 4 or N % 2:
        raise InvalidArgument(f"node count N must be an even integer >= 4, got {N!r}")
    return VelocityGrid(float(L), int(N))


@dataclass(frozen=True)
class FrequencyGrid:
    """Nonnegative frequencies ``xi_m = m * xi_max / M`` for ``m = 0..M``.

    Negative frequencies are recovered by conjugation, so only the half axis
    is stored.
    """

    xi_max: float
    M: int
    xi_floor: float = 0.0

    def __post_init__(self):
        if not self.xi_max > 0:
            raise InvalidArgument("xi_max must be positive")
        if int(self.M) != self.M or self.M < 4:
            raise InvalidArgument("M must be an integer >= 4")

    @property
    def dxi(self) -> float:
        return self.xi_max / self.M

    @cached_property
    def xi(self) -> np.ndarray:
        nodes = np.arange(self.M + 1) * self.dxi
        nodes.setflags(write=False)
        return nodes

    @property
    def xi_min(self) -> float:
        return max(self.dxi, self.xi_floor)

    @property
    def first_admitted(self) -> int:
        """Index of the smallest node used by sup-norms."""
        return int(np.searchsorted(self.xi, self.xi_min * (1 - 1e-12)))


class Field:
    """Real samples of a function on a :class:`VelocityGrid`."""

    __slots__ = ("grid", "samples")

    def __init__(self, grid: VelocityGrid, samples):
        samples = np.array(samples, dtype=float)
        if samples.shape != (grid.N,):
            raise InvalidArgument(
                f"expected {grid.N} samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InvalidArgument("field samples must be finite")
        samples.setflags(write=False)
        self.grid = grid
        self.samples = samples

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def _check(self, other: "Field") -> None:
        if not self.grid.compatible(other.grid):
            raise InvalidArgument("fields live on different grids")

    def with_samples(self, samples) -> "Field":
        return Field(self.grid, samples)

    def __add__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.samples + other.samples)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.samples - other.samples)
        return NotImplemented

    def __mul__(self, other):
        if np.isscalar(other):
            return Field(self.grid, self.samples * other)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.samples)

    def __repr__(self):
        return f"Field(L={self.grid.L}, N={self.grid.N})"

    def is_probability_like(self, tol: float = 1e-6) -> bool:
        return bool(self.samples.min() >= 0 and abs(quadrature(self) - 1) <= tol)


def sample(fn: Callable[[np.ndarray], np.ndarray], grid: VelocityGrid) -> Field:
    """Evaluate a vectorized callable on the grid nodes."""
    return Field(grid, fn(grid.x))


def quadrature(f: Field) -> float:
    return float(f.grid.h * np.sum(f.samples))


def cubic_weights(theta):
    """Four-point Lagrange weights for offsets -1, 0, 1, 2 at fraction ``theta``."""
    t = np.asarray(theta, dtype=float)
    return (
        -t * (t - 1) * (t - 2) / 6,
        (t + 1) * (t - 1) * (t - 2) / 2,
        -(t + 1) * t * (t - 2) / 2,
        (t + 1) * t * (t - 1) / 6,
    )


def lagrange_weights(theta, points: int = 4):
    """Lagrange weights for the ``points`` nodes around fraction ``theta``.

    Node offsets run from ``1 - points/2`` to ``points/2``; ``points = 4``
    reproduces :func:`cubic_weights`.
    """
    if points < 2 or points % 2:
        raise InvalidArgument("points must be an even integer >= 2")
    t = np.asarray(theta, dtype=float)
    offsets = np.arange(1 - points // 2, points // 2 + 1)
    weights = []
    for m in offsets:
        w = np.ones_like(t)
        for k in offsets:
            if k != m:
                w = w * (t - k) / (m - k)
        weights.append(w)
    return tuple(weights)


def interpolate(f: Field, x, points: int = 4):
    """Lagrange interpolation (cubic by default); zero outside ``[-L, L)``.

    Accepts a scalar or an array of abscissae.  ``points = 6`` selects the
    quintic stencil.
    """
    grid = f.grid
    xa = np.asarray(x, dtype=float)
    t = (xa + grid.L) / grid.h
    inside = (t >= 0) & (xa < grid.L)
    t = np.where(inside, t, 0.0)
    j = np.floor(t).astype(np.int64)
    theta = t - j
    half = points // 2
    # zeros on each side absorb stencils that straddle the box edge
    pad = np.zeros(half)
    padded = np.concatenate((pad, f.samples, pad))
    w = cubic_weights(theta) if points == 4 else lagrange_weights(theta, points)
    out = sum(wk * padded[j + 1 + k] for k, wk in enumerate(w))
    out = np.where(inside, out, 0.0)
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class PowerTail:
    """``f(x) ~ a |x|**-p`` beyond the box, one amplitude per side.

    ``left_edge``/``right_edge`` are the outer cell boundaries of the grid,
    where the tail integrals start.
    """

    p: float
    a_left: float
    a_right: float
    left_edge: float
    right_edge: float

    def nodes(self, n: int = 48):
        """Quadrature nodes, weights and tail values on both sides."""
        u, wu = np.polynomial.legendre.leggauss(n)
        u = 0.5 * (u + 1.0)
        wu = 0.5 * wu
        xs, ws, vs = [], [], []
        for edge, amp in ((self.left_edge, self.a_left), (self.right_edge, self.a_right)):
            if amp == 0.0:
                continue
            # x = b / u**2 maps (0, 1] onto the half line beyond b
            xt = edge / u**2
            wt = wu * 2.0 * abs(edge) / u**3
            xs.append(xt)
            ws.append(wt)
            vs.append(amp * np.abs(xt) ** (-self.p))
        if not xs:
            empty = np.zeros(0)
            return empty, empty, empty
        return np.concatenate(xs), np.concatenate(ws), np.concatenate(vs)


def fit_power_tail(f: Field, window: int | None = None, p_max: float = 60.0) -> PowerTail | None:
    """Fit ``a |x|**-p`` to the outermost samples of ``f``.

    Returns ``None`` when the edge samples vanish or change sign, in which
    case the truncation is already negligible or no algebraic tail exists.
    """
    grid = f.grid
    m = window or max(4, grid.N // 64)
    s = f.samples
    scale = np.max(np.abs(s)) if s.size else 0.0
    if scale == 0.0:
        return None
    sides = {}
    slopes = []
    for name, idx in (("left", np.arange(0, m)), ("right", np.arange(grid.N - m, grid.N))):
        vals = s[idx]
        xs = np.abs(grid.x[idx])
        if np.any(vals == 0) or not (np.all(vals > 0) or np.all(vals < 0)):
            sides[name] = None
            continue
        if np.min(np.abs(vals)) < 1e-280:
            sides[name] = None
            continue
        slope, _ = np.polyfit(np.log(xs), np.log(np.abs(vals)), 1)
        slopes.append(-slope)
        sides[name] = (xs[-1] if name == "right" else xs[0], vals[-1] if name == "right" else vals[0])
    if not slopes:
        return None
    p = float(np.clip(np.mean(slopes), 1.0 + 1e-9, p_max))
    amps = {}
    for name in ("left", "right"):
        if sides[name] is None:
            amps[name] = 0.0
        else:
            xe, ve = sides[name]
            amps[name] = float(ve * xe**p)
    h = grid.h
    return PowerTail(p, amps["left"], amps["right"], grid.x[0] - h / 2, grid.x[-1] + h / 2)


def extended_rule(f: Field, tail: bool | PowerTail | None = False, n_tail: int = 48):
    """Nodes, weights and values of ``f`` with optional tail nodes appended.

    With ``tail=True`` a :class:`PowerTail` is fitted to ``f``.  The returned
    rule integrates smooth weights against ``f`` over the whole line.
    """
    grid = f.grid
    xs = np.asarray(grid.x)
    ws = np.full(grid.N, grid.h)
    vs = np.asarray(f.samples)
    model = fit_power_tail(f) if tail is True else (tail or None)
    if model is not None:
        xt, wt, vt = model.nodes(n_tail)
        xs = np.concatenate((xs, xt))
        ws = np.concatenate((ws, wt))
        vs = np.concatenate((vs, vt))
    return xs, ws, vs


def integrate(f: Field, weight: Callable[[np.ndarray], np.ndarray] | None = None,
              tail: bool | PowerTail | None = False) -> float:
    """``int f(x) weight(x) dx``, optionally closed with the fitted tail."""
    xs, ws, vs = extended_rule(f, tail)
    if weight is not None:
        vs = vs * np.asarray(weight(xs), dtype=float)
    return float(np.sum(ws * vs))
