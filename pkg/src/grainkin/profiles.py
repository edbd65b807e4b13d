"""Closed-form densities and their Fourier transforms."""

from __future__ import annotations

import math

import numpy as np

LOG2 = math.log(2.0)
A0 = LOG2 + 0.5
LAMBDA0 = 2.0 * math.sqrt(math.e)  # exp(A0)


def maxwell_profile(x, lam: float = 1.0):
    """``lam * H(lam x)`` with ``H(x) = 2 / (pi (1 + x^2)^2)``; unit mass, energy ``lam**-2``."""
    y = lam * np.asarray(x, dtype=float)
    return lam * 2.0 / (np.pi * (1.0 + y * y) ** 2)


def g0_profile(x):
    """Steady profile ``G0 = lam0 H(lam0 x)`` selected in the small-gamma limit."""
    return maxwell_profile(x, LAMBDA0)


def cauchy(x):
    return 1.0 / (np.pi * (1.0 + np.asarray(x, dtype=float) ** 2))


def gaussian(x, energy: float = 1.0, center: float = 0.0):
    """Unit-mass Gaussian with second central moment ``energy``."""
    x = np.asarray(x, dtype=float) - center
    return np.exp(-x * x / (2 * energy)) / math.sqrt(2 * math.pi * energy)


def bimodal(x, energy: float = 1.0, separation: float = 0.8):
    """Symmetric mixture of two Gaussians with total second moment ``energy``.

    ``separation`` is the fraction of the energy carried by the offsets.
    """
    offset = math.sqrt(separation * energy)
    width = (1.0 - separation) * energy
    return 0.5 * (gaussian(x, width, offset) + gaussian(x, width, -offset))


def kernel_element(x):
    """``g0 = -G''`` for the Cauchy density; zero mass, energy -2."""
    x2 = np.asarray(x, dtype=float) ** 2
    return (2.0 / np.pi) * (1.0 - 3.0 * x2) / (1.0 + x2) ** 3


def scaled_kernel_element(x):
    """``phi0(x) = g0(lam0 x)``, in the kernel of the operator linearized at G0."""
    return kernel_element(LAMBDA0 * np.asarray(x, dtype=float))


def equilibrium_transform(xi):
    """Fourier transform of ``H``: ``(1 + |xi|) exp(-|xi|)``."""
    a = np.abs(np.asarray(xi, dtype=float))
    out = (1.0 + a) * np.exp(-a)
    return float(out) if np.ndim(xi) == 0 else out


def kernel_transform(xi):
    """Fourier transform of ``g0``: ``xi^2 exp(-|xi|)``."""
    a = np.abs(np.asarray(xi, dtype=float))
    out = a * a * np.exp(-a)
    return float(out) if np.ndim(xi) == 0 else out
