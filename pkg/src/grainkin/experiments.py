"""The six reproducible experiments behind ``grainkin run``.

Each runner takes plain numeric parameters, performs one experiment and
returns an :class:`Outcome`: a time series for ``series.csv`` and a list of
report rows for ``report.csv``.  Rows compare a measured value either with a
constant stated for the model (provenance ``paper``) or with an independent
quadrature (provenance ``oracle``); rows without a pass/fail verdict carry the
status ``report``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from . import linstab as ls
from . import maxwell_fourier as mf
from . import selfsim as ss
from .collision import (CollisionParams, collision_freq, dissipation_integral,
                        energy_production, i0_functional, i_gamma_functional, l2_norm,
                        moment, q_plus, weak_apply, weighted_norm)
from .errors import NotConvergedError
from .grid import Field, FrequencyGrid, integrate, make_grid, sample
from .profiles import (A0, LAMBDA0, LOG2, bimodal, gaussian, kernel_element,
                       maxwell_profile, scaled_kernel_element, g0_profile)

__all__ = [
    "Row",
    "Outcome",
    "constants",
    "maxwell_fourier",
    "maxwell_physical",
    "profile",
    "uniqueness_probe",
    "gap",
    "EXPERIMENTS",
]


@dataclass(frozen=True)
class Row:
    key: str
    value: float
    reference: float | None = None
    provenance: str = "oracle"
    status: str = "report"


@dataclass
class Outcome:
    columns: list[str]
    series: list[tuple] = dc_field(default_factory=list)
    rows: list[Row] = dc_field(default_factory=list)

    def add(self, key, value, reference=None, provenance="oracle", ok=None) -> Row:
        status = "report" if ok is None else ("pass" if ok else "fail")
        row = Row(key, float(value), None if reference is None else float(reference),
                  provenance, status)
        self.rows.append(row)
        return row

    def row(self, key: str) -> Row:
        for r in self.rows:
            if r.key == key:
                return r
        raise KeyError(key)

    @property
    def failed(self) -> list[Row]:
        return [r for r in self.rows if r.status == "fail"]


def _close(value, target, rel=None, abs_=None) -> bool:
    err = abs(value - target)
    return err <= (abs_ if abs_ is not None else rel * abs(target))


# ------------------------------------------------------------ constants

def constants(L: float = 200.0, N: int = 2**14, xi_max: float = 60.0, M: int = 8192,
              seed: int = 0, trios: int = 100) -> Outcome:
    """Explicit constants of the Maxwell case measured by quadrature."""
    out = Outcome(["t"])
    grid = make_grid(L, N)
    H = sample(maxwell_profile, grid)
    g0 = sample(kernel_element, grid)

    i0_hh = i0_functional(H, H, tail=True)
    a0 = 0.5 * i0_hh
    out.add("A0", a0, A0, "paper", _close(a0, A0, rel=0.01))
    out.add("lambda0", math.exp(a0), LAMBDA0, "paper", _close(math.exp(a0), LAMBDA0, rel=0.01))
    out.add("I0_HH", i0_hh, 2 * LOG2 + 1, "paper", _close(i0_hh, 2 * LOG2 + 1, rel=0.01))

    fg = FrequencyGrid(xi_max, M)
    err = float(np.max(np.abs(mf.to_spectral(H, fg).values - mf.equilibrium_phi(fg.xi))))
    out.add("spectral_H_maxerr", err, 0.0, "paper", err <= 1e-4)

    x2log = integrate(g0, lambda x: x * x * np.log(np.abs(np.where(x == 0, 1.0, x))), tail=True)
    out.add("g0_x2log", x2log, -3.0, "paper", _close(x2log, -3.0, abs_=1e-3))
    m2_g0 = moment(g0, 2.0, tail=True)
    out.add("M2_g0", m2_g0, -2.0, "paper", _close(m2_g0, -2.0, abs_=1e-4))

    # the two values stated for I0(g0, H); exactly one should match
    i0_g0h = i0_functional(g0, H, tail=True)
    candidates = {"I0_g0H_is_-2log2-2": -2 * LOG2 - 2, "I0_g0H_is_-2log2-5": -2 * LOG2 - 5}
    hits = [_close(i0_g0h, v, rel=0.01) for v in candidates.values()]
    out.add("I0_g0H", i0_g0h, None, "oracle", sum(hits) == 1)
    for (key, v), hit in zip(candidates.items(), hits):
        out.add(key, float(hit), v, "paper")
    # rescaling both arguments by lam0: I0(phi0, G0) = (I0(g0, H) + 2 log lam0) / lam0**3,
    # the log term coming from int int g0 H |x-y|^2 = M2(g0) = -2
    phi0 = sample(scaled_kernel_element, grid)
    G0 = sample(g0_profile, grid)
    i0_phi = i0_functional(phi0, G0, tail=True)
    induced = (i0_g0h + 2.0 * math.log(LAMBDA0)) / LAMBDA0**3
    out.add("I0_phi0_G0", i0_phi, induced, "oracle", _close(i0_phi, induced, rel=0.01))
    out.add("I0_phi0_G0_vs_-1/lam0^3", i0_phi, -1.0 / LAMBDA0**3, "paper",
            _close(i0_phi, -1.0 / LAMBDA0**3, rel=0.01))

    e = weak_apply(H, H, lambda x: x * x, CollisionParams(0.0), tail=True)
    out.add("weak_x2_HH", e, -0.5, "oracle", _close(e, -0.5, abs_=1e-3))

    worst = q_plus_bound_ratio(seed, trios)
    out.add("Qplus_L2_bound_max_ratio", worst, 1.0, "paper", worst <= 1.0)
    return out


def q_plus_bound_ratio(seed: int = 0, trios: int = 100, L: float = 10.0, N: int = 256) -> float:
    """Largest ratio ``int Q0+(f,g) h / (sqrt2 ||h||_2 min(...))`` over random trios."""
    rng = np.random.default_rng(seed)
    grid = make_grid(L, N)
    x = grid.x
    p = CollisionParams(0.0)

    def draw():
        k = rng.integers(1, 4)
        s = np.zeros(N)
        for _ in range(k):
            s += rng.uniform(0.2, 2.0) * np.exp(-((x - rng.uniform(-4, 4)) / rng.uniform(0.3, 2.0)) ** 2)
        return Field(grid, s)

    worst = 0.0
    for _ in range(trios):
        f, g, h = draw(), draw(), draw()
        lhs = grid.h * float(np.sum(q_plus(f, g, p).samples * h.samples))
        l1f, l1g = grid.h * f.samples.sum(), grid.h * g.samples.sum()
        rhs = math.sqrt(2.0) * l2_norm(h) * min(l1f * l2_norm(g), l1g * l2_norm(f))
        worst = max(worst, lhs / rhs)
    return worst


# ------------------------------------------------------------ Fourier solver

def _contraction_run(state: mf.SpectralState, step: Callable, target: Callable,
                     T: float, dt: float, ks: Sequence[float],
                     kps: Sequence[tuple[float, float]] = (), frame_every: float = 1.0):
    """Evolve ``state`` and record the norms of ``target(state)`` per frame."""
    def measure(s):
        d = target(s)
        return ([mf.fourier_norm_k(d, k) for k in ks]
                + [mf.fourier_norm_kp(d, k, p) for k, p in kps])

    rows = [(0.0, *measure(state), mf.second_derivative_at_zero(state))]
    n_steps = int(math.ceil(T / dt - 1e-9))
    every = max(1, int(round(frame_every / dt)))
    s = state
    for n in range(1, n_steps + 1):
        s = step(s, dt)
        if n % every == 0 or n == n_steps:
            rows.append((n * dt, *measure(s), mf.second_derivative_at_zero(s)))
    norms = np.array(rows, dtype=float)
    return norms, s


def _worst_ratio(times, values, v0, rate) -> float:
    """Largest ``value(t) / (value(0) exp(-rate t))`` over the frames after ``t = 0``."""
    return float(np.max(values[1:] / (v0 * np.exp(-rate * times[1:]))))


def maxwell_fourier(xi_max: float = 60.0, M: int = 8192, dt: float = 0.01, T: float = 50.0,
                    ks: Sequence[float] = (2.2, 2.5, 2.8),
                    kps: Sequence[tuple[float, float]] = ((2.8, 2.0), (3.0, 2.0)),
                    linear_T: float | None = None, kernel_T: float = 10.0) -> Outcome:
    """Contraction of the nonlinear and linearized Fourier flows toward ``Phi``."""
    ks = list(ks)
    cols = ([f"knorm_{k:g}" for k in ks] + [f"kpnorm_{k:g}_{p:g}" for k, p in kps]
            + ["curvature"])
    out = Outcome(["t"] + cols)
    fg = FrequencyGrid(xi_max, M)

    start = mf.SpectralState(fg, np.exp(-0.5 * fg.xi**2), 1.0, -1.0)
    data, final = _contraction_run(start, mf.step_nonlinear, lambda s: s.deviation(),
                                   T, dt, ks, kps)
    out.series = [tuple(r) for r in data]
    t = data[:, 0]
    for i, k in enumerate(ks):
        col = data[:, 1 + i]
        worst = _worst_ratio(t, col, col[0], mf.sigma_k(k))
        out.add(f"contraction_ratio_{k:g}", worst, 1.05, "paper", worst <= 1.05)
    for j, (k, p) in enumerate(kps):
        col = data[:, 1 + len(ks) + j]
        worst = _worst_ratio(t, col, col[0], mf.sigma_kp(k, p))
        out.add(f"contraction_ratio_{k:g}_{p:g}", worst, 1.05, "paper", worst <= 1.05)
    for i, k in enumerate(ks):
        fit = mf.fit_decay_rate(zip(t, data[:, 1 + i]))
        ok = fit.rate >= 0.7 * mf.sigma_k(k) if k == 2.5 else None
        out.add(f"sigma_hat_{k:g}", fit.rate, mf.sigma_k(k), "paper", ok)
    # the carried curvature is exact; the one measured from the first nodes
    # picks up the growth of high Taylor coefficients under the transport
    curv = data[:, -1]
    early = t <= min(10.0, T)
    rate = float(np.max(np.abs(curv[early] - curv[0])) / max(t[early][-1], dt))
    out.add("curvature_drift_rate_early", rate, 1e-6, "paper", rate <= 1e-6)
    out.add("curvature_drift_measured", float(np.max(np.abs(curv - curv[0]))), 0.0, "oracle")
    out.add("curvature_carried", final.curvature, -1.0, "paper", final.curvature == -1.0)
    out.add("mass_drift", abs(final.values[0].real - 1.0), 0.0, "oracle",
            abs(final.values[0].real - 1.0) <= 1e-12)

    # linearized flow from a perturbation with three vanishing Taylor coefficients
    lin0 = mf.SpectralState(fg, fg.xi**3 * np.exp(-fg.xi), 1.0, 0.0)
    ldata, _ = _contraction_run(lin0, mf.step_linearized, lambda s: s,
                                linear_T or T, dt, ks)
    lt = ldata[:, 0]
    for i, k in enumerate(ks):
        col = ldata[:, 1 + i]
        worst = _worst_ratio(lt, col, col[0], mf.sigma_k(k))
        out.add(f"linear_contraction_ratio_{k:g}", worst, 1.05, "paper", worst <= 1.05)

    psi0 = mf.kernel_mode(fg)
    s = psi0
    drift = 0.0
    for _ in range(int(round(kernel_T / dt))):
        s = mf.step_linearized(s, dt)
        drift = max(drift, float(np.max(np.abs(s.values - psi0.values))))
    out.add("psi0_drift", drift, 1e-5, "paper", drift <= 1e-5)
    return out


# ------------------------------------------------------------ physical solver

def maxwell_physical(L: float = 200.0, N: int = 2**14, dt: float = 0.05, T: float = 50.0,
                     gamma: float = 0.0, c: float = 0.25, xi_max: float = 40.0, M: int = 2048,
                     frame_every: float = 1.0, spectral_every: float = 2.5,
                     early_frames: int = 5) -> Outcome:
    """Self-similar evolution from a unit Gaussian in physical space."""
    p = CollisionParams(gamma, c)
    grid = make_grid(L, N)
    g0 = sample(lambda x: gaussian(x, 1.0), grid)
    traj = ss.evolve(g0, p, T, dt, frame_every=frame_every, residuals=False)
    fg = FrequencyGrid(xi_max, M)
    out = Outcome(["t", "mass", "momentum", "energy", "knorm_2.5"])
    stride = max(1, int(round(spectral_every / frame_every)))
    spectral = []
    for i, (t, f, r) in enumerate(zip(traj.times, traj.frames, traj.reports)):
        kn = float("nan")
        if gamma == 0.0 and i % stride == 0:
            kn = mf.fourier_norm_k(mf.to_spectral(f, fg).deviation(), 2.5)
            spectral.append((t, kn))
        out.series.append((t, r.mass, r.momentum, r.energy, kn))

    reps = traj.reports
    mass = max(abs(r.mass - reps[0].mass) for r in reps)
    mom = max(abs(r.momentum - reps[0].momentum) for r in reps)
    out.add("mass_drift", mass, 1e-8, "oracle", mass <= 1e-8)
    out.add("momentum_drift", mom, 1e-8, "oracle", mom <= 1e-8)
    e = np.array([r.energy for r in reps])
    drift = float(np.max(np.abs(e / e[0] - 1.0)))
    ok = drift <= 0.02 if (gamma == 0.0 and c == 0.25) else None
    out.add("energy_drift_rel", drift, 0.02, "paper", ok)

    worst = 0.0
    for f in traj.frames[:early_frames]:
        lhs = energy_production(f, p)
        rhs = -0.25 * dissipation_integral(f, gamma)
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    out.add("dissipation_identity_rel", worst, 1e-6, "oracle", worst <= 1e-6)

    if gamma == 0.0 and len(spectral) >= 5 and all(np.isfinite(v) and v > 0 for _, v in spectral):
        fit = mf.fit_decay_rate(spectral)
        out.add("sigma_hat_2.5_physical", fit.rate, mf.sigma_k(2.5), "paper",
                fit.rate >= 0.7 * mf.sigma_k(2.5))
    return out


# ------------------------------------------------------------ steady profiles

def initial_profile(kind: str, gamma: float, grid, c: float = 0.25) -> Field:
    """Admissible starts of the same energy: the balanced Maxwell profile, a Gaussian, a bimodal."""
    lam = ss.warm_start_scale(gamma, c)
    energy = lam**-2
    fn = {"maxwell": lambda x: maxwell_profile(x, lam),
          "gaussian": lambda x: gaussian(x, energy),
          "bimodal": lambda x: bimodal(x, energy)}[kind]
    g = sample(fn, grid)
    return g * (1.0 / (grid.h * g.samples.sum()))


def _solve_profile(gamma, c, L, N, dt, tol, max_time, a, start="maxwell"):
    grid = make_grid(L, N)
    p = CollisionParams(gamma, c)
    return ss.steady_profile(p, tol, initial_profile(start, gamma, grid, c), dt=dt, a=a,
                             max_time=max_time)


def profile(gamma: float = 0.1, c: float = 0.25, L: float = 40.0, N: int = 4096,
            dt: float = 0.1, tol: float = 1e-4, T: float = 3000.0, a: float = 2.5,
            gammas: Sequence[float] = ()) -> Outcome:
    """Steady profile at ``gamma`` with its diagnostics, plus an optional sweep."""
    out = Outcome(["t", "dt", "residual"])
    try:
        prof = _solve_profile(gamma, c, L, N, dt, tol, T, a)
        converged = True
    except NotConvergedError as err:
        prof, converged = err.best, False
    G = prof.field
    out.series = [tuple(h) for h in prof.history]
    out.add("residual", prof.residual, tol, "oracle", converged and prof.residual < tol)
    out.add("lambda_gamma", prof.lam, LAMBDA0, "paper")
    m2 = moment(G, 2.0, tail=True)
    out.add("M2", m2, 0.5, "paper", 0.0 < m2 <= 0.5)
    ig = i_gamma_functional(G, G, gamma, tail=True)
    out.add("I_gamma", ig, 10 * tol, "paper", abs(ig) <= 10 * tol)
    out.add("mass", moment(G, 0.0), 1.0, "oracle", abs(moment(G, 0.0) - 1.0) <= 1e-8)
    mom = float(G.grid.h * np.sum(G.x * G.samples))
    out.add("momentum", mom, 0.0, "oracle", abs(mom) <= 1e-8)
    xg = float(np.max(np.abs(G.x) * G.samples))
    bound = 8.0 * weighted_norm(G, gamma) * 2.0
    out.add("pointwise_xG", xg, bound, "paper", xg <= bound)
    # Jensen for the concave |.|**gamma gives Sigma(y) <= (M2 + y^2)**(gamma/2)
    sig = collision_freq(G, gamma).samples
    y = G.x
    out.add("jensen_excess_abs_y", float(np.max(sig - np.abs(y) ** gamma)), 0.0, "paper")
    jensen = float(np.max(sig - (moment(G, 2.0) + y * y) ** (gamma / 2)))
    out.add("jensen_excess_m2", jensen, 0.0, "oracle", jensen <= 1e-12)
    out.add("time", prof.time, None, "oracle")

    if gammas:
        lams = []
        for gm in gammas:
            if gm == gamma:
                lam = prof.lam
            else:
                try:
                    lam = _solve_profile(gm, c, L, N, dt, tol, T, a).lam
                except NotConvergedError as err:
                    lam = err.best.lam
            lams.append(lam)
            out.add(f"lambda_gamma_{gm:g}", lam, LAMBDA0, "paper")
        order = np.argsort(gammas)[::-1]
        gaps = [abs(lams[i] - LAMBDA0) for i in order]
        trend = all(b < a_ for a_, b in zip(gaps, gaps[1:]))
        out.add("lambda_trend_decreasing", float(trend), 1.0, "paper", trend)
    return out


def uniqueness_probe(gamma: float = 0.1, c: float = 0.25, L: float = 40.0, N: int = 4096,
                     dt: float = 0.1, tol: float = 1e-4, T: float = 3000.0,
                     a: float = 2.5) -> Outcome:
    """Steady profiles from a Gaussian and a symmetric bimodal start."""
    out = Outcome(["t", "residual_gaussian", "residual_bimodal"])
    profiles = {}
    ok = True
    for kind in ("gaussian", "bimodal"):
        try:
            profiles[kind] = _solve_profile(gamma, c, L, N, dt, tol, T, a, start=kind)
        except NotConvergedError as err:
            profiles[kind], ok = err.best, False
        out.add(f"residual_{kind}", profiles[kind].residual, tol, "oracle",
                profiles[kind].residual < tol)
        out.add(f"lambda_{kind}", profiles[kind].lam, LAMBDA0, "paper")
    hist = {k: {round(t, 9): r for t, _, r in v.history} for k, v in profiles.items()}
    for t in sorted(set(hist["gaussian"]) | set(hist["bimodal"])):
        out.series.append((t, hist["gaussian"].get(t, float("nan")),
                           hist["bimodal"].get(t, float("nan"))))
    diff = weighted_norm(profiles["gaussian"].field - profiles["bimodal"].field, 2.5)
    out.add("profile_l1wa_gap", diff, 20 * tol, "paper", ok and diff <= 20 * tol)
    return out


# ------------------------------------------------------------ spectral gap

def gap(a: float = 2.5, L: float = 200.0, N: int = 2**14, dt: float = 0.05,
        T: float = 100.0) -> Outcome:
    """Decay of the linearized flow at ``G0`` on the zero-moment subspace."""
    grid = make_grid(L, N)
    bound = ls.spectral_gap_bound(a)
    bump = sample(lambda x: gaussian(x, 0.3, center=0.5), grid)
    h0 = ls.project_Y0(bump)
    phi0 = sample(ls.phi0, grid)
    s_h, s_phi = [], []
    fit_h = ls.spectral_gap_estimate(a, h0, T, dt, series=s_h)
    fit_phi = ls.spectral_gap_estimate(a, phi0, T, dt, series=s_phi)
    out = Outcome(["t", "norm_h", "norm_phi0"])
    out.series = [(t, v, w) for (t, v), (_, w) in zip(s_h, s_phi)]
    out.add("gap_bound", bound, 1 - a / 4 - 2 ** (1 - a), "paper")
    out.add("nu_hat", fit_h.rate, 0.7 * bound, "paper", fit_h.rate >= 0.7 * bound)
    out.add("phi0_sigma_hat", fit_phi.rate, 0.0, "paper", abs(fit_phi.rate) <= 2e-3)
    G0 = ls._operator(grid).G0
    i0 = i0_functional(phi0, G0, tail=True)
    out.add("I0_phi0_G0", i0, -1.0 / LAMBDA0**3, "oracle", _close(i0, -1.0 / LAMBDA0**3, rel=0.01))
    out.add("L0_phi0_residual", weighted_norm(ls.l0_apply(phi0), a), 0.0, "oracle")
    return out


EXPERIMENTS = {
    "constants": (constants, "explicit constants A0, lambda0, I0(H,H), I0(g0,H); L, N, xi_max, M, seed"),
    "gap": (gap, "spectral gap of the operator linearized at G0 in L1(w_a); a, L, N, dt, T"),
    "maxwell-fourier": (maxwell_fourier, "Fourier-norm contraction toward Phi; xi_max, M, dt, T, k-list"),
    "maxwell-physical": (maxwell_physical, "physical-space Maxwell run, conservation and energy; gamma, c, L, N, dt, T"),
    "profile": (profile, "steady self-similar profile and limiting temperature; gamma, c, L, N, dt, T, tol, a"),
    "uniqueness-probe": (uniqueness_probe, "profiles from two initial data compared; gamma, c, L, N, dt, T, tol"),
}
