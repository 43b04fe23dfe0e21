"""Explicit bound formulas and the experiments that test them.

Mean-square estimates (both regimes) have the Gronwall form

    d/dt E||u||^2 + rate E||u||^2 <= K1 + K2 ||h(t)||^2

with, in the stochastic regime (gap = m lambda_1 - gamma4 - C_sigma^2):

    rate = 2 (1 - eps) gap,  K1 = 2 ||sigma~(0)||^2 + 2 gamma3 |O|,  K2 = 1 / (2 eps gap)

and, for random data without noise, ``rate = mu in (0, 2 m lambda_1)``,
``K1 = 2 beta |O|``, ``K2 = 1 / (2 m lambda_1 - mu)``.  The absorbing radius
is ``R(t) = 1 + K1/rate + K2 e^{-rate t} int_{-inf}^t e^{rate r} ||h(r)||^2 dr``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as sci_integrate

from . import spectral as sp
from .ensemble import FamilySpec, family_norm, require_universe, run_ensemble
from .integrate import simulate_path
from .model import ModeError, ModelParams, drift_array, reaction_modes
from .spectral import Basis, ConfigurationError, SpectralState


class RateRangeError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class DerivedConstants:
    mode: str
    rate: float
    epsilon: float
    K1: float
    K2: float
    beyond_stated_range: bool = False
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "rate": self.rate,
            "epsilon": self.epsilon,
            "K1": self.K1,
            "K2": self.K2,
            "beyond_stated_range": self.beyond_stated_range,
            "note": self.note,
        }


def derive_constants(
    params: ModelParams, basis: Basis, epsilon: float | None = None, rate: float | None = None
) -> DerivedConstants:
    """Constants of the mean-square Gronwall inequality.

    Give either the Young-split parameter ``epsilon`` or the decay ``rate``
    (default: ``params.rate``); the other follows.
    """
    if epsilon is not None and rate is not None:
        raise ValueError("give epsilon or rate, not both")
    if params.stochastic:
        c = params.stochastic_constants()
        gap = params.dissipation_gap(basis)
        if not gap > 0:
            raise RateRangeError(f"m lambda_1 - gamma4 - C_sigma^2 = {gap} leaves no admissible rate")
        upper = 2 * gap
        if epsilon is not None:
            if not 0 < epsilon < 1:
                raise RateRangeError(f"epsilon must lie in (0, 1), got {epsilon}")
            rate = 2 * (1 - epsilon) * gap
        else:
            rate = params.rate if rate is None else rate
            if not 0 < rate < upper:
                raise RateRangeError(f"rate {rate} outside (0, {upper})")
            epsilon = 1 - rate / upper
        K1 = 2 * params.sigma.at_zero_norm_sq(basis) + 2 * c.gamma3 * basis.L
        K2 = 1 / (2 * epsilon * gap)
        return DerivedConstants(
            "stochastic",
            rate,
            epsilon,
            K1,
            K2,
            beyond_stated_range=rate >= gap,
            note="rate = 2(1-eps)(m lam1 - gamma4 - C_sigma^2); K1 = 2|sigma(0)|^2 + 2 gamma3 |O|; K2 = 1/(2 eps gap)",
        )
    c = params.deterministic_constants()
    if c.beta is None:
        raise ConfigurationError("the reaction has no finite dissipativity constant beta")
    upper = 2 * params.a.m * basis.lambda1
    if epsilon is not None:
        if not 0 < epsilon < 1:
            raise RateRangeError(f"epsilon must lie in (0, 1), got {epsilon}")
        rate = (1 - epsilon) * upper
    else:
        rate = params.rate if rate is None else rate
        if not 0 < rate < upper:
            raise RateRangeError(f"rate {rate} outside (0, {upper})")
        epsilon = 1 - rate / upper
    return DerivedConstants(
        "deterministic",
        rate,
        epsilon,
        2 * c.beta * basis.L,
        1 / (upper - rate),
        note="K1 = 2 beta |O|; K2 = 1/(2 m lam1 - mu)",
    )


def _radius(t, params: ModelParams, consts: DerivedConstants):
    return 1.0 + consts.K1 / consts.rate + consts.K2 * params.forcing.scaled_integral(t, consts.rate)


def absorbing_radius_random(tau, params: ModelParams, consts: DerivedConstants):
    """Radius ``R(tau)`` of the absorbing family for random data without noise."""
    if params.stochastic:
        raise ModeError("use absorbing_radius_stochastic in stochastic mode")
    return _radius(tau, params, consts)


def absorbing_radius_stochastic(t, params: ModelParams, consts: DerivedConstants):
    """Radius ``R0(t)`` of the absorbing family ``K0(t)``."""
    if not params.stochastic:
        raise ModeError("use absorbing_radius_random in deterministic mode")
    return _radius(t, params, consts)


def absorbing_radius(t, params: ModelParams, consts: DerivedConstants):
    return _radius(t, params, consts)


def decay_bound(t, tau: float, E0: float, params: ModelParams, consts: DerivedConstants):
    t = np.asarray(t, dtype=float)
    if np.any(t < tau):
        raise ValueError("decay bound needs t >= tau")
    w = consts.rate
    return np.exp(-w * (t - tau)) * E0 + consts.K1 / w + consts.K2 * params.forcing.window_integral(t, tau, w)


@dataclass(frozen=True, eq=False)
class BoundReport:
    times: np.ndarray
    bound: np.ndarray
    measured: np.ndarray
    ci: np.ndarray
    tolerance: float = 0.0

    @property
    def margins(self) -> np.ndarray:
        return self.measured - self.bound - self.ci

    @property
    def violation_margin(self) -> float:
        return float(np.max(self.margins)) if len(self.times) else -math.inf

    @property
    def passed(self) -> bool:
        return self.violation_margin <= self.tolerance


def bound_report(times, bound, measured, ci=None, tolerance: float = 0.0) -> BoundReport:
    times = np.asarray(times, dtype=float)
    ci = np.zeros_like(times) if ci is None else np.asarray(ci, dtype=float)
    return BoundReport(times, np.asarray(bound, dtype=float), np.asarray(measured, dtype=float), ci, tolerance)


# ---------------------------------------------------------------------------
# pullback entry time


def _bisect(fn, lo: float, hi: float, xtol: float = 1e-12) -> float:
    """Root of ``fn`` on ``[lo, hi]`` with ``fn(lo) > 0 >= fn(hi)``."""
    while hi - lo > xtol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def theoretical_entry_time(t: float, spec: FamilySpec, rate: float, s_max: float = 1e4) -> float:
    """``inf{s >= 0 : e^{-rate s'} ||D(t - s')||_+^2 <= 1 for all s' >= s}``."""
    g = lambda s: math.exp(-rate * s) * family_norm(spec, t - s) - 1.0  # noqa: E731
    hi = 1.0
    while g(hi) > 0 or g(2 * hi) > 0:
        hi *= 2
        if hi > s_max:
            raise ConfigurationError("family does not enter the unit level before s_max")
    # last crossing on [0, 2 hi]: scan, then bisect the final bracket
    grid = np.linspace(0.0, 2 * hi, 4097)
    vals = np.array([g(s) for s in grid])
    pos = np.nonzero(vals > 0)[0]
    if len(pos) == 0:
        return 0.0
    k = pos[-1]
    return _bisect(g, float(grid[k]), float(grid[k + 1]))


@dataclass(frozen=True, eq=False)
class EntryTimeResult:
    theoretical: float
    measured: float
    grid: np.ndarray
    mean_h_sq: np.ndarray
    ci: np.ndarray
    radius: float
    absorbed: np.ndarray
    report: BoundReport

    @property
    def grid_step_bound(self) -> float:
        """First grid value at or beyond the theoretical time."""
        later = self.grid[self.grid >= self.theoretical]
        return float(later[0]) if len(later) else math.inf

    @property
    def passed(self) -> bool:
        return self.measured <= self.grid_step_bound and self.report.passed


def entry_grid(theoretical: float, s_cap: float | None = None) -> np.ndarray:
    cap = s_cap if s_cap is not None else max(8.0, 2.0 ** math.ceil(math.log2(max(theoretical, 1.0))))
    grid = [1.0]
    while grid[-1] * 2 <= cap:
        grid.append(grid[-1] * 2)
    return np.array(grid)


def pullback_entry_time(
    t: float,
    spec: FamilySpec,
    params: ModelParams,
    consts: DerivedConstants,
    basis: Basis,
    dt: float = 1e-2,
    paths: int = 200,
    master_seed: int = 0,
    s_cap: float | None = None,
) -> EntryTimeResult:
    """Theoretical vs simulated pullback entry time into the absorbing ball at ``t``."""
    require_universe(spec, consts.rate)
    T = theoretical_entry_time(t, spec, consts.rate)
    grid = entry_grid(T, s_cap)
    R = float(absorbing_radius(t, params, consts))
    means, cis = [], []
    for s in grid:
        res = run_ensemble(params, spec, t - s, t, dt, paths, master_seed, basis, record_every=max(1, int(round(s / dt))))
        means.append(res.mean_h_sq[-1])
        cis.append(res.ci_half_width[-1])
    means, cis = np.array(means), np.array(cis)
    absorbed = means <= R + cis
    hits = np.nonzero(absorbed)[0]
    measured = float(grid[hits[0]]) if len(hits) else math.inf
    after = grid >= T
    report = bound_report(grid[after], np.full(after.sum(), R), means[after], cis[after])
    return EntryTimeResult(T, measured, grid, means, cis, R, absorbed, report)


# ---------------------------------------------------------------------------
# radius classification


@dataclass(frozen=True)
class RadiusClass:
    kind: str  # bounded-everywhere | bounded-backwards | unbounded
    t0: float | None = None
    detail: str = ""


def radius_boundedness(h_spec, rate: float, consts: DerivedConstants | None = None) -> RadiusClass:
    """Classify ``t -> e^{-rate t} int_{-inf}^t e^{rate r} ||h(r)||^2 dr`` from its closed form."""
    if not h_spec.integrable(rate):
        raise ValueError("forcing is not integrable at this rate")
    if h_spec.is_zero or h_spec.is_constant:
        return RadiusClass("bounded-everywhere", None, "constant in t")
    if h_spec.kind == "exponential":
        if h_spec.nu > 0:
            return RadiusClass("bounded-backwards", 0.0, f"grows like e^({2 * h_spec.nu:g} t) forwards")
        return RadiusClass("unbounded", None, f"grows like e^({2 * h_spec.nu:g} t) backwards; bounded forwards")
    deg = max(k for k, c in enumerate(h_spec.coeffs) if c != 0.0)
    return RadiusClass("unbounded", None, f"grows like t^{2 * deg} in both directions")


# ---------------------------------------------------------------------------
# steady states and continuity


def steady_state(
    params: ModelParams,
    h0,
    basis: Basis,
    tol: float = 1e-12,
    max_stall: int = 10_000,
    initial=None,
) -> SpectralState:
    """Zero of the autonomous drift with constant forcing ``h0`` (mode vector).

    Damped fixed-point iteration on ``a(||g||_V^2) lambda g = F(g) + h0``; the
    damping grows after an accepted step and halves after a rejected one.
    """
    if params.stochastic:
        raise ModeError("steady states are computed for the noise-free model")
    h = np.zeros(basis.N)
    h0 = np.asarray(h0, dtype=float)
    h[: len(h0)] = h0

    def residual(g):
        a = params.a(sp.v_norm_sq(g, basis))
        return -a * basis.lam * g + reaction_modes(params, g, basis) + h

    g = np.zeros(basis.N) if initial is None else np.asarray(initial, dtype=float).copy()
    res = float(np.linalg.norm(residual(g)))
    theta, stall, it = 1.0, 0, 0
    while res > tol:
        a = params.a(sp.v_norm_sq(g, basis))
        target = (reaction_modes(params, g, basis) + h) / (a * basis.lam)
        cand = (1 - theta) * g + theta * target
        r_cand = float(np.linalg.norm(residual(cand)))
        it += 1
        if r_cand < res:
            g, res = cand, r_cand
            theta = min(1.0, 1.5 * theta)
            stall = 0
        else:
            theta *= 0.5
            stall += 1
            if stall >= max_stall or theta < 1e-300:
                raise ConvergenceError(f"steady-state residual stuck at {res:.3e} after {it} iterations")
    return SpectralState(g, basis)


def drift_residual(params: ModelParams, state: SpectralState, t: float = 0.0) -> float:
    return float(np.linalg.norm(drift_array(params, state.gamma, t, state.basis)))


def continuity_gap(
    params: ModelParams,
    u0: SpectralState,
    v0: SpectralState,
    tau: float,
    T: float,
    dt: float,
    tolerance: float = 0.0,
) -> BoundReport:
    """``||u(t) - v(t)||^2`` against ``e^{2 eta (t - tau)} ||u0 - v0||^2``."""
    if params.stochastic:
        raise ModeError("continuity with respect to data is checked without noise")
    eta = params.deterministic_constants().eta
    tu = simulate_path(u0, tau, T, dt, params)
    tv = simulate_path(v0, tau, T, dt, params)
    diff = sp.h_norm_sq(tu.gammas - tv.gammas)
    d0 = float(sp.h_norm_sq(u0.gamma - v0.gamma))
    bound = np.exp(2 * eta * (tu.times - tau)) * d0
    return bound_report(tu.times, bound, diff, tolerance=tolerance)


# ---------------------------------------------------------------------------
# smoothing estimate for ||u(t)||_V^2


def smoothing_bound(params: ModelParams, basis: Basis, u_tau_sq: float, tau: float, T: float, r: float) -> float:
    """Bound on ``||u(t)||_V^2`` for ``t in [tau + r, tau + T]`` (noise-free, ``f(0) = 0``).

    From the H-energy estimate ``int ||u||_V^2 <= (2 T K1 + 2 K2(T) + ||u_tau||^2) / m``
    with ``K1 = beta |O|``, ``K2(T) = int ||h||^2 / (2 lambda_1 m)``, and the
    uniform Gronwall lemma applied to ``y' <= 2 eta y + ||h||^2 / m``, which
    contributes ``K3(T) = int_tau^{tau+T} ||h||^2 / m``.
    """
    if params.stochastic:
        raise ModeError("smoothing bound is for the noise-free model")
    if not 0 < r <= T:
        raise ValueError("need 0 < r <= T")
    c = params.deterministic_constants()
    m = params.a.m
    h_int = 0.0
    if not params.forcing.is_zero:
        h_int = sci_integrate.quad(lambda s: float(params.forcing.norm_sq(s)), tau, tau + T, limit=200)[0]
    K1 = c.beta * basis.L
    K2 = h_int / (2 * basis.lambda1 * m)
    K3 = h_int / m
    return ((2 * T * K1 + 2 * K2 + u_tau_sq) / (m * r) + K3) * math.exp(2 * c.eta * r)
