"""Model parameters, assumption gates, Nemytskii evaluation and Galerkin operators.

The Galerkin system for ``u = sum_j gamma_j e_j`` reads

    d gamma_j = (-a(||u||_V^2) lambda_j gamma_j + F_j(u) + h_j(t)) dt + S_j(u) dw

with ``F = P_N f~(u)`` and ``S = P_N sigma~(u)`` evaluated by grid quadrature.
The operator probes return *excesses* (left side minus right side of an
inequality), so every theoretical guarantee reads ``excess <= 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import spectral as sp
from .presets import (
    DeterministicConstants,
    ForcingSpec,
    Noise,
    NonlocalCoefficient,
    Reaction,
    StochasticConstants,
)
from .spectral import Basis, ConfigurationError, GridFunction, SpectralState

DETERMINISTIC = "deterministic"
STOCHASTIC = "stochastic"
_MODE_ALIASES = {"deterministic": DETERMINISTIC, "deterministic-random": DETERMINISTIC, "stochastic": STOCHASTIC}

DETERMINISTIC_KEYS = ("alpha", "beta", "gamma", "delta", "eta", "p")
STOCHASTIC_KEYS = ("gamma1", "gamma2", "gamma3", "gamma4")

# sample sets used by the gates
_R_SAMPLES = np.unique(
    np.concatenate(
        [
            np.linspace(-1e3, 1e3, 20001),
            np.logspace(-6, 3, 2000),
            -np.logspace(-6, 3, 2000),
            [0.0],
        ]
    )
)
_FLUX_SAMPLES = np.concatenate([[0.0], np.logspace(-6, 6, 9999)])
_A_SAMPLES = np.concatenate([[0.0], np.logspace(-6, 12, 4001)])
_REL_TOL = 1e-12


class ModeError(ValueError):
    """Operation not defined in the model's regime."""


@dataclass(frozen=True)
class ModelParams:
    """Everything that defines one instance of the equation.

    ``claimed`` optionally overrides reaction constants (keys from
    ``DETERMINISTIC_KEYS`` or ``STOCHASTIC_KEYS``); claimed values are only
    trusted after the sampled gate confirms them.
    """

    mode: str
    a: NonlocalCoefficient
    f: Reaction
    sigma: Noise = field(default_factory=Noise.zero)
    forcing: ForcingSpec = field(default_factory=ForcingSpec.zero)
    rate: float = 1.0
    claimed: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        mode = _MODE_ALIASES.get(self.mode)
        if mode is None:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        allowed = DETERMINISTIC_KEYS if mode == DETERMINISTIC else STOCHASTIC_KEYS
        bad = sorted(set(self.claimed) - set(allowed))
        if bad:
            raise ConfigurationError(f"claimed constants {bad} do not apply in {mode} mode")
        object.__setattr__(self, "claimed", dict(self.claimed))
        if mode == DETERMINISTIC and self.sigma.kind != "zero":
            raise ConfigurationError("deterministic mode has no noise; sigma must be 'zero'")

    @property
    def stochastic(self) -> bool:
        return self.mode == STOCHASTIC

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def deterministic_constants(self) -> DeterministicConstants:
        base = self.f.deterministic_constants()
        vals = {} if base is None else dict(base.__dict__)
        vals.update(self.claimed)
        missing = [k for k in DETERMINISTIC_KEYS if k not in vals]
        if missing:
            raise ConfigurationError(f"custom f needs claimed constants {missing}")
        return DeterministicConstants(**{k: vals[k] for k in DETERMINISTIC_KEYS})

    def stochastic_constants(self) -> StochasticConstants:
        base = self.f.stochastic_constants()
        vals = {} if base is None else dict(base.__dict__)
        vals.update(self.claimed)
        missing = [k for k in STOCHASTIC_KEYS if k not in vals]
        if missing:
            raise ConfigurationError(f"custom f needs claimed constants {missing}")
        return StochasticConstants(**{k: vals[k] for k in STOCHASTIC_KEYS})

    def dissipation_gap(self, basis: Basis) -> float:
        """``m lambda_1 - gamma4 - C_sigma^2``; positive gap drives mean-square decay."""
        c = self.stochastic_constants()
        return self.a.m * basis.lambda1 - c.gamma4 - self.sigma.lipschitz**2


# ---------------------------------------------------------------------------
# assumption gate


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    margin: float
    method: str
    note: str = ""

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"


@dataclass(frozen=True)
class ValidationReport:
    mode: str
    checks: tuple[AssumptionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def _sampled(name, lhs, rhs, method, note="") -> AssumptionCheck:
    """Check ``lhs <= rhs`` pointwise; margin is ``-max(lhs - rhs)``."""
    excess = lhs - rhs
    tol = _REL_TOL * (1.0 + np.abs(lhs) + np.abs(rhs))
    ok = bool(np.all(excess <= tol))
    return AssumptionCheck(name, ok, float(-np.max(excess)) + 0.0, method, note)


def _method(params: ModelParams, keys) -> str:
    if not params.f.certified:
        return "sampled, not certified"
    if any(k in params.claimed for k in keys):
        return "claimed, sampled"
    return "certified, sampled"


def _coefficient_checks(params: ModelParams) -> list[AssumptionCheck]:
    a = params.a
    vals = a(_A_SAMPLES)
    bounds = _sampled(
        "coefficient_bounds",
        np.concatenate([a.m - vals, vals - a.M]),
        np.zeros(2 * len(vals)),
        "sampled",
        "0 < m <= a(s) <= M",
    )
    if not a.m > 0:
        bounds = replace(bounds, passed=False, margin=a.m)
    s = _FLUX_SAMPLES
    flux = a(s * s) * s
    diffs = np.diff(flux)
    tol = _REL_TOL * (1.0 + np.abs(flux[1:]))
    monotone = AssumptionCheck(
        "monotone_flux",
        bool(np.all(diffs >= -tol)),
        float(np.min(diffs)) + 0.0,
        "sampled",
        "s -> a(s^2) s non-decreasing on [0, 1e6]",
    )
    return [bounds, monotone]


def _rate_check(params: ModelParams, upper: float, stated: float | None = None) -> AssumptionCheck:
    r = params.rate
    margin = min(r, upper - r)
    note = f"rate in (0, {upper:.17g})"
    if stated is not None and r >= stated and margin > 0:
        note += f"; beyond the narrower stated range (0, {stated:.17g})"
    return AssumptionCheck("rate_range", margin > 0, margin, "symbolic", note)


def _integrability_check(params: ModelParams) -> AssumptionCheck:
    m = params.forcing.integrability_margin(params.rate)
    return AssumptionCheck(
        "forcing_integrability",
        m > 0,
        m,
        "closed form",
        "int_{-inf}^t e^{rate r} ||h(r)||^2 dr < inf",
    )


def validate_params(params: ModelParams, basis: Basis) -> ValidationReport:
    """Check every standing assumption of the configured regime.

    Margins are slacks: positive (or zero for sampled inequalities) means
    satisfied.  Scalar conditions are strict; sampled inequalities use a
    ``1e-12`` relative tolerance.
    """
    f = params.f
    r = _R_SAMPLES
    fr = f(r)
    checks: list[AssumptionCheck] = []
    if params.mode == DETERMINISTIC:
        c = params.deterministic_constants()
        keys_diss, keys_growth, keys_deriv = ("alpha", "beta", "p"), ("gamma", "delta", "p"), ("eta",)
        if c.beta is None:
            diss = AssumptionCheck("dissipativity", False, -math.inf, _method(params, keys_diss), "no finite beta")
        else:
            diss = _sampled(
                "dissipativity",
                fr * r,
                -c.alpha * np.abs(r) ** c.p + c.beta,
                _method(params, keys_diss),
                "f(r) r <= -alpha |r|^p + beta with alpha > 0",
            )
            if not c.alpha > 0:
                diss = replace(diss, passed=False, margin=c.alpha)
        checks.append(diss)
        checks.append(
            _sampled(
                "growth",
                np.abs(fr),
                c.gamma * np.abs(r) ** (c.p - 1) + c.delta,
                _method(params, keys_growth),
                "|f(r)| <= gamma |r|^(p-1) + delta",
            )
        )
        checks.append(
            _sampled("one_sided_derivative", f.derivative(r), np.full_like(r, c.eta), _method(params, keys_deriv), "f'(r) <= eta")
        )
        checks.append(AssumptionCheck("exponent", c.p >= 2, c.p - 2, "symbolic", "p >= 2"))
        checks.extend(_coefficient_checks(params))
        checks.append(_rate_check(params, 2 * params.a.m * basis.lambda1))
        checks.append(_integrability_check(params))
    else:
        c = params.stochastic_constants()
        checks.append(
            _sampled("derivative_bound", f.derivative(r), np.full_like(r, c.gamma1), _method(params, ("gamma1",)), "f'(r) <= gamma1")
        )
        if c.gamma2 is None:
            checks.append(
                AssumptionCheck("linear_growth", False, -math.inf, _method(params, ("gamma2",)), "no finite linear-growth constant")
            )
        else:
            checks.append(
                _sampled(
                    "linear_growth",
                    np.abs(fr),
                    c.gamma2 * (1 + np.abs(r)),
                    _method(params, ("gamma2",)),
                    "|f(r)| <= gamma2 (1 + |r|)",
                )
            )
        checks.append(
            _sampled(
                "quadratic_dissipativity",
                fr * r,
                c.gamma3 + c.gamma4 * r * r,
                _method(params, ("gamma3", "gamma4")),
                "f(r) r <= gamma3 + gamma4 r^2",
            )
        )
        checks.extend(_coefficient_checks(params))
        sig = params.sigma
        s = sig(r)
        checks.append(
            _sampled(
                "noise_lipschitz",
                np.abs(np.diff(s)),
                sig.lipschitz * np.abs(np.diff(r)),
                "certified, sampled",
                "|sigma(r) - sigma(q)| <= C_sigma |r - q|",
            )
        )
        half = params.a.m * basis.lambda1 / 2
        used = c.gamma4 + sig.lipschitz**2
        checks.append(
            AssumptionCheck(
                "dissipation_margin",
                used < half,
                half - used,
                "symbolic",
                "gamma4 + C_sigma^2 < m lambda_1 / 2",
            )
        )
        gap = params.dissipation_gap(basis)
        checks.append(_rate_check(params, 2 * gap, stated=gap))
        checks.append(_integrability_check(params))
    return ValidationReport(params.mode, tuple(checks))


# ---------------------------------------------------------------------------
# pointwise and Galerkin operators


def nonlocal_coefficient(params: ModelParams, v_sq):
    v = np.asarray(v_sq, dtype=float)
    if np.any(v < 0):
        raise ValueError("||u||_V^2 must be nonnegative")
    out = params.a(v)
    return float(out) if out.ndim == 0 else out


def nemytskii(preset, g: GridFunction) -> GridFunction:
    """Pointwise lift of a scalar preset (reaction or noise) to grid functions."""
    return GridFunction(preset(g.values), g.basis)


def reaction_modes(params: ModelParams, gamma: np.ndarray, basis: Basis) -> np.ndarray:
    return sp.to_modes(params.f(sp.to_grid(gamma, basis)), basis)


def noise_modes(params: ModelParams, gamma: np.ndarray, basis: Basis) -> np.ndarray:
    return sp.to_modes(params.sigma(sp.to_grid(gamma, basis)), basis)


def drift_array(params: ModelParams, gamma: np.ndarray, t: float, basis: Basis) -> np.ndarray:
    a = params.a(sp.v_norm_sq(gamma, basis))[..., None]
    return -a * basis.lam * gamma + reaction_modes(params, gamma, basis) + params.forcing.modes_at(t, basis)


def drift(params: ModelParams, state: SpectralState, t: float) -> np.ndarray:
    """Right-hand side of the Galerkin ODE for the mode coefficients."""
    return drift_array(params, state.gamma, t, state.basis)


def diffusion(params: ModelParams, state: SpectralState) -> np.ndarray:
    """Mode coefficients of ``P_N sigma~(u)``."""
    if not params.stochastic:
        raise ModeError("diffusion is only defined in stochastic mode")
    return noise_modes(params, state.gamma, state.basis)


def _pair(u: SpectralState, v: SpectralState):
    if not u.basis.compatible(v.basis):
        raise sp.DimensionError("states live on different bases")
    return u.gamma, v.gamma, u.basis


def nonlocal_monotone_gap(params: ModelParams, u: SpectralState, v: SpectralState) -> float:
    """``<-a(|u|_V^2) Lap u + a(|v|_V^2) Lap v, u - v>``, nonnegative in theory."""
    gu, gv, b = _pair(u, v)
    d = gu - gv
    au = params.a(sp.v_norm_sq(gu, b))
    av = params.a(sp.v_norm_sq(gv, b))
    return au * np.sum(b.lam * gu * d, axis=-1) - av * np.sum(b.lam * gv * d, axis=-1)


def _operator_pairing(params, gamma, t, basis, test):
    """``<B(t, u), test>`` with the reaction pairing done by grid quadrature."""
    a = params.a(sp.v_norm_sq(gamma, basis))
    grid = sp.to_grid(gamma, basis)
    test_grid = sp.to_grid(test, basis)
    h = params.forcing.modes_at(t, basis)
    return (
        -a * np.sum(basis.lam * gamma * test, axis=-1)
        + sp.quadrature_inner(params.f(grid), test_grid, basis)
        + np.sum(h * test, axis=-1)
    )


def weak_monotone_excess(params: ModelParams, u: SpectralState, v: SpectralState, t: float = 0.0) -> float:
    """``2<B(u) - B(v), u - v> + ||sigma~(u) - sigma~(v)||^2 - (2 gamma1 + C_sigma^2) ||u - v||^2``."""
    if not params.stochastic:
        raise ModeError("weak monotonicity is checked in stochastic mode")
    gu, gv, b = _pair(u, v)
    d = gu - gv
    lhs = 2 * (_operator_pairing(params, gu, t, b, d) - _operator_pairing(params, gv, t, b, d))
    ds = params.sigma(sp.to_grid(gu, b)) - params.sigma(sp.to_grid(gv, b))
    lhs = lhs + sp.quadrature_norm_sq(ds, b)
    c = 2 * params.stochastic_constants().gamma1 + params.sigma.lipschitz**2
    return lhs - c * sp.h_norm_sq(d)


@dataclass(frozen=True)
class OperatorConstants:
    """Constants of the coercivity and boundedness estimates for ``B``.

    coercivity: ``2<B(t,u),u> + ||sigma~(u)||^2 <= c1 ||u||^2 - c2 ||u||_V^2 + g(t)``
    boundedness: ``||B(t,u)||_{V*} <= d1 + d2 ||u||_V + g_dual(t)``
    """

    c1: float
    c2: float
    g0: float
    d1: float
    d2: float
    embedding: float

    def g(self, params: ModelParams, t):
        return self.g0 + params.forcing.norm_sq(t)

    def g_dual(self, params: ModelParams, t):
        return self.embedding * np.sqrt(params.forcing.norm_sq(t))


def operator_constants(params: ModelParams, basis: Basis) -> OperatorConstants:
    c = params.stochastic_constants()
    if c.gamma2 is None:
        raise ConfigurationError("boundedness needs a finite linear-growth constant")
    C = params.sigma.lipschitz
    lam1 = basis.lambda1
    emb = 1.0 / math.sqrt(lam1)  # ||w||_{V*} <= ||w|| / sqrt(lambda_1)
    return OperatorConstants(
        c1=2 * c.gamma4 + 1 + 2 * C * C,
        c2=2 * params.a.m,
        g0=2 * c.gamma3 * basis.L + 2 * params.sigma.at_zero_norm_sq(basis),
        d1=emb * c.gamma2 * math.sqrt(2 * basis.L),
        d2=params.a.M + c.gamma2 * math.sqrt(2) / lam1,
        embedding=emb,
    )


def operator_coefficients(params: ModelParams, gamma: np.ndarray, t: float, basis: Basis) -> np.ndarray:
    """Riesz coefficients of ``B(t, u)`` restricted to the Galerkin space."""
    return drift_array(params, gamma, t, basis)


def coercivity_and_boundedness_probe(params: ModelParams, u: SpectralState, t: float = 0.0):
    """Return ``(coercive_excess, dual_norm_excess)``; both are ``<= 0`` in theory."""
    if not params.stochastic:
        raise ModeError("coercivity and boundedness are checked in stochastic mode")
    b = u.basis
    g = u.gamma
    k = operator_constants(params, b)
    grid = sp.to_grid(g, b)
    lhs = 2 * _operator_pairing(params, g, t, b, g) + sp.quadrature_norm_sq(params.sigma(grid), b)
    coercive = lhs - (k.c1 * sp.h_norm_sq(g) - k.c2 * sp.v_norm_sq(g, b) + k.g(params, t))
    w = operator_coefficients(params, g, t, b)
    dual = np.sqrt(sp.dual_norm_sq(w, b)) - (k.d1 + k.d2 * np.sqrt(sp.v_norm_sq(g, b)) + k.g_dual(params, t))
    return coercive, dual


def hemicontinuity_probe(
    params: ModelParams,
    u: SpectralState,
    z: SpectralState,
    v: SpectralState,
    t: float = 0.0,
    samples: int = 2001,
) -> float:
    """Largest jump of ``lam -> <B(t, u + lam z), v>`` between neighbours on [-1, 1].

    For a continuous map the jump shrinks with the sample spacing.
    """
    lam = np.linspace(-1.0, 1.0, samples)
    gammas = u.gamma[None, :] + lam[:, None] * z.gamma[None, :]
    vals = _operator_pairing(params, gammas, t, u.basis, v.gamma)
    return float(np.max(np.abs(np.diff(vals))))
