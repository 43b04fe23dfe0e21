"""Closed-form presets for the non-local coefficient, reaction, noise and forcing.

Every preset knows its own constants.  Reaction presets carry two sets of
certified constants, one per regime:

* deterministic regime: ``alpha, beta, gamma, delta, eta, p`` for
  ``f(r) r <= -alpha |r|^p + beta``, ``|f(r)| <= gamma |r|^(p-1) + delta``
  and ``f'(r) <= eta``;
* stochastic regime: ``gamma1..gamma4`` for ``f'(r) <= gamma1``,
  ``|f(r)| <= gamma2 (1 + |r|)`` and ``f(r) r <= gamma3 + gamma4 r^2``.

A constant that does not exist for a preset (no finite bound) is ``None``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import Basis, ConfigurationError


class IntegrabilityError(ValueError):
    """The weighted forcing integral diverges for the requested rate."""


# ---------------------------------------------------------------------------
# non-local coefficient a(s)


@dataclass(frozen=True)
class NonlocalCoefficient:
    """``a(s)`` with bounds ``m <= a(s) <= M``.

    ``saturating``: ``m + (M - m) s / (1 + s)``, increasing from ``m`` to ``M``.
    ``decaying``: ``m + (M - m) exp(-k s)``, decreasing from ``M`` to ``m``;
    ``s a(s^2)`` loses monotonicity once ``M - m`` is large against ``m``.
    """

    kind: str
    m: float
    M: float
    k: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "saturating", "decaying"):
            raise ConfigurationError(f"unknown a preset {self.kind!r}")
        if self.kind == "constant" and self.m != self.M:
            raise ConfigurationError("constant a needs m == M")
        if not (self.m > 0 and self.M >= self.m):
            raise ConfigurationError(f"a preset needs 0 < m <= M, got m={self.m}, M={self.M}")

    @classmethod
    def constant(cls, c: float) -> "NonlocalCoefficient":
        return cls("constant", c, c)

    @classmethod
    def saturating(cls, m: float, M: float) -> "NonlocalCoefficient":
        return cls("saturating", m, M)

    @classmethod
    def decaying(cls, m: float, M: float, k: float = 1.0) -> "NonlocalCoefficient":
        return cls("decaying", m, M, k)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            return np.full_like(s, self.m)
        if self.kind == "saturating":
            return self.m + (self.M - self.m) * s / (1.0 + s)
        return self.m + (self.M - self.m) * np.exp(-self.k * s)

    def config(self) -> dict:
        if self.kind == "constant":
            return {"preset": "constant", "c": self.m}
        d = {"preset": self.kind, "m": self.m, "M": self.M}
        if self.kind == "decaying":
            d["k"] = self.k
        return d


# ---------------------------------------------------------------------------
# reaction f(r)


@dataclass(frozen=True)
class DeterministicConstants:
    alpha: float
    beta: float | None
    gamma: float
    delta: float
    eta: float
    p: float


@dataclass(frozen=True)
class StochasticConstants:
    gamma1: float
    gamma2: float | None
    gamma3: float
    gamma4: float


@dataclass(frozen=True)
class Reaction:
    """Scalar reaction term ``f``.

    Presets: ``zero``, ``linear(slope)``, ``cubic(eta, kappa)`` for
    ``eta r - kappa r^3`` and ``tanh(gain)`` for ``gain tanh(r)``.  A
    ``custom`` reaction wraps user callables; its constants must be supplied
    and are only ever sampled, never certified.
    """

    kind: str
    slope: float = 0.0
    eta: float = 0.0
    kappa: float = 0.0
    gain: float = 0.0
    fn: Callable | None = field(default=None, compare=False, repr=False)
    dfn: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "cubic", "tanh", "custom"):
            raise ConfigurationError(f"unknown f preset {self.kind!r}")
        if self.kind == "cubic" and not self.kappa > 0:
            raise ConfigurationError("cubic f needs kappa > 0")
        if self.kind == "custom" and self.fn is None:
            raise ConfigurationError("custom f needs a callable")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def linear(cls, slope: float):
        return cls("linear", slope=slope)

    @classmethod
    def cubic(cls, eta: float, kappa: float):
        return cls("cubic", eta=eta, kappa=kappa)

    @classmethod
    def tanh(cls, gain: float):
        return cls("tanh", gain=gain)

    @classmethod
    def custom(cls, fn, dfn=None):
        return cls("custom", fn=fn, dfn=dfn)

    @property
    def certified(self) -> bool:
        return self.kind != "custom"

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "linear":
            return self.slope * r
        if self.kind == "cubic":
            return self.eta * r - self.kappa * r**3
        if self.kind == "tanh":
            return self.gain * np.tanh(r)
        return np.asarray(self.fn(r), dtype=float)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "linear":
            return np.full_like(r, self.slope)
        if self.kind == "cubic":
            return self.eta - 3.0 * self.kappa * r**2
        if self.kind == "tanh":
            return self.gain * (1.0 - np.tanh(r) ** 2)
        if self.dfn is not None:
            return np.asarray(self.dfn(r), dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(r))
        return (self(r + h) - self(r - h)) / (2 * h)

    def deterministic_constants(self) -> DeterministicConstants | None:
        """Smallest clean constants for the deterministic assumptions."""
        if self.kind == "zero":
            return DeterministicConstants(0.0, 0.0, 0.0, 0.0, 0.0, 2.0)
        if self.kind == "linear":
            s = self.slope
            return DeterministicConstants(-s, 0.0, abs(s), 0.0, max(s, 0.0), 2.0)
        if self.kind == "cubic":
            # eta r^2 - kappa r^4 <= -(kappa/2) r^4 + max(eta, 0)^2 / (2 kappa)
            e, k = self.eta, self.kappa
            return DeterministicConstants(
                k / 2, max(e, 0.0) ** 2 / (2 * k), k + abs(e), abs(e), max(e, 0.0), 4.0
            )
        if self.kind == "tanh":
            # sublinear: no alpha > 0 exists; with gain > 0 not even a finite beta
            g = self.gain
            return DeterministicConstants(0.0, 0.0 if g <= 0 else None, abs(g), abs(g), max(g, 0.0), 2.0)
        return None

    def stochastic_constants(self) -> StochasticConstants | None:
        if self.kind == "zero":
            return StochasticConstants(0.0, 0.0, 0.0, 0.0)
        if self.kind == "linear":
            s = self.slope
            return StochasticConstants(max(s, 0.0), abs(s), 0.0, max(s, 0.0))
        if self.kind == "cubic":
            e, k = self.eta, self.kappa
            return StochasticConstants(max(e, 0.0), None, max(e, 0.0) ** 2 / (4 * k), 0.0)
        if self.kind == "tanh":
            # g r tanh r <= g |r| <= g/2 + (g/2) r^2
            g = max(self.gain, 0.0)
            return StochasticConstants(g, abs(self.gain), g / 2, g / 2)
        return None

    def config(self) -> dict:
        if self.kind == "linear":
            return {"preset": "linear", "slope": self.slope}
        if self.kind == "cubic":
            return {"preset": "cubic", "eta": self.eta, "kappa": self.kappa}
        if self.kind == "tanh":
            return {"preset": "tanh", "gain": self.gain}
        return {"preset": self.kind}


# ---------------------------------------------------------------------------
# noise coefficient sigma(r)


@dataclass(frozen=True)
class Noise:
    """Globally Lipschitz ``sigma``: ``zero``, ``affine(c, s0)`` = ``s0 + c r``, ``sine(c)``."""

    kind: str
    c: float = 0.0
    s0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "affine", "sine"):
            raise ConfigurationError(f"unknown sigma preset {self.kind!r}")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def affine(cls, c: float, s0: float = 0.0):
        return cls("affine", c=c, s0=s0)

    @classmethod
    def sine(cls, c: float):
        return cls("sine", c=c)

    @property
    def lipschitz(self) -> float:
        return 0.0 if self.kind == "zero" else abs(self.c)

    @property
    def at_zero(self) -> float:
        return self.s0 if self.kind == "affine" else 0.0

    def at_zero_norm_sq(self, basis: Basis) -> float:
        """``||sigma~(0)||_H^2`` on ``(0, L)``."""
        return self.at_zero**2 * basis.L

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "affine":
            return self.s0 + self.c * r
        return self.c * np.sin(r)

    def config(self) -> dict:
        if self.kind == "affine":
            return {"preset": "affine", "c": self.c, "s0": self.s0}
        if self.kind == "sine":
            return {"preset": "sine", "c": self.c}
        return {"preset": "zero"}


# ---------------------------------------------------------------------------
# forcing h(t) = s(t) h0


def _poly_square(coeffs: tuple[float, ...]) -> np.ndarray:
    """Ascending coefficients of ``P(r)^2``."""
    c = np.asarray(coeffs, dtype=float)
    return np.convolve(c, c)


def _exp_poly_antiderivative(q: np.ndarray, rho: float) -> np.ndarray:
    """Ascending coefficients of ``A`` with ``d/dr (e^{rho r} A(r)) = e^{rho r} q(r)``."""
    A = np.zeros(len(q))
    for n, qn in enumerate(q):
        if qn == 0.0:
            continue
        # int e^{rho r} r^n = e^{rho r} sum_j (-1)^j n!/(n-j)! r^{n-j} / rho^{j+1}
        for j in range(n + 1):
            A[n - j] += qn * (-1) ** j * math.perm(n, j) / rho ** (j + 1)
    return A


@dataclass(frozen=True)
class ForcingSpec:
    """Space-time forcing ``h(t) = s(t) h0`` with ``h0`` given by mode coefficients.

    Kinds: ``zero``; ``constant`` (``s = 1``); ``exponential`` (``s = e^{nu t}``);
    ``polynomial`` (``s = sum_k c_k t^k``).  All admit a closed form for
    ``||h(t)||^2`` and for ``I(t, rho) = int_{-inf}^t e^{rho r} ||h(r)||^2 dr``.
    """

    kind: str = "zero"
    modes: tuple[float, ...] = ()
    nu: float = 0.0
    coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "exponential", "polynomial"):
            raise ConfigurationError(f"unknown forcing kind {self.kind!r}")
        object.__setattr__(self, "modes", tuple(float(x) for x in self.modes))
        object.__setattr__(self, "coeffs", tuple(float(x) for x in self.coeffs))
        if self.kind == "polynomial" and not self.coeffs:
            raise ConfigurationError("polynomial forcing needs coefficients")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, modes):
        return cls("constant", tuple(modes))

    @classmethod
    def exponential(cls, nu: float, modes):
        return cls("exponential", tuple(modes), nu=nu)

    @classmethod
    def polynomial(cls, coeffs, modes):
        return cls("polynomial", tuple(modes), coeffs=tuple(coeffs))

    @property
    def h0_norm_sq(self) -> float:
        if self.kind == "zero":
            return 0.0
        return float(sum(x * x for x in self.modes))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.h0_norm_sq == 0.0

    @property
    def is_constant(self) -> bool:
        if self.is_zero or self.kind == "constant":
            return True
        if self.kind == "exponential":
            return self.nu == 0.0
        return all(c == 0.0 for c in self.coeffs[1:])

    def scalar(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "constant":
            return np.ones_like(t)
        if self.kind == "exponential":
            return np.exp(self.nu * t)
        return np.polynomial.polynomial.polyval(t, self.coeffs)

    def mode_vector(self, basis: Basis) -> np.ndarray:
        h0 = np.zeros(basis.N)
        if self.kind != "zero":
            if len(self.modes) > basis.N:
                raise ConfigurationError(
                    f"forcing has {len(self.modes)} modes but the basis only {basis.N}"
                )
            h0[: len(self.modes)] = self.modes
        return h0

    def modes_at(self, t: float, basis: Basis) -> np.ndarray:
        return float(self.scalar(t)) * self.mode_vector(basis)

    def norm_sq(self, t):
        return self.scalar(t) ** 2 * self.h0_norm_sq

    def integrable(self, rho: float) -> bool:
        if self.is_zero:
            return True
        if self.kind == "exponential":
            return rho + 2 * self.nu > 0
        return rho > 0

    def integrability_margin(self, rho: float) -> float:
        if self.is_zero:
            return math.inf
        if self.kind == "exponential":
            return rho + 2 * self.nu
        return rho

    def scaled_integral(self, t, rho: float):
        """``e^{-rho t} I(t, rho)``; raises when ``I`` diverges."""
        t = np.asarray(t, dtype=float)
        if not self.integrable(rho):
            raise IntegrabilityError(
                f"int_(-inf)^t e^({rho} r) ||h(r)||^2 dr diverges for {self.kind} forcing"
            )
        n0 = self.h0_norm_sq
        if self.is_zero:
            return np.zeros_like(t)
        if self.kind == "constant":
            return np.full_like(t, n0 / rho)
        if self.kind == "exponential":
            return n0 * np.exp(2 * self.nu * t) / (rho + 2 * self.nu)
        A = _exp_poly_antiderivative(_poly_square(self.coeffs), rho)
        return n0 * np.polynomial.polynomial.polyval(t, A)

    def weighted_integral(self, t, rho: float):
        """``I(t, rho) = int_{-inf}^t e^{rho r} ||h(r)||^2 dr``."""
        return np.exp(rho * np.asarray(t, dtype=float)) * self.scaled_integral(t, rho)

    def window_integral(self, t, tau: float, rho: float):
        """``int_tau^t e^{-rho (t - r)} ||h(r)||^2 dr`` for ``t >= tau``."""
        t = np.asarray(t, dtype=float)
        n0 = self.h0_norm_sq
        if self.is_zero:
            return np.zeros_like(t)
        if self.kind == "constant":
            return n0 * (1.0 - np.exp(-rho * (t - tau))) / rho
        if self.kind == "exponential":
            c = rho + 2 * self.nu
            if c == 0.0:
                return n0 * np.exp(-rho * t) * (t - tau)
            return n0 * (np.exp(2 * self.nu * t) - np.exp(-rho * (t - tau) + 2 * self.nu * tau)) / c
        A = _exp_poly_antiderivative(_poly_square(self.coeffs), rho)
        pv = np.polynomial.polynomial.polyval
        return n0 * (pv(t, A) - np.exp(-rho * (t - tau)) * pv(tau, A))

    def config(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind != "zero":
            d["modes"] = list(self.modes)
        if self.kind == "exponential":
            d["nu"] = self.nu
        if self.kind == "polynomial":
            d["coeffs"] = list(self.coeffs)
        return d
