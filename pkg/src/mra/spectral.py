"""Dirichlet sine eigenbasis of -d^2/dx^2 on (0, L) and the transforms around it.

Mode coefficients ``gamma`` are the single source of truth for a field
``u = sum_j gamma_j e_j`` with ``e_j(x) = sqrt(2/L) sin(j pi x / L)``.  The
physical representation lives on the ``Q`` interior nodes
``x_k = k L / (Q + 1)``, where the sampled sines are exactly orthogonal, so
the discrete transform pair is exact for band-limited data.

All array routines accept a leading batch axis: ``gamma`` may be ``(N,)`` or
``(P, N)`` and grid values ``(Q,)`` or ``(P, Q)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Invalid basis or model configuration."""


class DimensionError(ValueError):
    """Objects built on different bases were combined."""


@dataclass(frozen=True, eq=False)
class Basis:
    L: float
    N: int
    Q: int
    lam: np.ndarray = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    # modes[k, j] = e_{j+1}(x_k)
    modes: np.ndarray = field(repr=False)

    @property
    def lambda1(self) -> float:
        return float(self.lam[0])

    @property
    def weight(self) -> float:
        """Quadrature weight of the uniform interior grid."""
        return self.L / (self.Q + 1)

    def compatible(self, other: "Basis") -> bool:
        return self is other or (
            self.N == other.N and self.Q == other.Q and self.L == other.L
        )

    def __eq__(self, other):
        return isinstance(other, Basis) and self.compatible(other)

    def __hash__(self):
        return hash((self.L, self.N, self.Q))


def build_basis(L: float = np.pi, N: int = 8, Q: int | None = None) -> Basis:
    """Build the first ``N`` Dirichlet eigenpairs on ``(0, L)``.

    ``Q`` defaults to ``4 N`` so that cubic nonlinearities are resolved
    without significant aliasing; ``Q >= 2 N`` is required.
    """
    if Q is None:
        Q = 4 * N
    if not (isinstance(N, (int, np.integer)) and N >= 1):
        raise ConfigurationError(f"mode count N must be >= 1, got {N!r}")
    if not (isinstance(Q, (int, np.integer)) and Q >= 2 * N):
        raise ConfigurationError(f"grid size Q must be >= 2N = {2 * N}, got {Q!r}")
    if not (np.isfinite(L) and L > 0):
        raise ConfigurationError(f"domain length L must be positive, got {L!r}")
    L = float(L)
    j = np.arange(1, N + 1)
    lam = (j * np.pi / L) ** 2
    k = np.arange(1, Q + 1)
    nodes = k * L / (Q + 1)
    modes = np.sqrt(2.0 / L) * np.sin(np.outer(k, j) * np.pi / (Q + 1))
    for arr in (lam, nodes, modes):
        arr.setflags(write=False)
    return Basis(L=L, N=int(N), Q=int(Q), lam=lam, nodes=nodes, modes=modes)


@dataclass(frozen=True, eq=False)
class SpectralState:
    gamma: np.ndarray
    basis: Basis

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float)
        if g.shape[-1:] != (self.basis.N,):
            raise DimensionError(
                f"state has {g.shape[-1] if g.ndim else 0} modes, basis has {self.basis.N}"
            )
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    def __add__(self, other: "SpectralState") -> "SpectralState":
        _check_same(self.basis, other.basis)
        return SpectralState(self.gamma + other.gamma, self.basis)

    def __sub__(self, other: "SpectralState") -> "SpectralState":
        _check_same(self.basis, other.basis)
        return SpectralState(self.gamma - other.gamma, self.basis)

    def scaled(self, c: float) -> "SpectralState":
        return SpectralState(c * self.gamma, self.basis)


@dataclass(frozen=True, eq=False)
class GridFunction:
    values: np.ndarray
    basis: Basis

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape[-1:] != (self.basis.Q,):
            raise DimensionError(f"grid has {v.shape[-1]} nodes, basis has {self.basis.Q}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def _check_same(a: Basis, b: Basis):
    if not a.compatible(b):
        raise DimensionError(f"basis mismatch: {a} vs {b}")


def zero_state(basis: Basis) -> SpectralState:
    return SpectralState(np.zeros(basis.N), basis)


def unit_mode(basis: Basis, j: int, amplitude: float = 1.0) -> SpectralState:
    """``amplitude * e_j`` (``j`` is 1-based, as in the eigenvalue index)."""
    if not 1 <= j <= basis.N:
        raise DimensionError(f"mode index {j} outside 1..{basis.N}")
    g = np.zeros(basis.N)
    g[j - 1] = amplitude
    return SpectralState(g, basis)


# Array-level transforms.  These are the hot path for the steppers.

def to_grid(gamma: np.ndarray, basis: Basis) -> np.ndarray:
    return gamma @ basis.modes.T


def to_modes(values: np.ndarray, basis: Basis) -> np.ndarray:
    return basis.weight * (values @ basis.modes)


def synthesize(state: SpectralState) -> GridFunction:
    return GridFunction(to_grid(state.gamma, state.basis), state.basis)


def analyze(g: GridFunction, basis: Basis | None = None) -> SpectralState:
    if basis is not None:
        _check_same(basis, g.basis)
    return SpectralState(to_modes(g.values, g.basis), g.basis)


def h_norm_sq(gamma: np.ndarray) -> np.ndarray:
    return np.sum(gamma * gamma, axis=-1)


def v_norm_sq(gamma: np.ndarray, basis: Basis) -> np.ndarray:
    return np.sum(basis.lam * gamma * gamma, axis=-1)


def h2_norm_sq(gamma: np.ndarray, basis: Basis) -> np.ndarray:
    """``||Laplacian u||^2``, the optional D(A) diagnostic."""
    return np.sum(basis.lam**2 * gamma * gamma, axis=-1)


def sobolev_norms(state: SpectralState) -> tuple[float, float]:
    """Return ``(||u||^2, ||u||_V^2)``."""
    g = state.gamma
    return float(h_norm_sq(g)), float(v_norm_sq(g, state.basis))


def dual_norm_sq(w, basis: Basis) -> float:
    """Squared ``V*`` norm of the functional with Riesz coefficients ``w``."""
    w = np.asarray(w, dtype=float)
    return np.sum(w * w / basis.lam, axis=-1)


def quadrature_norm_sq(values: np.ndarray, basis: Basis) -> np.ndarray:
    return basis.weight * np.sum(values * values, axis=-1)


def quadrature_inner(a: np.ndarray, b: np.ndarray, basis: Basis) -> np.ndarray:
    return basis.weight * np.sum(a * b, axis=-1)
