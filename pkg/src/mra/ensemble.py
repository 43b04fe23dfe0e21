"""Monte Carlo over initial data and Brownian paths.

Paths are processed in fixed-size chunks of consecutive path ids.  Chunk
boundaries never depend on the thread count, and per-path results are
reassembled in path-id order before any reduction, so outputs are
bit-identical for any degree of parallelism.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import spectral as sp
from .integrate import BLOWUP_THRESHOLD, BlowUpError, advance, energy_residual_array, step_count
from .model import ModelParams
from .rng import PURPOSE_INITIAL, brownian_block, standard_normals, uniforms
from .spectral import Basis, ConfigurationError, SpectralState

CHUNK = 256
Z95 = 1.96
_RADIUS_INDEX = 1 << 40


class UniverseError(ValueError):
    """The family is not admissible for pullback/absorbing experiments."""


class EnsembleError(BlowUpError):
    pass


@dataclass(frozen=True)
class RadiusProfile:
    """Closed-form ``rho(tau)^2``.

    ``constant``: ``c0``; ``affine_abs``: ``c0 + c1 |tau|``;
    ``exponential``: ``c0 exp(-c1 tau)`` (grows backwards when ``c1 > 0``).
    """

    kind: str = "constant"
    c0: float = 1.0
    c1: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "affine_abs", "exponential"):
            raise ConfigurationError(f"unknown radius profile {self.kind!r}")
        if self.c0 < 0 or (self.kind == "affine_abs" and self.c1 < 0):
            raise ConfigurationError("radius profile must be nonnegative")

    def radius_sq(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.kind == "constant":
            return np.full_like(tau, self.c0)
        if self.kind == "affine_abs":
            return self.c0 + self.c1 * np.abs(tau)
        return self.c0 * np.exp(-self.c1 * tau)

    def decays_under(self, rate: float) -> bool:
        """Whether ``e^{rate tau} rho(tau)^2 -> 0`` as ``tau -> -inf``."""
        if self.kind == "exponential":
            return self.c0 == 0 or rate > self.c1
        return rate > 0

    def config(self) -> dict:
        return {"profile": self.kind, "c0": self.c0, "c1": self.c1}


@dataclass(frozen=True, eq=False)
class FamilySpec:
    """A family ``D(tau)`` of random initial data.

    ``point``: the deterministic state ``state`` for every tau.
    ``gaussian_modes``: independent ``gamma_j ~ N(0, std_j^2)``.
    ``ball_uniform``: uniform in the H-ball of radius ``rho(tau)``.
    """

    shape: str
    state: tuple[float, ...] = ()
    std: tuple[float, ...] = ()
    profile: RadiusProfile = RadiusProfile()

    def __post_init__(self):
        if self.shape not in ("point", "gaussian_modes", "ball_uniform"):
            raise ConfigurationError(f"unknown family shape {self.shape!r}")
        object.__setattr__(self, "state", tuple(float(x) for x in self.state))
        object.__setattr__(self, "std", tuple(float(x) for x in self.std))

    @classmethod
    def point(cls, gamma):
        return cls("point", state=tuple(np.asarray(gamma, dtype=float)))

    @classmethod
    def gaussian(cls, std):
        return cls("gaussian_modes", std=tuple(std))

    @classmethod
    def ball(cls, profile: RadiusProfile):
        return cls("ball_uniform", profile=profile)

    @property
    def bounded(self) -> bool:
        return self.shape != "gaussian_modes"

    def _padded(self, values, basis: Basis) -> np.ndarray:
        if len(values) > basis.N:
            raise ConfigurationError(f"family has {len(values)} modes, basis only {basis.N}")
        out = np.zeros(basis.N)
        out[: len(values)] = values
        return out

    def config(self) -> dict:
        if self.shape == "point":
            return {"shape": "point", "state": list(self.state)}
        if self.shape == "gaussian_modes":
            return {"shape": "gaussian_modes", "std": list(self.std)}
        return {"shape": "ball_uniform", **self.profile.config()}


def family_norm(spec: FamilySpec, tau: float) -> float:
    """``||D(tau)||_+^2``; for Gaussian families the mean square (the sup is infinite)."""
    # same reduction as h_norm_sq so a point family's E0 matches its measured norm bit for bit
    if spec.shape == "point":
        return float(sp.h_norm_sq(np.asarray(spec.state)))
    if spec.shape == "gaussian_modes":
        return float(sp.h_norm_sq(np.asarray(spec.std)))
    return float(spec.profile.radius_sq(tau))


def family_mean_square(spec: FamilySpec, tau: float, basis: Basis) -> float:
    """Exact ``E ||u_tau||^2`` of one draw from the family."""
    if spec.shape == "ball_uniform":
        n = basis.N
        return float(spec.profile.radius_sq(tau)) * n / (n + 2)
    return family_norm(spec, tau)


def in_universe(spec: FamilySpec, rate: float) -> bool:
    if not spec.bounded:
        return False
    if spec.shape == "point":
        return rate > 0
    return spec.profile.decays_under(rate)


def require_universe(spec: FamilySpec, rate: float):
    if not spec.bounded:
        raise UniverseError("Gaussian families are unbounded sets; use them for moment estimation only")
    if not in_universe(spec, rate):
        raise UniverseError(f"e^(rate tau) ||D(tau)||^2 does not vanish as tau -> -inf for rate {rate}")


def sample_initial_batch(spec: FamilySpec, tau: float, path_ids, master_seed: int, basis: Basis) -> np.ndarray:
    path_ids = np.asarray(path_ids, dtype=np.uint64)
    P = path_ids.shape[0]
    if spec.shape == "point":
        return np.tile(spec._padded(spec.state, basis), (P, 1))
    j = np.arange(basis.N, dtype=np.uint64)[None, :]
    z = standard_normals(master_seed, path_ids[:, None], PURPOSE_INITIAL, j)
    if spec.shape == "gaussian_modes":
        return z * spec._padded(spec.std, basis)
    rho = math.sqrt(float(spec.profile.radius_sq(tau)))
    u = uniforms(master_seed, path_ids, PURPOSE_INITIAL, np.uint64(_RADIUS_INDEX))
    radius = rho * u ** (1.0 / basis.N)
    norm = np.sqrt(np.sum(z * z, axis=1))
    return z * (radius / norm)[:, None]


def sample_initial(spec: FamilySpec, tau: float, path_id: int, master_seed: int, basis: Basis) -> SpectralState:
    return SpectralState(sample_initial_batch(spec, tau, [path_id], master_seed, basis)[0], basis)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    times: np.ndarray
    mean_h_sq: np.ndarray
    ci_half_width: np.ndarray
    mean_v_sq: np.ndarray
    path_count: int
    residual_mean: np.ndarray | None = None
    residual_ci: np.ndarray | None = None


def _mean_ci(x: np.ndarray):
    """Mean and 95% normal half-width over the path axis (axis 1)."""
    P = x.shape[1]
    return x.mean(axis=1), Z95 * x.std(axis=1, ddof=1) / math.sqrt(P)


def thread_count() -> int:
    raw = os.environ.get("MRA_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"MRA_THREADS must be an integer, got {raw!r}") from None
    return n if n > 0 else (os.cpu_count() or 1)


def _run_chunk(params, spec, tau, n, dt, path_ids, master_seed, basis, record_every, residuals, block=512):
    g = sample_initial_batch(spec, tau, path_ids, master_seed, basis)
    h_rec, v_rec, r_rec = [sp.h_norm_sq(g)], [sp.v_norm_sq(g, basis)], []
    for start in range(0, n, block):
        count = min(block, n - start)
        dW = brownian_block(master_seed, path_ids, dt, start, count) if params.stochastic else None
        for i in range(count):
            k = start + i
            t = tau + k * dt
            dw = None if dW is None else dW[i]
            g_new = advance(params, g, t, dt, basis, dw)
            hs = sp.h_norm_sq(g_new)
            bad = ~np.isfinite(hs) | (hs > BLOWUP_THRESHOLD)
            if bad.any():
                p = int(path_ids[np.argmax(bad)])
                raise EnsembleError(k + 1, tau + (k + 1) * dt, float(hs[np.argmax(bad)]), p)
            if residuals and k % record_every == 0:
                r_rec.append(energy_residual_array(params, np.stack([g, g_new]), np.array([t, t + dt]), dt, basis, None if dw is None else dw[None])[0])
            g = g_new
            if (k + 1) % record_every == 0 or k + 1 == n:
                h_rec.append(hs)
                v_rec.append(sp.v_norm_sq(g, basis))
    return np.array(h_rec), np.array(v_rec), (np.array(r_rec) if residuals else None)


def run_ensemble(
    params: ModelParams,
    spec: FamilySpec,
    tau: float,
    T: float,
    dt: float,
    P: int,
    master_seed: int,
    basis: Basis,
    record_every: int = 1,
    residuals: bool = False,
    threads: int | None = None,
) -> EnsembleResult:
    """Estimate ``E ||u(t)||^2`` (and ``E ||u(t)||_V^2``) with 95% normal CIs.

    With ``residuals=True`` the per-step energy residual on each interval
    ``[t_k, t_k + dt]`` starting at a recorded time is averaged as well.
    """
    if P < 2:
        raise ConfigurationError("an ensemble needs at least two paths")
    n = step_count(tau, T, dt)
    threads = thread_count() if threads is None else threads
    chunks = [np.arange(s, min(s + CHUNK, P), dtype=np.uint64) for s in range(0, P, CHUNK)]
    job = lambda ids: _run_chunk(params, spec, tau, n, dt, ids, master_seed, basis, record_every, residuals)  # noqa: E731
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    h = np.concatenate([p[0] for p in parts], axis=1)
    v = np.concatenate([p[1] for p in parts], axis=1)
    idx = list(range(0, n + 1, record_every))
    if idx[-1] != n:
        idx.append(n)
    times = tau + np.array(idx, dtype=float) * dt
    mean_h, ci = _mean_ci(h)
    r_mean = r_ci = None
    if residuals:
        r_mean, r_ci = _mean_ci(np.concatenate([p[2] for p in parts], axis=1))
    return EnsembleResult(
        times=times,
        mean_h_sq=mean_h,
        ci_half_width=ci,
        mean_v_sq=v.mean(axis=1),
        path_count=P,
        residual_mean=r_mean,
        residual_ci=r_ci,
    )
