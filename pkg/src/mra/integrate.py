"""Time stepping for the Galerkin system.

Both steppers freeze the non-local coefficient at the left point and treat
the stiff diagonal ``a lambda_j`` implicitly, everything else explicitly:

    gamma' = (gamma + dt (F(gamma) + h(t)) + S(gamma) dW) / (1 + dt a(||gamma||_V^2) lambda)

The noise coefficient ``S`` is evaluated at the left point (Ito).  The
implicit diagonal keeps the scheme unconditionally stable for the linear
part, so ``dt`` is not tied to ``1 / (M lambda_N)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import spectral as sp
from .model import ModeError, ModelParams, noise_modes, reaction_modes
from .rng import BrownianStream
from .spectral import Basis, SpectralState

BLOWUP_THRESHOLD = 1e12


class BlowUpError(RuntimeError):
    def __init__(self, step: int, time: float, h_sq: float, path_id=None):
        self.step = step
        self.time = time
        self.h_sq = h_sq
        self.path_id = path_id
        where = f" on path {path_id}" if path_id is not None else ""
        super().__init__(f"state left the admissible range at step {step} (t={time:.6g}, ||u||^2={h_sq:.3g}){where}")


def advance(params: ModelParams, gamma: np.ndarray, t: float, dt: float, basis: Basis, dW=None) -> np.ndarray:
    """One semi-implicit step on a ``(N,)`` or ``(P, N)`` coefficient array."""
    a = params.a(sp.v_norm_sq(gamma, basis))[..., None]
    num = gamma + dt * (reaction_modes(params, gamma, basis) + params.forcing.modes_at(t, basis))
    if dW is not None:
        num = num + noise_modes(params, gamma, basis) * np.asarray(dW)[..., None]
    return num / (1.0 + dt * a * basis.lam)


def step_deterministic(state: SpectralState, t: float, dt: float, params: ModelParams) -> SpectralState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if params.stochastic:
        raise ModeError("step_deterministic needs a deterministic-mode model")
    return SpectralState(advance(params, state.gamma, t, dt, state.basis), state.basis)


def step_stochastic(state: SpectralState, t: float, dt: float, dW: float, params: ModelParams) -> SpectralState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not params.stochastic:
        raise ModeError("step_stochastic needs a stochastic-mode model")
    return SpectralState(advance(params, state.gamma, t, dt, state.basis, dW), state.basis)


def step_count(tau: float, T: float, dt: float) -> int:
    if not T > tau:
        raise ValueError(f"need tau < T, got tau={tau}, T={T}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    return max(1, int(round((T - tau) / dt)))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniform-step trajectory with per-record diagnostics.

    ``gammas[k]`` is the state at ``times[k]``; ``increments[k]`` is the
    Wiener increment used on ``[times[k], times[k] + dt]`` (empty when
    deterministic).
    """

    basis: Basis
    dt: float
    times: np.ndarray
    gammas: np.ndarray
    h_sq: np.ndarray
    v_sq: np.ndarray
    a_values: np.ndarray
    h2_sq: np.ndarray
    record_every: int = 1
    increments: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def states(self) -> list[SpectralState]:
        return [SpectralState(g, self.basis) for g in self.gammas]

    @property
    def final(self) -> SpectralState:
        return SpectralState(self.gammas[-1], self.basis)


def simulate_path(
    initial: SpectralState,
    tau: float,
    T: float,
    dt: float,
    params: ModelParams,
    stream: BrownianStream | None = None,
    record_every: int = 1,
) -> Trajectory:
    """Integrate one path from ``tau`` to (within ``dt`` of) ``T``."""
    if params.stochastic != (stream is not None):
        raise ModeError("a Brownian stream is required in stochastic mode and forbidden otherwise")
    if stream is not None and stream.dt != dt:
        raise ValueError("stream dt differs from the step size")
    basis = initial.basis
    n = step_count(tau, T, dt)
    dWs = stream.increments(0, n) if stream is not None else None
    gamma = initial.gamma.copy()
    rec = [gamma]
    idx = [0]
    for k in range(n):
        t = tau + k * dt
        gamma = advance(params, gamma, t, dt, basis, None if dWs is None else dWs[k])
        h = float(sp.h_norm_sq(gamma))
        if not np.isfinite(h) or h > BLOWUP_THRESHOLD:
            raise BlowUpError(k + 1, tau + (k + 1) * dt, h, getattr(stream, "path_id", None))
        if (k + 1) % record_every == 0 or k + 1 == n:
            rec.append(gamma)
            idx.append(k + 1)
    gammas = np.array(rec)
    times = tau + np.array(idx, dtype=float) * dt
    vsq = sp.v_norm_sq(gammas, basis)
    return Trajectory(
        basis=basis,
        dt=dt,
        times=times,
        gammas=gammas,
        h_sq=sp.h_norm_sq(gammas),
        v_sq=vsq,
        a_values=params.a(vsq),
        h2_sq=sp.h2_norm_sq(gammas, basis),
        record_every=record_every,
        increments=np.zeros(0) if dWs is None else dWs,
    )


def energy_residual_array(
    params: ModelParams, gammas: np.ndarray, times: np.ndarray, dt: float, basis: Basis, dW=None
) -> np.ndarray:
    """Residuals of the discrete energy identity on consecutive steps.

    ``gammas`` has the step index first (``(K+1, N)`` or ``(K+1, P, N)``);
    ``dW`` matches ``gammas[:-1]`` without the mode axis.
    """
    g = gammas[:-1]
    a = params.a(sp.v_norm_sq(g, basis))
    F = reaction_modes(params, g, basis)
    h = np.stack([params.forcing.modes_at(t, basis) for t in times[:-1]])
    h = h.reshape(h.shape[:1] + (1,) * (g.ndim - 2) + h.shape[1:])
    r = sp.h_norm_sq(gammas[1:]) - sp.h_norm_sq(g)
    r = r + 2 * dt * a * sp.v_norm_sq(g, basis) - 2 * dt * np.sum((F + h) * g, axis=-1)
    if dW is not None:
        S = noise_modes(params, g, basis)
        r = r - dt * sp.h_norm_sq(S) - 2 * np.sum(S * g, axis=-1) * np.asarray(dW)
    return r


def energy_residual(traj: Trajectory, params: ModelParams, stream: BrownianStream | None = None) -> np.ndarray:
    """Per-step residual of the energy identity along a recorded trajectory.

    Deterministic terms: ``||u_{k+1}||^2 - ||u_k||^2 + 2 dt a_k ||u_k||_V^2
    - 2 dt (f~(u_k) + h_k, u_k)``; in stochastic mode also
    ``- dt ||S(u_k)||^2 - 2 (S(u_k), u_k) dW_k``.
    """
    if traj.record_every != 1:
        raise ValueError("energy residuals need every step recorded (record_every=1)")
    dW = None
    if params.stochastic:
        if stream is None:
            raise ModeError("stochastic residuals need the Brownian stream")
        dW = stream.increments(0, len(traj.times) - 1)
    return energy_residual_array(params, traj.gammas, traj.times, traj.dt, traj.basis, dW)
