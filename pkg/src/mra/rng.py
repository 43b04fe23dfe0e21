"""Stateless counter-based normal variates (Philox4x32-10 + Box-Muller).

Every variate is a pure function of ``(master_seed, path_id, purpose, index)``,
so paths can be generated in any order, on any thread, and any single
increment can be recomputed in isolation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = 0xFFFFFFFF

PURPOSE_BROWNIAN = 0x01
PURPOSE_INITIAL = 0x02


def philox4x32(counter, key, rounds: int = 10):
    """Philox4x32 block function; ``counter`` is a 4-tuple of uint32 arrays."""
    c0, c1, c2, c3 = (np.asarray(x, dtype=np.uint32) for x in counter)
    k0, k1 = np.uint32(key[0]), np.uint32(key[1])
    with np.errstate(over="ignore"):
        for _ in range(rounds):
            p0 = _M0 * c0.astype(np.uint64)
            p1 = _M1 * c2.astype(np.uint64)
            hi0 = (p0 >> np.uint64(32)).astype(np.uint32)
            hi1 = (p1 >> np.uint64(32)).astype(np.uint32)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, p1.astype(np.uint32), hi0 ^ c3 ^ k1, p0.astype(np.uint32)
            k0 = k0 + _W0
            k1 = k1 + _W1
    return c0, c1, c2, c3


def _key(seed: int) -> tuple[int, int]:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return seed & _MASK32, seed >> 32


def _uniform_pair(seed: int, path_ids, purpose: int, index):
    """Two 53-bit uniforms per counter: ``u1`` in (0, 1], ``u2`` in [0, 1)."""
    path_ids = np.asarray(path_ids, dtype=np.uint64)
    index = np.asarray(index, dtype=np.uint64)
    path_ids, index = np.broadcast_arrays(path_ids, index)
    lo = (index & np.uint64(_MASK32)).astype(np.uint32)
    hi = (index >> np.uint64(32)).astype(np.uint32)
    pid = path_ids.astype(np.uint32)
    tag = ((path_ids >> np.uint64(32)).astype(np.uint32) & np.uint32(0x00FFFFFF)) | np.uint32(purpose << 24)
    x0, x1, x2, x3 = philox4x32((lo, hi, pid, tag), _key(seed))
    a = (x0.astype(np.uint64) << np.uint64(21)) ^ (x1.astype(np.uint64) >> np.uint64(11))
    b = (x2.astype(np.uint64) << np.uint64(21)) ^ (x3.astype(np.uint64) >> np.uint64(11))
    a &= np.uint64((1 << 53) - 1)
    b &= np.uint64((1 << 53) - 1)
    u1 = (a.astype(np.float64) + 1.0) * 2.0**-53
    u2 = b.astype(np.float64) * 2.0**-53
    return u1, u2


def standard_normals(seed: int, path_ids, purpose: int, index) -> np.ndarray:
    """N(0, 1) variates at ``(path_ids, index)``; arrays broadcast against each other."""
    u1, u2 = _uniform_pair(seed, path_ids, purpose, index)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def uniforms(seed: int, path_ids, purpose: int, index) -> np.ndarray:
    """U(0, 1] variates on the same counter space as ``standard_normals``."""
    return _uniform_pair(seed, path_ids, purpose, index)[0]


@dataclass(frozen=True)
class BrownianStream:
    """Wiener increments for one path; ``increment(k)`` is ``N(0, dt)``."""

    master_seed: int
    path_id: int
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    def increment(self, step: int) -> float:
        return float(np.sqrt(self.dt) * standard_normals(self.master_seed, self.path_id, PURPOSE_BROWNIAN, step))

    def increments(self, start: int, count: int) -> np.ndarray:
        idx = np.arange(start, start + count, dtype=np.uint64)
        return np.sqrt(self.dt) * standard_normals(self.master_seed, self.path_id, PURPOSE_BROWNIAN, idx)


def brownian_increment(stream: BrownianStream, step: int) -> float:
    return stream.increment(step)


def brownian_block(seed: int, path_ids: np.ndarray, dt: float, start: int, count: int) -> np.ndarray:
    """Increments for many paths at once, shape ``(count, len(path_ids))``."""
    idx = np.arange(start, start + count, dtype=np.uint64)[:, None]
    return np.sqrt(dt) * standard_normals(seed, np.asarray(path_ids, dtype=np.uint64)[None, :], PURPOSE_BROWNIAN, idx)
