"""Counter-based deterministic random streams.

Every uniform draw is a pure function of the tuple
``(master seed, stream id, round t, agent, arm)``.  There is no mutable
generator state, so any value can be recomputed lazily, in any order, on
any worker, and replaying a run with the same seed reproduces the exact
same values bit for bit.  Streams are given disjoint ids so that, e.g.,
adding an adversary never shifts the environment or agent randomness.

The mixer is the splitmix64 finalizer, applied once per absorbed key
field.  Three equivalent implementations are kept in sync: a plain-int
scalar version (reference), a vectorized numpy version (fallback
backend) and a numba-compiled version (fast backend); tests assert they
agree exactly.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

# Stream ids.  ENV draws rewards, ADV feeds adversary randomness, PULL
# drives the agents' arm choices.
ENV_STREAM = 0
ADV_STREAM = 1
PULL_STREAM = 2

#: 1 ulp below 1.0 is never produced; draws live in [0, 1).
_INV_2_53 = 2.0**-53


def mix64(x: int) -> int:
    """splitmix64 finalizer on a 64-bit integer (plain-int reference)."""
    x = (x + _GAMMA) & MASK64
    x = ((x ^ (x >> 30)) * _MUL1) & MASK64
    x = ((x ^ (x >> 27)) * _MUL2) & MASK64
    return x ^ (x >> 31)


def stream_prefix(seed: int, stream: int) -> int:
    """Absorb (seed, stream); the remaining fields are absorbed per draw."""
    return mix64(mix64(seed & MASK64) ^ (stream & MASK64))


def uniform(seed: int, stream: int, t: int, agent: int = 0, arm: int = 0) -> float:
    """One uniform in [0, 1) for the given counter tuple."""
    h = stream_prefix(seed, stream)
    h = mix64(h ^ (t & MASK64))
    h = mix64(h ^ (agent & MASK64))
    h = mix64(h ^ (arm & MASK64))
    return (h >> 11) * _INV_2_53


def _mix64_np(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):  # uint64 wraparound is the point
        x = x + np.uint64(_GAMMA)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(_MUL1)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(_MUL2)
    return x ^ (x >> np.uint64(31))


def uniform_array(prefix: int, t: np.ndarray | int, agent: int, arm) -> np.ndarray:
    """Vectorized uniforms; ``t`` and/or ``arm`` may be uint64-able arrays.

    ``prefix`` must come from :func:`stream_prefix`.
    """
    h = _mix64_np(np.uint64(prefix) ^ np.asarray(t, dtype=np.uint64))
    h = _mix64_np(h ^ np.uint64(agent))
    h = _mix64_np(h ^ np.asarray(arm, dtype=np.uint64))
    return (h >> np.uint64(11)) * _INV_2_53


class Stream:
    """Thin handle binding (seed, stream id) for counter-based draws."""

    def __init__(self, seed: int, stream: int):
        self.seed = seed
        self.stream = stream
        self._prefix = stream_prefix(seed, stream)

    @property
    def prefix(self) -> int:
        return self._prefix

    def uniform(self, t: int, agent: int = 0, arm: int = 0) -> float:
        h = mix64(self._prefix ^ (t & MASK64))
        h = mix64(h ^ (agent & MASK64))
        h = mix64(h ^ (arm & MASK64))
        return (h >> 11) * _INV_2_53
