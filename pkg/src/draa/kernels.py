"""Epoch-segment simulation kernels: numba-compiled and numpy-vectorized.

Within an epoch every agent's pull distribution is frozen, so a whole
contiguous block of rounds ("segment") can be simulated in one call.
Rewards are materialized lazily: since each reward is a pure function of
(seed, t, agent, arm), the kernels only draw the entries they touch
(the pulled arm plus any adversary-targeted arms), which is exactly
equivalent to drawing the full matrix and discarding the rest.

Two backends implement the same contract:

* ``numba``: a compiled per-round loop (default).
* ``numpy``: pure vectorized numpy (fallback; always available).

Backend selection: the ``DRAA_BACKEND`` environment variable (``numba``
or ``numpy``), overridable per call.  Pulls and per-pull rewards are
bit-identical across backends; floating-point aggregates (regret and
corruption sums) may differ in the last ulps because the accumulation
order differs, and are compared at 1e-9 in tests.

Budget rule shared by both backends: (round, agent) cells are processed
round-major, agent-minor; a cell is delivered only if the running spend
stays within budget, and the first overrun disables corruption for the
rest of the run.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rng import _mix64_np

BACKENDS = ("numba", "numpy")

_U64_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_U64_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_U64_MUL2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 2.0 ** -53

_REWARD_BERNOULLI = 0
_REWARD_BETA = 1

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def default_backend() -> str:
    """Resolve the backend from DRAA_BACKEND (default numba if present)."""
    choice = os.environ.get("DRAA_BACKEND", "").strip().lower()
    if choice:
        if choice not in BACKENDS:
            raise ConfigError(f"DRAA_BACKEND must be one of {BACKENDS}, got {choice!r}")
        if choice == "numba" and not _HAVE_NUMBA:
            raise ConfigError("DRAA_BACKEND=numba but numba is not importable")
        return choice
    return "numba" if _HAVE_NUMBA else "numpy"


@dataclass
class SegmentPlan:
    """Immutable inputs describing one contiguous block of rounds.

    Arrays are padded to the widest local arm count; ``n_local`` gives
    each agent's true arm count.  ``targets``/``pushes`` are (L, 2)
    adversary edits with -1 padding for unused slots.
    """

    t_start: int  # first round, 1-based, inclusive
    t_end: int  # last round, inclusive
    env_prefix: int
    pull_prefix: int
    arms: np.ndarray  # (L, Kmax) int64, -1 padded
    n_local: np.ndarray  # (L,) int64
    cdf: np.ndarray  # (L, Kmax) float64, padded with 1.0
    means: np.ndarray  # (K,)
    best_means: np.ndarray  # (L,)
    reward_model: int  # _REWARD_BERNOULLI or _REWARD_BETA
    beta_table: np.ndarray  # (K, N) or (0, 0)
    targets: np.ndarray  # (L, 2) int64
    pushes: np.ndarray  # (L, 2) float64
    budget: float
    spent: float
    adv_active: bool


@dataclass
class SegmentResult:
    """Aggregates produced by a kernel for one segment."""

    reward_sums: np.ndarray  # (L, Kmax) delivered-reward sums per local slot
    pull_counts: np.ndarray  # (L, Kmax) int64
    regret: np.ndarray  # (L,) pseudo-regret accumulated in the segment
    corruption: np.ndarray  # (L,) accepted ledger contributions
    spent: float  # budget spend after the segment
    adv_active: bool
    pulls: np.ndarray | None = None  # (Tseg, L) arm ids when traced
    observed: np.ndarray | None = None  # (Tseg, L) delivered pulled rewards
    clean: np.ndarray | None = None  # (Tseg, L) clean pulled rewards


@njit(cache=True)
def _mix64_nb(x: np.uint64) -> np.uint64:  # pragma: no cover - compiled
    x = x + _U64_GAMMA
    x = (x ^ (x >> np.uint64(30))) * _U64_MUL1
    x = (x ^ (x >> np.uint64(27))) * _U64_MUL2
    return x ^ (x >> np.uint64(31))


@njit(cache=True)
def _uniform_nb(prefix, t, agent, arm):  # pragma: no cover - compiled
    h = _mix64_nb(np.uint64(prefix) ^ np.uint64(t))
    h = _mix64_nb(h ^ np.uint64(agent))
    h = _mix64_nb(h ^ np.uint64(arm))
    return (h >> np.uint64(11)) * _INV_2_53


@njit(cache=True)
def _reward_nb(model, mu, u, table, arm):  # pragma: no cover - compiled
    if model == 0:
        return 1.0 if u < mu else 0.0
    n = table.shape[1]
    pos = u * (n - 1)
    idx = int(pos)
    if idx > n - 2:
        idx = n - 2
    frac = pos - idx
    lo = table[arm, idx]
    hi = table[arm, idx + 1]
    return lo + (hi - lo) * frac


@njit(cache=True)
def _segment_nb(t_start, t_end, env_prefix, pull_prefix, arms, n_local, cdf,
                means, best_means, reward_model, beta_table, targets, pushes,
                budget, spent, adv_active, reward_sums, pull_counts, regret,
                corruption, pulls, observed, clean_out,
                trace):  # pragma: no cover - compiled
    L = arms.shape[0]
    for t in range(t_start, t_end + 1):
        row = t - t_start
        for ell in range(L):
            u_pull = _uniform_nb(pull_prefix, t, ell, 0)
            n = n_local[ell]
            idx = 0
            while idx < n - 1 and u_pull >= cdf[ell, idx]:
                idx += 1
            arm = arms[ell, idx]
            u_env = _uniform_nb(env_prefix, t, ell, arm)
            clean = _reward_nb(reward_model, means[arm], u_env, beta_table, arm)
            delivered = clean

            if adv_active and (targets[ell, 0] >= 0 or targets[ell, 1] >= 0):
                contribution = 0.0
                d0 = 0.0
                d1 = 0.0
                c0 = 0.0
                c1 = 0.0
                for j in range(2):
                    k = targets[ell, j]
                    if k < 0:
                        continue
                    local = False
                    for i in range(n):
                        if arms[ell, i] == k:
                            local = True
                            break
                    if not local:
                        continue
                    uj = _uniform_nb(env_prefix, t, ell, k)
                    cj = _reward_nb(reward_model, means[k], uj, beta_table, k)
                    dj = cj + pushes[ell, j]
                    if dj < 0.0:
                        dj = 0.0
                    elif dj > 1.0:
                        dj = 1.0
                    diff = dj - cj
                    if diff < 0.0:
                        diff = -diff
                    if diff > contribution:
                        contribution = diff
                    if j == 0:
                        d0 = dj
                        c0 = 1.0
                    else:
                        d1 = dj
                        c1 = 1.0
                if c0 > 0.0 or c1 > 0.0:
                    if spent + contribution > budget:
                        adv_active = False
                    else:
                        spent += contribution
                        corruption[ell] += contribution
                        if c0 > 0.0 and arm == targets[ell, 0]:
                            delivered = d0
                        elif c1 > 0.0 and arm == targets[ell, 1]:
                            delivered = d1

            reward_sums[ell, idx] += delivered
            pull_counts[ell, idx] += 1
            regret[ell] += best_means[ell] - means[arm]
            if trace:
                pulls[row, ell] = arm
                observed[row, ell] = delivered
                clean_out[row, ell] = clean
    return spent, adv_active


def run_segment_numba(plan: SegmentPlan, trace: bool = False) -> SegmentResult:
    """Execute one segment with the compiled per-round loop."""
    if not _HAVE_NUMBA:
        raise ConfigError("numba backend requested but numba is unavailable")
    L, kmax = plan.arms.shape
    t_len = plan.t_end - plan.t_start + 1
    reward_sums = np.zeros((L, kmax))
    pull_counts = np.zeros((L, kmax), dtype=np.int64)
    regret = np.zeros(L)
    corruption = np.zeros(L)
    shape = (t_len, L) if trace else (0, L)
    pulls = np.zeros(shape, dtype=np.int64)
    observed = np.zeros(shape)
    clean = np.zeros(shape)
    beta_table = plan.beta_table if plan.beta_table.size else np.zeros((1, 2))
    spent, active = _segment_nb(
        plan.t_start, plan.t_end, np.uint64(plan.env_prefix),
        np.uint64(plan.pull_prefix), plan.arms, plan.n_local, plan.cdf,
        plan.means, plan.best_means, plan.reward_model, beta_table,
        plan.targets, plan.pushes, plan.budget, plan.spent, plan.adv_active,
        reward_sums, pull_counts, regret, corruption, pulls, observed, clean,
        trace,
    )
    return SegmentResult(
        reward_sums=reward_sums, pull_counts=pull_counts, regret=regret,
        corruption=corruption, spent=float(spent), adv_active=bool(active),
        pulls=pulls if trace else None,
        observed=observed if trace else None,
        clean=clean if trace else None,
    )


def _uniform_np(prefix: int, t: np.ndarray, agent: int, arm) -> np.ndarray:
    h = _mix64_np(np.uint64(prefix) ^ t)
    h = _mix64_np(h ^ np.uint64(agent))
    h = _mix64_np(h ^ np.asarray(arm, dtype=np.uint64))
    return (h >> np.uint64(11)) * _INV_2_53


def _reward_np(model: int, means: np.ndarray, arms: np.ndarray,
               u: np.ndarray, table: np.ndarray) -> np.ndarray:
    if model == _REWARD_BERNOULLI:
        return (u < means[arms]).astype(np.float64)
    n = table.shape[1]
    pos = u * (n - 1)
    idx = np.minimum(pos.astype(np.int64), n - 2)
    frac = pos - idx
    lo = table[arms, idx]
    hi = table[arms, idx + 1]
    return lo + (hi - lo) * frac


def run_segment_numpy(plan: SegmentPlan, trace: bool = False) -> SegmentResult:
    """Execute one segment with vectorized numpy (fallback backend)."""
    L, kmax = plan.arms.shape
    t_len = plan.t_end - plan.t_start + 1
    ts = np.arange(plan.t_start, plan.t_end + 1, dtype=np.uint64)
    reward_sums = np.zeros((L, kmax))
    pull_counts = np.zeros((L, kmax), dtype=np.int64)
    regret = np.zeros(L)
    corruption = np.zeros(L)

    # phase 1: pulls and clean rewards, fully vectorized per agent
    pulled_idx = np.empty((t_len, L), dtype=np.int64)
    pulled_arm = np.empty((t_len, L), dtype=np.int64)
    clean = np.empty((t_len, L))
    for ell in range(L):
        n = int(plan.n_local[ell])
        u_pull = _uniform_np(plan.pull_prefix, ts, ell, 0)
        idx = np.searchsorted(plan.cdf[ell, :n], u_pull, side="right")
        idx = np.minimum(idx, n - 1)
        arm = plan.arms[ell, idx]
        u_env = _uniform_np(plan.env_prefix, ts, ell, arm)
        pulled_idx[:, ell] = idx
        pulled_arm[:, ell] = arm
        clean[:, ell] = _reward_np(plan.reward_model, plan.means, arm, u_env,
                                   plan.beta_table)

    observed = clean.copy()
    spent = plan.spent
    adv_active = plan.adv_active

    if adv_active and np.any(plan.targets >= 0):
        # per-cell contribution and per-slot delivered values
        contrib = np.zeros((t_len, L))
        delivered = np.zeros((t_len, L, 2))
        has_slot = np.zeros((L, 2), dtype=bool)
        for ell in range(L):
            n = int(plan.n_local[ell])
            local = set(int(a) for a in plan.arms[ell, :n])
            for j in range(2):
                k = int(plan.targets[ell, j])
                if k < 0 or k not in local:
                    continue
                u_env = _uniform_np(plan.env_prefix, ts, ell, k)
                cj = _reward_np(plan.reward_model, plan.means,
                                np.full(t_len, k, dtype=np.int64), u_env,
                                plan.beta_table)
                dj = np.clip(cj + plan.pushes[ell, j], 0.0, 1.0)
                delivered[:, ell, j] = dj
                contrib[:, ell] = np.maximum(contrib[:, ell], np.abs(dj - cj))
                has_slot[ell, j] = True
        if has_slot.any():
            # round-major, agent-minor prefix budget rule
            flat = contrib.reshape(-1)
            cum = plan.spent + np.cumsum(flat)
            accepted = (cum <= plan.budget)
            first_reject = np.argmax(~accepted) if not accepted.all() else flat.size
            accepted[first_reject:] = False
            accepted = accepted.reshape(t_len, L)
            targeted = has_slot.any(axis=1)[np.newaxis, :] & np.ones(
                (t_len, 1), dtype=bool)
            applied = accepted & targeted
            # cum is a sequential accumulation, so reusing it keeps the
            # spend bit-identical to the compiled loop's running sum
            spent = float(cum[first_reject - 1]) if first_reject > 0 else plan.spent
            adv_active = bool(first_reject == flat.size)
            corruption += np.where(applied, contrib, 0.0).sum(axis=0)
            for j in range(2):
                hit = applied & (pulled_arm == plan.targets[:, j][np.newaxis, :]) \
                    & has_slot[:, j][np.newaxis, :]
                observed = np.where(hit, delivered[:, :, j], observed)

    for ell in range(L):
        n = int(plan.n_local[ell])
        reward_sums[ell, :n] = np.bincount(pulled_idx[:, ell],
                                           weights=observed[:, ell],
                                           minlength=n)[:n]
        pull_counts[ell, :n] = np.bincount(pulled_idx[:, ell], minlength=n)[:n]
        regret[ell] = plan.best_means[ell] * t_len - plan.means[pulled_arm[:, ell]].sum()

    return SegmentResult(
        reward_sums=reward_sums, pull_counts=pull_counts, regret=regret,
        corruption=corruption, spent=float(spent), adv_active=adv_active,
        pulls=pulled_arm if trace else None,
        observed=observed if trace else None,
        clean=clean if trace else None,
    )


def run_segment(plan: SegmentPlan, backend: str | None = None,
                trace: bool = False) -> SegmentResult:
    """Dispatch a segment to the requested (or default) backend."""
    backend = backend or default_backend()
    if backend == "numba":
        return run_segment_numba(plan, trace)
    if backend == "numpy":
        return run_segment_numpy(plan, trace)
    raise ConfigError(f"unknown backend {backend!r}")
