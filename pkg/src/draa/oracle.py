"""Independent reference computations used to cross-check the engine.

The oracles deliberately avoid the engine's code paths: expectations
are brute-forced by enumerating every joint pull assignment and reward
realization of a tiny epoch, and determinism is checked by literally
running a configuration twice and diffing the traces.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .adversary import make_adversary
from .agents import build_schedule
from .config import ExperimentConfig
from .engine import run_single
from .errors import ConfigError
from .model import BanditInstance

#: refuse enumerations beyond this many (pulls x rewards) atoms
_MAX_ATOMS = 2_000_000


@dataclass
class OracleReport:
    """Outcome of one oracle-versus-engine comparison."""

    quantity: str
    oracle_value: float
    engine_value: float
    abs_deviation: float
    rel_deviation: float
    samples: int = 0
    note: str = ""

    @property
    def matches(self) -> bool:
        return self.note in ("", "exact")

    def as_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "oracle_value": self.oracle_value,
            "engine_value": self.engine_value,
            "abs_deviation": self.abs_deviation,
            "rel_deviation": self.rel_deviation,
            "samples": self.samples,
            "note": self.note,
        }


def expected_pulls(probabilities, epoch_len: int) -> np.ndarray:
    """Per-arm expected pull counts p * T^m for one agent's epoch."""
    return np.asarray(probabilities, dtype=np.float64) * epoch_len


def exhaustive_estimator_mean(instance: BanditInstance, probabilities,
                              epoch_len: int, arm: int,
                              estimator: str = "weighted") -> float:
    """Exact E[estimate of one arm] by brute-force enumeration.

    ``probabilities`` is one vector per agent over that agent's local
    arms.  Every joint pull assignment over (agents x rounds) slots and
    every Bernoulli outcome of the pulled entries is enumerated and
    weighted by its probability.  Bernoulli rewards only.
    """
    if instance.reward_model != "bernoulli":
        raise ConfigError("exhaustive oracle supports Bernoulli rewards only")
    L = instance.num_agents
    probs = [np.asarray(p, dtype=np.float64) for p in probabilities]
    holders = [ell for ell in range(L) if arm in instance.arm_sets[ell]]
    if not holders:
        raise ConfigError(f"arm {arm} is not held by any agent")
    n_slots = L * epoch_len
    n_pull_atoms = 1
    for ell in range(L):
        n_pull_atoms *= len(instance.arm_sets[ell]) ** epoch_len
    if n_pull_atoms * (2 ** n_slots) > _MAX_ATOMS:
        raise ConfigError("enumeration state space too large")

    slot_agents = [ell for ell in range(L) for _ in range(epoch_len)]
    choice_lists = [list(range(len(instance.arm_sets[ell])))
                    for ell in slot_agents]

    total = 0.0
    for assignment in itertools.product(*choice_lists):
        p_pulls = 1.0
        pulled_arms = []
        for slot, local_idx in enumerate(assignment):
            ell = slot_agents[slot]
            p_pulls *= probs[ell][local_idx]
            pulled_arms.append(instance.arm_sets[ell][local_idx])
        for outcome in itertools.product((0.0, 1.0), repeat=n_slots):
            p_rewards = 1.0
            sums = {ell: 0.0 for ell in holders}
            for slot, r in enumerate(outcome):
                mu = instance.means[pulled_arms[slot]]
                p_rewards *= mu if r == 1.0 else (1.0 - mu)
                if p_rewards == 0.0:
                    break
                ell = slot_agents[slot]
                if ell in sums and pulled_arms[slot] == arm:
                    sums[ell] += r
            if p_rewards == 0.0:
                continue
            if estimator == "weighted":
                est = sum(
                    sums[ell] / probs[ell][instance.arm_sets[ell].index(arm)]
                    for ell in holders
                ) / (len(holders) * epoch_len)
            elif estimator == "naive":
                denom = sum(probs[ell][instance.arm_sets[ell].index(arm)]
                            for ell in holders) * epoch_len
                est = sum(sums[ell] for ell in holders) / denom
            else:
                raise ConfigError(f"unknown estimator {estimator!r}")
            total += p_pulls * p_rewards * est
    return total


def _run_for_replay(config: ExperimentConfig, seed: int, backend=None):
    schedule = build_schedule(config.instance, config.horizon, config.delta,
                              config.lam_scale)
    adversary = make_adversary(config.adversary)
    return run_single(config.instance, schedule, adversary, seed,
                      estimator=config.estimator, backend=backend, trace=True)


def replay_check(config: ExperimentConfig, seed: int,
                 reference=None, backend=None) -> OracleReport:
    """Rerun a configuration and diff pulls bit for bit.

    With no ``reference`` the config is run twice from scratch.  The
    report's note is empty on a byte-identical replay.
    """
    if reference is None:
        reference = _run_for_replay(config, seed, backend)
    replay = _run_for_replay(config, seed, backend)
    same_pulls = bool(np.array_equal(reference.pulls, replay.pulls))
    same_obs = bool(np.array_equal(reference.observed, replay.observed))
    dev = abs(reference.total_regret - replay.total_regret)
    note = ""
    if reference.seed != replay.seed:
        note = "different trace (expected)"
    elif not (same_pulls and same_obs and dev == 0.0):
        note = "trace mismatch: determinism regression"
    return OracleReport(
        quantity=f"replay(seed={seed})",
        oracle_value=reference.total_regret,
        engine_value=replay.total_regret,
        abs_deviation=dev,
        rel_deviation=dev / max(abs(reference.total_regret), 1e-12),
        samples=reference.pulls.size,
        note=note,
    )


def monte_carlo_estimate_mean(instance: BanditInstance, probabilities,
                              epoch_len: int, arm: int, estimator: str,
                              n_epochs: int, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo mean and standard error of an estimator, independent path.

    Simulates ``n_epochs`` isolated epochs with numpy's own generator
    (not the engine RNG), pooling the holders' reward sums exactly as
    the estimator definition prescribes.
    """
    rng = np.random.default_rng(seed)
    L = instance.num_agents
    probs = [np.asarray(p, dtype=np.float64) for p in probabilities]
    holders = [ell for ell in range(L) if arm in instance.arm_sets[ell]]
    values = np.empty(n_epochs)
    for i in range(n_epochs):
        sums = np.zeros(L)
        for ell in range(L):
            arms = instance.arm_sets[ell]
            pulls = rng.choice(len(arms), size=epoch_len, p=probs[ell])
            for local_idx in pulls:
                k = arms[local_idx]
                if k == arm:
                    sums[ell] += float(rng.random() < instance.means[k])
        if estimator == "weighted":
            values[i] = sum(
                sums[ell] / probs[ell][instance.arm_sets[ell].index(arm)]
                for ell in holders
            ) / (len(holders) * epoch_len)
        else:
            denom = sum(probs[ell][instance.arm_sets[ell].index(arm)]
                        for ell in holders) * epoch_len
            values[i] = sums[holders].sum() / denom
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n_epochs))


def compare(quantity: str, oracle_value: float, engine_value: float,
            tol: float, samples: int = 0) -> OracleReport:
    dev = abs(oracle_value - engine_value)
    return OracleReport(
        quantity=quantity,
        oracle_value=oracle_value,
        engine_value=engine_value,
        abs_deviation=dev,
        rel_deviation=dev / max(abs(oracle_value), 1e-12),
        samples=samples,
        note="" if dev <= tol else f"deviation {dev:g} exceeds {tol:g}",
    )
