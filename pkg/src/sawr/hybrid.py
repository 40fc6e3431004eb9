"""Simulated annealing with reinforcement (SAwR).

The run anneals classically through the low-beta (hot) part of the
schedule, then replaces the cold Metropolis phase with exactly one greedy
pass of the learned flip policy, started from the best state the
annealing phase visited. The result is the lowest-energy state seen
anywhere: start, annealing phase, or learned pass.

Degenerate cases are exact: ``beta_switch = +inf`` skips the learned pass
and reproduces plain simulated annealing bit for bit (same seed, same
stream); ``beta_switch <= min(betas)`` leaves the annealing phase empty
and reproduces a single greedy episode from the start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .agent import episode
from .annealing import AnnealResult, AnnealSchedule, simulated_annealing
from .gnn import QNetworkParams
from .ising import IsingInstance, SpinConfiguration, energy

DEFAULT_BETA_SWITCH_FRACTION = 0.8


def default_beta_switch(sched: AnnealSchedule) -> float:
    """Default switch point: 80% of the schedule's top inverse temperature."""
    return DEFAULT_BETA_SWITCH_FRACTION * float(sched.betas[-1])


@dataclass
class SawrConfig:
    schedule: AnnealSchedule
    beta_switch: float
    params: QNetworkParams
    seed: int = 0

    def __post_init__(self):
        if math.isnan(self.beta_switch) or self.beta_switch < 0:
            raise ValueError(f"beta_switch must be >= 0 or +inf, got {self.beta_switch}")


def sawr(inst: IsingInstance, start: SpinConfiguration, cfg: SawrConfig) -> AnnealResult:
    """Hybrid solve of one instance from ``start`` (never mutated)."""
    if math.isinf(cfg.beta_switch):
        return simulated_annealing(inst, start, cfg.schedule, cfg.seed)

    hot = cfg.schedule.betas[cfg.schedule.betas < cfg.beta_switch]
    if hot.size:
        sa_res = simulated_annealing(
            inst, start, AnnealSchedule(hot, cfg.schedule.sweeps_per_beta), cfg.seed)
        base = sa_res.best_config
        best_energy = sa_res.best_energy
        trace = list(sa_res.trace)
        accepted = sa_res.accepted_moves
    else:
        base = start
        best_energy = energy(inst, start)
        trace = []
        accepted = 0

    ep = episode(inst, base, cfg.params)  # greedy: consumes no randomness
    if ep.best_energy < best_energy:
        best = ep.best_config
        best_energy = ep.best_energy
    else:
        best = SpinConfiguration(base.spins.copy(), best_energy)
    trace.append(best_energy)
    return AnnealResult(best, float(best_energy), np.asarray(trace), accepted)
