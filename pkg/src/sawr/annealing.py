"""Simulated annealing over single-spin flips with Metropolis acceptance.

Reproducibility contract: the random stream is PCG64 (numpy's default_rng)
seeded with the caller's seed, and every proposal consumes exactly two
draws in a fixed order: one bounded integer for the node choice, then one
uniform in [0, 1) for the acceptance test. The uniform is drawn even when
the move is accepted downhill, so the stream position depends only on the
proposal count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ising import IsingInstance, SpinConfiguration, apply_flip, energy, flip_delta

DEFAULT_BETA_MIN = 0.1
DEFAULT_BETA_MAX = 5.0
DEFAULT_BETA_STEPS = 100
DEFAULT_SWEEPS = 1


@dataclass(frozen=True)
class AnnealSchedule:
    """Non-decreasing inverse temperatures and sweeps spent at each."""

    betas: np.ndarray
    sweeps_per_beta: int = 1

    def __post_init__(self):
        betas = np.ascontiguousarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size == 0:
            raise ValueError("schedule needs at least one inverse temperature")
        if not np.isfinite(betas).all() or (betas < 0).any():
            raise ValueError("inverse temperatures must be finite and >= 0")
        if (np.diff(betas) < 0).any():
            raise ValueError("inverse temperatures must be non-decreasing")
        if self.sweeps_per_beta < 1:
            raise ValueError("sweeps_per_beta must be >= 1")
        betas.setflags(write=False)
        object.__setattr__(self, "betas", betas)

    def __len__(self) -> int:
        return self.betas.size


@dataclass
class AnnealResult:
    best_config: SpinConfiguration
    best_energy: float
    trace: np.ndarray       # best-so-far energy after each beta
    accepted_moves: int


def geometric_schedule(beta_min: float, beta_max: float, steps: int,
                       sweeps_per_beta: int = 1) -> AnnealSchedule:
    """betas[k] = beta_min * (beta_max/beta_min)**(k/(steps-1)); [beta_min] for steps=1."""
    if not (math.isfinite(beta_min) and math.isfinite(beta_max)):
        raise ValueError("inverse temperatures must be finite")
    if beta_min <= 0 or beta_max < beta_min:
        raise ValueError(f"need 0 < beta_min <= beta_max, got ({beta_min}, {beta_max})")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if steps == 1:
        return AnnealSchedule(np.array([beta_min]), sweeps_per_beta)
    exponents = np.arange(steps) / (steps - 1)
    betas = beta_min * (beta_max / beta_min) ** exponents
    betas[0] = beta_min
    betas[-1] = beta_max
    # repair sub-ulp rounding wobble so the schedule is truly non-decreasing
    np.maximum.accumulate(betas, out=betas)
    np.minimum(betas, beta_max, out=betas)
    return AnnealSchedule(betas, sweeps_per_beta)


def default_schedule() -> AnnealSchedule:
    return geometric_schedule(DEFAULT_BETA_MIN, DEFAULT_BETA_MAX,
                              DEFAULT_BETA_STEPS, DEFAULT_SWEEPS)


def metropolis_accept(delta_e: float, beta: float, u: float) -> bool:
    """Accept iff u < min(1, exp(-beta * delta_e))."""
    if beta < 0 or not math.isfinite(beta):
        raise ValueError(f"beta must be finite and >= 0, got {beta}")
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    if delta_e <= 0.0:
        return True
    return u < math.exp(-beta * delta_e)


def simulated_annealing(inst: IsingInstance, start: SpinConfiguration,
                        sched: AnnealSchedule, seed) -> AnnealResult:
    """Anneal from ``start``; each sweep proposes N uniformly random flips.

    The start configuration is not mutated. The returned best is the
    lowest-energy state ever visited, including the start itself.
    """
    n = inst.topo.num_nodes
    if len(start) != n:
        raise ValueError(f"start has {len(start)} spins, instance has {n} nodes")
    rng = np.random.default_rng(seed)
    cur = SpinConfiguration(start.spins.copy(), energy(inst, start))
    best_spins = cur.spins.copy()
    best_energy = cur.cached_energy
    accepted = 0
    trace = np.empty(len(sched))
    for b, beta in enumerate(sched.betas):
        for _ in range(sched.sweeps_per_beta):
            for _ in range(n):
                i = int(rng.integers(0, n))
                u = float(rng.random())
                delta = flip_delta(inst, cur, i)
                if metropolis_accept(delta, beta, u):
                    apply_flip(cur, i, delta)
                    accepted += 1
                    if cur.cached_energy < best_energy:
                        best_energy = cur.cached_energy
                        best_spins[:] = cur.spins
        trace[b] = best_energy
    return AnnealResult(SpinConfiguration(best_spins, best_energy),
                        float(best_energy), trace, accepted)
