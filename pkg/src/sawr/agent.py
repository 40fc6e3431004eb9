"""Flip-once episodes and n-step Q-learning on random spin-glass instances.

An episode runs exactly N steps. At each step the current instance and
configuration are re-encoded, a not-yet-flipped spin is selected (greedy
or epsilon-greedy over the scores), the flip is applied, and the reward is
the energy drop E(before) - E(after). The episode's solution is the
lowest-energy state among all N+1 visited states.

Epsilon-greedy randomness: per step one uniform draw decides explore vs
exploit; on explore a second bounded-integer draw picks uniformly among
the still-available spins. Greedy selection consumes no randomness.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import gnn
from .annealing import geometric_schedule, simulated_annealing
from .ising import (IsingInstance, SpinConfiguration, apply_flip, energy,
                    flip_delta, random_configuration, random_instance)
from .topology import build_chimera

DEFAULT_N_STEP = 5
DEFAULT_GAMMA = 0.99
DEFAULT_BUFFER_CAPACITY = 50_000
DEFAULT_BATCH_SIZE = 64
DEFAULT_TARGET_SYNC = 500
DEFAULT_LEARNING_RATE = 1e-4
DEFAULT_SA_PREPROCESS_PROB = 0.10
DEFAULT_TRAIN_SIZE = 3  # smallest grid whose cells all have external couplers


@dataclass
class TraceStep:
    sigma: np.ndarray   # spins before the action (int8 snapshot)
    mask: np.ndarray    # flipped-so-far mask before the action
    action: int
    reward: float


@dataclass
class EpisodeTrace:
    instance: IsingInstance
    steps: list[TraceStep]
    start_energy: float
    best_energy: float
    best_config: SpinConfiguration


@dataclass
class NStepTransition:
    instance: IsingInstance
    sigma: np.ndarray
    mask: np.ndarray
    action: int
    return_n: float               # discounted reward sum over <= n steps
    next_sigma: np.ndarray | None  # None when the episode ends within n steps
    next_mask: np.ndarray | None
    terminal_within_n: bool


class ReplayBuffer:
    """Bounded FIFO of transitions with a seeded uniform sampler."""

    def __init__(self, capacity: int, seed=0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: deque[NStepTransition] = deque(maxlen=capacity)
        self._rng = np.random.default_rng(seed)

    def push(self, tr: NStepTransition) -> None:
        self._items.append(tr)

    def sample(self, batch_size: int) -> list[NStepTransition]:
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        idx = self._rng.integers(0, len(self._items), size=batch_size)
        return [self._items[int(i)] for i in idx]

    def __len__(self) -> int:
        return len(self._items)


def greedy_action(q: np.ndarray, mask: np.ndarray) -> int:
    """Argmax over unmasked entries, ties broken toward the lowest index."""
    mask = np.asarray(mask, dtype=bool)
    if mask.all():
        raise ValueError("all actions are masked (terminal state)")
    return int(np.argmax(np.where(mask, -np.inf, q)))


def episode(inst: IsingInstance, start: SpinConfiguration, params: gnn.QNetworkParams,
            epsilon: float = 0.0, rng: np.random.Generator | None = None) -> EpisodeTrace:
    """Roll one full flip-once episode; ``start`` is not mutated."""
    n = inst.topo.num_nodes
    if len(start) != n:
        raise ValueError(f"start has {len(start)} spins, instance has {n} nodes")
    if epsilon > 0.0 and rng is None:
        raise ValueError("epsilon-greedy rollouts need an rng")
    start_energy = energy(inst, start)
    cur = SpinConfiguration(start.spins.copy(), start_energy)
    mask = np.zeros(n, dtype=bool)
    best_spins = cur.spins.copy()
    best_energy = start_energy
    steps: list[TraceStep] = []
    for _ in range(n):
        emb = gnn.encode(inst, cur, params)
        q = gnn.q_values(emb, params, mask)
        if epsilon > 0.0 and rng.random() < epsilon:
            avail = np.flatnonzero(~mask)
            a = int(avail[rng.integers(0, avail.size)])
        else:
            a = greedy_action(q, mask)
        steps.append(TraceStep(cur.spins.copy(), mask.copy(), a, 0.0))
        delta = flip_delta(inst, cur, a)
        apply_flip(cur, a, delta)
        steps[-1].reward = -delta
        mask[a] = True
        if cur.cached_energy < best_energy:
            best_energy = cur.cached_energy
            best_spins[:] = cur.spins
    return EpisodeTrace(inst, steps,
                        start_energy=float(start_energy),
                        best_energy=float(best_energy),
                        best_config=SpinConfiguration(best_spins, float(best_energy)))


def make_transitions(trace: EpisodeTrace, n: int, gamma: float) -> list[NStepTransition]:
    """One transition per step; returns truncate at the episode end."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    steps = trace.steps
    horizon = len(steps)
    out = []
    for t in range(horizon):
        span = min(n, horizon - t)
        ret = sum(gamma ** k * steps[t + k].reward for k in range(span))
        terminal = t + n >= horizon
        nxt = None if terminal else steps[t + n]
        out.append(NStepTransition(
            trace.instance, steps[t].sigma, steps[t].mask, steps[t].action,
            float(ret), None if terminal else nxt.sigma,
            None if terminal else nxt.mask, terminal))
    return out


def td_target(tr: NStepTransition, target_params: gnn.QNetworkParams,
              gamma: float, n: int) -> float:
    """n-step backup: the stored return, plus a bootstrap from the frozen
    network when the episode did not end within n steps."""
    if tr.terminal_within_n:
        return tr.return_n
    cfg = SpinConfiguration(tr.next_sigma)
    emb = gnn.encode(tr.instance, cfg, target_params)
    q = gnn.q_values(emb, target_params, tr.next_mask)
    return tr.return_n + gamma ** n * float(np.max(q))


@dataclass
class TrainConfig:
    size: int = DEFAULT_TRAIN_SIZE
    episodes: int = 2000
    embed_dim: int = gnn.DEFAULT_EMBED_DIM
    layers: int = gnn.DEFAULT_LAYERS
    n_step: int = DEFAULT_N_STEP
    gamma: float = DEFAULT_GAMMA
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_fraction: float = 0.5   # anneal over this share of episodes, then hold
    buffer_capacity: int = DEFAULT_BUFFER_CAPACITY
    batch_size: int = DEFAULT_BATCH_SIZE
    target_sync: int = DEFAULT_TARGET_SYNC
    learning_rate: float = DEFAULT_LEARNING_RATE
    updates_per_episode: int = 1
    sa_preprocess_prob: float = DEFAULT_SA_PREPROCESS_PROB
    sa_beta_min: float = 0.1
    sa_beta_max: float = 5.0
    sa_beta_steps: int = 100
    sa_sweeps: int = 1
    seed: int = 0


@dataclass
class TrainResult:
    params: gnn.QNetworkParams
    log: list[dict] = field(default_factory=list)


class Adam:
    """Adaptive-moment updates over a parameter set's named arrays."""

    def __init__(self, params: gnn.QNetworkParams, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(a) for name, a in params.named_arrays()}
        self.v = {name: np.zeros_like(a) for name, a in params.named_arrays()}

    def step(self, params: gnn.QNetworkParams, grads: gnn.QNetworkParams) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for (name, arr), (_, g) in zip(params.named_arrays(), grads.named_arrays()):
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            arr -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def epsilon_at(cfg: TrainConfig, ep: int) -> float:
    anneal_until = max(1.0, cfg.epsilon_fraction * cfg.episodes)
    frac = min(1.0, ep / anneal_until)
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac


def _sub_seed(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, *key])


def _batch_update(params, target, batch, cfg, adam, n_nodes) -> float:
    grads = gnn.QNetworkParams.zeros_like(params)
    total = 0.0
    b = len(batch)
    for tr in batch:
        cfg_t = SpinConfiguration(tr.sigma)
        q, fp = gnn.forward_q(tr.instance, cfg_t, params, tr.mask)
        y = td_target(tr, target, cfg.gamma, cfg.n_step)
        diff = float(q[tr.action]) - y
        total += diff * diff
        dq = np.zeros(n_nodes)
        dq[tr.action] = 2.0 * diff / b
        gnn.add_into(grads, gnn.backward(fp, dq))
    adam.step(params, grads)
    return total / b


def train(cfg: TrainConfig, progress=None) -> TrainResult:
    """n-step deep Q-learning on freshly sampled instances.

    Per episode: sample an instance (J, h standard normal) and a uniform
    start; with probability ``sa_preprocess_prob`` replace the start by the
    best state of a full annealing run (low-energy starts); roll an
    epsilon-greedy episode; push its n-step transitions; then take
    ``updates_per_episode`` squared-error gradient steps on sampled
    mini-batches against a periodically synced frozen copy.

    Deterministic: every random stream is derived from ``cfg.seed``, so a
    fixed config reproduces the returned parameters bit for bit.
    """
    topo = build_chimera(cfg.size)
    params = gnn.init_params(cfg.embed_dim, cfg.layers, _sub_seed(cfg.seed, 0))
    target = params.copy()
    buffer = ReplayBuffer(cfg.buffer_capacity, _sub_seed(cfg.seed, 5))
    coin = np.random.default_rng(_sub_seed(cfg.seed, 6))
    adam = Adam(params, cfg.learning_rate)
    sched = geometric_schedule(cfg.sa_beta_min, cfg.sa_beta_max,
                               cfg.sa_beta_steps, cfg.sa_sweeps)
    grad_steps = 0
    log: list[dict] = []
    for ep in range(cfg.episodes):
        inst = random_instance(topo, _sub_seed(cfg.seed, 1, ep))
        start = random_configuration(topo, _sub_seed(cfg.seed, 2, ep))
        if coin.random() < cfg.sa_preprocess_prob:
            start = simulated_annealing(inst, start, sched,
                                        _sub_seed(cfg.seed, 3, ep)).best_config
        eps_val = epsilon_at(cfg, ep)
        trace = episode(inst, start, params, epsilon=eps_val,
                        rng=np.random.default_rng(_sub_seed(cfg.seed, 4, ep)))
        for tr in make_transitions(trace, cfg.n_step, cfg.gamma):
            buffer.push(tr)
        losses = []
        for _ in range(cfg.updates_per_episode):
            if len(buffer) < cfg.batch_size:
                break
            batch = buffer.sample(cfg.batch_size)
            losses.append(_batch_update(params, target, batch, cfg, adam,
                                        topo.num_nodes))
            grad_steps += 1
            if grad_steps % cfg.target_sync == 0:
                target = params.copy()
        log.append({
            "episode": ep,
            "epsilon": eps_val,
            "mean_loss": float(np.mean(losses)) if losses else None,
            "best_energy": trace.best_energy,
        })
        if progress is not None:
            progress(log[-1])
    return TrainResult(params, log)


def write_train_log(log: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "epsilon", "mean_loss", "best_energy"])
        for row in log:
            loss = "" if row["mean_loss"] is None else repr(row["mean_loss"])
            w.writerow([row["episode"], repr(row["epsilon"]), loss,
                        repr(row["best_energy"])])


def greedy_best_energy(inst: IsingInstance, start: SpinConfiguration,
                       params: gnn.QNetworkParams) -> float:
    """Best energy reached by a single greedy episode (the 'model' method)."""
    return episode(inst, start, params).best_energy


def mean_greedy_energy(params: gnn.QNetworkParams, size: int, count: int,
                       eval_seed: int) -> float:
    """Mean greedy-episode best energy over freshly sampled instances;
    instance and start seeds derive only from ``eval_seed``, so two
    parameter sets can be compared on identical inputs."""
    topo = build_chimera(size)
    total = 0.0
    for i in range(count):
        inst = random_instance(topo, _sub_seed(eval_seed, 10, i))
        start = random_configuration(topo, _sub_seed(eval_seed, 11, i))
        total += greedy_best_energy(inst, start, params)
    return total / count
