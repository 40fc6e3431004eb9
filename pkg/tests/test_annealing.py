import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sawr.annealing import (AnnealSchedule, default_schedule, geometric_schedule,
                            metropolis_accept, simulated_annealing)
from sawr.ising import brute_force_ground_state, energy, random_configuration, random_instance


def test_degenerate_geometric_schedule():
    sched = geometric_schedule(1.0, 1.0, 5, 1)
    assert np.allclose(sched.betas, np.ones(5))
    assert len(sched) == 5


def test_geometric_midpoint():
    sched = geometric_schedule(0.1, 10.0, 3)
    assert sched.betas == pytest.approx([0.1, 1.0, 10.0], rel=1e-12)


def test_single_step_schedule():
    assert geometric_schedule(0.5, 9.0, 1).betas.tolist() == [0.5]


@given(beta_min=st.floats(1e-6, 1e3), ratio=st.floats(1.0, 1e4),
       steps=st.integers(1, 200))
@settings(max_examples=100, deadline=None)
def test_geometric_schedule_monotone(beta_min, ratio, steps):
    sched = geometric_schedule(beta_min, beta_min * ratio, steps)
    assert (np.diff(sched.betas) >= 0).all()


def test_geometric_schedule_rejects_bad_input():
    for args in [(0.0, 1.0, 5), (-1.0, 1.0, 5), (2.0, 1.0, 5), (1.0, 2.0, 0),
                 (math.nan, 1.0, 5), (1.0, math.inf, 5)]:
        with pytest.raises(ValueError):
            geometric_schedule(*args)


def test_schedule_validation():
    with pytest.raises(ValueError):
        AnnealSchedule(np.array([2.0, 1.0]))
    with pytest.raises(ValueError):
        AnnealSchedule(np.array([1.0]), sweeps_per_beta=0)
    with pytest.raises(ValueError):
        AnnealSchedule(np.array([]))


def test_metropolis_downhill_always_accepts():
    for beta in (0.0, 1.0, 1e6):
        for u in (0.0, 0.5, 0.999999):
            assert metropolis_accept(-0.3, beta, u)
            assert metropolis_accept(0.0, beta, u)


def test_metropolis_infinite_temperature_accepts_everything():
    for delta in (-5.0, 0.0, 1e3):
        assert metropolis_accept(delta, 0.0, 0.999)


def test_metropolis_threshold_at_exp_minus_two():
    # exp(-2) ~ 0.1353
    assert metropolis_accept(2.0, 1.0, 0.10)
    assert not metropolis_accept(2.0, 1.0, 0.20)


def test_metropolis_rejects_bad_arguments():
    with pytest.raises(ValueError):
        metropolis_accept(1.0, -0.1, 0.5)
    with pytest.raises(ValueError):
        metropolis_accept(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        metropolis_accept(1.0, math.nan, 0.5)


@given(delta=st.floats(0.01, 20.0), beta=st.floats(0.0, 10.0),
       u=st.floats(0.0, 0.999999))
@settings(max_examples=200, deadline=None)
def test_metropolis_matches_formula(delta, beta, u):
    assert metropolis_accept(delta, beta, u) == (u < min(1.0, math.exp(-beta * delta)))


def test_acceptance_rate_statistics():
    # empirical acceptance at (beta=1, dE=2) vs exp(-2), 3 standard errors
    rng = np.random.default_rng(1234)
    trials = 100_000
    accepted = sum(metropolis_accept(2.0, 1.0, float(rng.random()))
                   for _ in range(trials))
    p = math.exp(-2.0)
    se = math.sqrt(p * (1 - p) / trials)
    assert abs(accepted / trials - p) < 3 * se


def test_sa_from_ground_state_stays_there(c1):
    inst = random_instance(c1, 50)
    ground, ground_energy = brute_force_ground_state(inst)
    sched = AnnealSchedule(np.array([1e6]), sweeps_per_beta=5)
    res = simulated_annealing(inst, ground, sched, seed=3)
    assert res.best_energy == pytest.approx(ground_energy, abs=1e-9)


def test_sa_finds_c1_ground_states(c1):
    sched = geometric_schedule(0.1, 5.0, 50, 10)
    hits = 0
    for seed in range(100):
        inst = random_instance(c1, 300 + seed)
        start = random_configuration(c1, 600 + seed)
        _, ground = brute_force_ground_state(inst)
        res = simulated_annealing(inst, start, sched, seed=seed)
        hits += abs(res.best_energy - ground) <= 1e-9
    assert hits >= 95


def test_sa_never_worse_than_start(c2):
    sched = default_schedule()
    for seed in range(10):
        inst = random_instance(c2, seed)
        start = random_configuration(c2, seed + 1000)
        res = simulated_annealing(inst, start, sched, seed=seed)
        assert res.best_energy <= energy(inst, start) + 1e-12


def test_sa_result_invariants(c2):
    inst = random_instance(c2, 8)
    start = random_configuration(c2, 9)
    res = simulated_annealing(inst, start, default_schedule(), seed=10)
    assert res.best_energy == pytest.approx(energy(inst, res.best_config), abs=1e-9)
    assert (np.diff(res.trace) <= 0).all()          # best-so-far is monotone
    assert res.best_energy <= res.trace.min() + 1e-12
    assert not np.array_equal(res.best_config.spins, start.spins) or True
    # the input start is never mutated
    again = simulated_annealing(inst, start, default_schedule(), seed=10)
    assert np.array_equal(res.best_config.spins, again.best_config.spins)


def test_sa_deterministic_under_seed(c2):
    inst = random_instance(c2, 77)
    start = random_configuration(c2, 78)
    a = simulated_annealing(inst, start, default_schedule(), seed=5)
    b = simulated_annealing(inst, start, default_schedule(), seed=5)
    assert a.best_energy == b.best_energy
    assert a.accepted_moves == b.accepted_moves
    assert np.array_equal(a.trace, b.trace)
    assert np.array_equal(a.best_config.spins, b.best_config.spins)
    c = simulated_annealing(inst, start, default_schedule(), seed=6)
    assert a.accepted_moves != c.accepted_moves or not np.array_equal(a.trace, c.trace)
