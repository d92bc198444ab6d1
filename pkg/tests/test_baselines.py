import numpy as np
import pytest
from helpers import all_states, random_instance

from cubic_portfolio import _kernels
from cubic_portfolio.baselines import (
    AnnealConfig,
    TabuConfig,
    calibrate_temperatures,
    decoded_native,
    flip_deltas,
    initial_state,
    local_field,
    sa_solve,
    tabu_solve,
)
from cubic_portfolio.instance import generate_instance
from cubic_portfolio.native import eval_native
from cubic_portfolio.quadratize import AugmentedQubo, build_augmented, decode


def exhaustive_min(q):
    return min(q.matrix_energy(s) for s in all_states(q.n_aug))


def toy_augmented(seed):
    """n = 9 assets with 3 triples: n_aug = 12."""
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 9, 3, m=3)
    return build_augmented(inst)


def test_single_variable_qubo():
    q = AugmentedQubo.from_dense([[-1.0]])
    sa = sa_solve(q, AnnealConfig(budget_sweeps=20, seed=0, init="zeros"))
    assert sa.best_state.tolist() == [1] and sa.best_energy == -1.0
    tb = tabu_solve(q, TabuConfig(budget_iters=5, seed=0, init="zeros"))
    assert tb.best_state.tolist() == [1] and tb.best_energy == -1.0


def test_annealing_finds_exhaustive_minimum_on_toy_qubo():
    q = toy_augmented(0)
    assert q.n_aug == 12
    target = exhaustive_min(q)
    hits = 0
    for seed in range(100):
        res = sa_solve(q, AnnealConfig(budget_sweeps=5000, seed=seed))
        hits += abs(res.best_energy - target) <= 1e-9 * max(1.0, abs(target))
    assert hits >= 95


def test_tabu_finds_exhaustive_minimum_on_random_qubos():
    # plain steepest tabu is deterministic and can lock into a cycle, so
    # this is a rate over instances rather than a per-instance guarantee
    hits = 0
    for seed in range(20):
        A = np.random.default_rng(seed).normal(size=(14, 14))
        q = AugmentedQubo.from_dense((A + A.T) / 2)
        res = tabu_solve(q, TabuConfig(budget_iters=3000, seed=seed))
        hits += abs(res.best_energy - exhaustive_min(q)) <= 1e-9
    assert hits >= 18


def test_tabu_reaches_all_ones_minimum():
    n = 14
    Q = -np.ones((n, n)) / n
    q = AugmentedQubo.from_dense(Q)
    res = tabu_solve(q, TabuConfig(budget_iters=50, seed=0, init="zeros"))
    assert res.best_state.tolist() == [1] * n
    assert res.best_energy == pytest.approx(exhaustive_min(q))


def _kernel_args(q, s):
    h, indptr, indices, data = q.neighbors
    return h, indptr, indices, data, local_field(q, s)


def test_incremental_energy_has_no_drift():
    q = build_augmented(generate_instance(50, 10, 1))
    rng = np.random.default_rng(0)
    s = initial_state(q, "feasible", 0)
    h, indptr, indices, data, fld = _kernel_args(q, s)
    energy = q.matrix_energy(s)
    best = s.copy()
    total = 100_000
    idx = rng.integers(0, q.n_aug, size=total)
    u = rng.random(total)
    temp = 50.0 * q.lambda_R
    energy, _, acc = _kernels.anneal_sweeps(s, fld, h, indptr, indices, data, idx, u, temp, energy,
                                            best, energy)
    assert acc > 10_000
    assert abs(energy - q.matrix_energy(s)) <= 1e-8 * max(1.0, abs(energy))
    assert np.allclose(fld, local_field(q, s), atol=1e-9)


def test_tabu_respects_tenure_without_aspiration():
    rng = np.random.default_rng(3)
    n = 10
    A = rng.normal(size=(n, n))
    q = AugmentedQubo.from_dense((A + A.T) / 2)
    s = np.zeros(n, dtype=np.int8)
    h, indptr, indices, data, fld = _kernel_args(q, s)
    tenure = n - 1
    flips = np.empty(200, dtype=np.int64)
    _kernels.tabu_iterations(s, fld, h, indptr, indices, data, np.zeros(n, np.int64), 0, 200, tenure,
                             False, 0.0, s.copy(), 0.0, flips)
    for t in range(200):
        window = flips[max(0, t - tenure):t]
        assert flips[t] not in window
    # with tenure >= 1 the search never undoes its last flip straight away
    assert all(flips[t] != flips[t - 1] for t in range(1, 200))


def test_aspiration_admits_a_tabu_move_that_beats_the_best():
    q = AugmentedQubo.from_dense(np.diag([-1.0, 1.0]))
    for aspiration, expected in [(True, 0), (False, 1)]:
        s = np.zeros(2, dtype=np.int8)
        h, indptr, indices, data, fld = _kernel_args(q, s)
        tabu_until = np.array([5, 0], dtype=np.int64)
        flips = np.empty(1, dtype=np.int64)
        _kernels.tabu_iterations(s, fld, h, indptr, indices, data, tabu_until, 0, 1, 3, aspiration,
                                 0.0, s.copy(), 0.0, flips)
        assert flips[0] == expected


def test_best_seen_energy_is_monotone_and_deterministic():
    q = build_augmented(generate_instance(30, 6, 2))
    for solve, cfg in [(sa_solve, AnnealConfig(budget_sweeps=200, seed=5)),
                       (tabu_solve, TabuConfig(budget_iters=500, seed=5))]:
        a, b = solve(q, cfg), solve(q, cfg)
        energies = [e for _, e in a.trace.samples]
        assert all(y <= x for x, y in zip(energies, energies[1:]))
        assert a.best_energy == pytest.approx(energies[-1], abs=1e-6)
        assert np.array_equal(a.best_state, b.best_state)
        assert a.trace.samples == b.trace.samples and a.trace.ttt == b.trace.ttt
        assert len(a.trace.ttt) == 5


@pytest.mark.parametrize("solve, cfg", [
    (sa_solve, AnnealConfig(budget_secs=0.5, seed=1)),
    (tabu_solve, TabuConfig(budget_secs=0.5, seed=1)),
])
def test_wall_clock_budget_within_one_sweep(solve, cfg):
    q = build_augmented(generate_instance(200, 40, 42))
    res = solve(q, cfg)
    assert 0.5 <= res.trace.wall_time <= 0.6


def test_temperature_calibration_hits_targets(rng):
    deltas = np.concatenate([rng.exponential(30.0, size=80), -rng.exponential(5.0, size=20)])
    t0, tf = calibrate_temperatures(deltas, 0.8, 0.01)
    up = deltas[deltas > 0]
    assert np.mean(np.exp(-up / t0)) == pytest.approx(0.8, abs=1e-9)
    assert np.mean(np.exp(-up / tf)) == pytest.approx(0.01, abs=1e-9)
    a, b = calibrate_temperatures(-np.ones(5))
    assert 0 < b < a


def test_config_validation():
    with pytest.raises(ValueError):
        AnnealConfig()
    with pytest.raises(ValueError):
        AnnealConfig(budget_sweeps=0)
    with pytest.raises(ValueError):
        AnnealConfig(budget_secs=-1.0)
    with pytest.raises(ValueError):
        AnnealConfig(budget_sweeps=5, initial_temperature=1.0, final_temperature=2.0)
    with pytest.raises(ValueError):
        AnnealConfig(budget_sweeps=5, initial_temperature=-1.0)
    with pytest.raises(ValueError):
        TabuConfig(budget_iters=0)
    with pytest.raises(ValueError):
        TabuConfig(budget_iters=5, tenure=0)
    assert TabuConfig(budget_iters=5).resolved_tenure(1000) == 20
    assert TabuConfig(budget_iters=5).resolved_tenure(100) == 10


def test_feasible_start_is_shared_consistent_and_exact_k():
    q = build_augmented(generate_instance(50, 10, 3))
    a = initial_state(q, "feasible", 9)
    assert np.array_equal(a, initial_state(q, "feasible", 9))
    x, w = decode(q, a)
    assert x.cardinality == 10
    pairs = q.aux_pairs
    assert np.array_equal(w, x.selection[pairs[:, 0]] * x.selection[pairs[:, 1]])
    assert not initial_state(q, "zeros", 9).any()


def test_answers_are_scored_on_the_native_objective():
    inst = generate_instance(30, 6, 4)
    q = build_augmented(inst)
    res = sa_solve(q, AnnealConfig(budget_sweeps=50, seed=2))
    x, _ = decode(q, res.best_state)
    assert decoded_native(q, res.best_state) == eval_native(inst, x.selection)


def test_flip_deltas_match_energy_differences(rng):
    q = build_augmented(generate_instance(30, 6, 4))
    s = rng.integers(0, 2, size=q.n_aug).astype(np.int8)
    base = q.matrix_energy(s)
    d = flip_deltas(q, s)
    for i in rng.choice(q.n_aug, 20, replace=False):
        t = s.copy()
        t[i] ^= 1
        assert d[i] == pytest.approx(q.matrix_energy(t) - base, abs=1e-7)
