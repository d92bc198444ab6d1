import itertools

import numpy as np
import pytest
from helpers import hand_instance, random_instance, term_sum

from cubic_portfolio.instance import Portfolio, generate_instance
from cubic_portfolio.native import (
    EnergyParams,
    SwapCache,
    eval_effective_energy,
    eval_native,
    gradient,
    hvp,
    swap_delta,
)


def fd_gradient(inst, x, params, h=1e-5):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (eval_effective_energy(inst, x + e, params) - eval_effective_energy(inst, x - e, params)) / (2 * h)
    return g


def test_zero_selection_scores_zero(rng):
    inst = random_instance(rng, 8, 3)
    assert eval_native(inst, np.zeros(8)) == 0.0


def test_three_asset_substitution():
    inst = hand_instance(np.eye(3), [1, 1, 1], [(0, 1, 2)], [2.0])
    assert eval_native(inst, np.ones(3)) == 2.0


def test_matches_term_by_term_oracle(rng):
    inst = random_instance(rng, 8, 3, m=12)
    for _ in range(20):
        x = rng.integers(0, 2, size=8)
        assert eval_native(inst, x) == pytest.approx(term_sum(inst, x), rel=1e-12, abs=1e-14)


def test_batch_evaluation_matches_rows(rng):
    inst = random_instance(rng, 9, 3, m=10)
    X = rng.random((6, 9))
    batch = eval_native(inst, X)
    assert batch.shape == (6,)
    for row, val in zip(X, batch):
        assert val == pytest.approx(eval_native(inst, row), rel=1e-13)


def test_symmetrised_covariance_gives_same_value(rng):
    inst = random_instance(rng, 7, 2, m=5)
    skew = rng.normal(size=(7, 7))
    skew = skew - skew.T
    lopsided = hand_instance(inst.covariance + skew, inst.expected_return, inst.triples, inst.cubic_coeff, K=2)
    for _ in range(10):
        x = rng.random(7)
        assert eval_native(lopsided, x) == pytest.approx(eval_native(inst, x), rel=1e-12, abs=1e-12)


def test_length_mismatch_is_rejected(rng):
    inst = random_instance(rng, 6, 2)
    with pytest.raises(ValueError):
        eval_native(inst, np.zeros(5))
    with pytest.raises(ValueError):
        gradient(inst, np.zeros(7), EnergyParams())
    with pytest.raises(ValueError):
        hvp(inst, np.zeros(6), np.zeros(5), EnergyParams())


def test_effective_energy_cases(rng):
    inst = random_instance(rng, 6, 2)
    x = rng.random(6)
    assert eval_effective_energy(inst, x, EnergyParams(beta=0.0)) == eval_native(inst, x)
    xb = rng.integers(0, 2, size=6).astype(float)
    for beta in (0.0, 0.3, 1.0):
        assert eval_effective_energy(inst, xb, EnergyParams(beta=beta)) == eval_native(inst, xb)
    zero = hand_instance(np.zeros((4, 4)), np.zeros(4))
    assert eval_effective_energy(zero, np.full(4, 0.5), EnergyParams(beta=1.0)) == pytest.approx(0.25)


def test_energy_params_validation():
    with pytest.raises(ValueError):
        EnergyParams(beta=1.5)
    with pytest.raises(ValueError):
        EnergyParams(beta=0.5, expansion=0.1)


def test_gradient_closed_forms():
    zero = hand_instance(np.zeros((5, 5)), np.zeros(5))
    assert np.array_equal(gradient(zero, np.full(5, 0.3), EnergyParams()), np.zeros(5))
    single = hand_instance(np.zeros((3, 3)), np.zeros(3), [(0, 1, 2)], [1.0])
    assert np.allclose(gradient(single, np.full(3, 0.5), EnergyParams()), [0.25, 0.25, 0.25])


def test_gradient_matches_central_differences(rng):
    for _ in range(20):
        inst = random_instance(rng, 6, 2, m=8)
        params = EnergyParams(beta=float(rng.random()))
        x = rng.uniform(0.05, 0.95, size=6)
        g = gradient(inst, x, params)
        fd = fd_gradient(inst, x, params)
        big = np.abs(fd) >= 1e-8
        assert np.all(np.abs(g - fd)[big] <= 1e-5 * np.abs(fd)[big])
        assert np.all(np.abs(g - fd)[~big] <= 1e-8)


def test_gradient_batch_matches_rows(rng):
    inst = random_instance(rng, 8, 2, m=9)
    params = EnergyParams(beta=0.4)
    X = rng.random((5, 8))
    G = gradient(inst, X, params)
    for row, g in zip(X, G):
        assert np.allclose(gradient(inst, row, params), g, rtol=1e-13, atol=1e-15)


def test_hvp_closed_forms(rng):
    inst = random_instance(rng, 6, 2)
    x = rng.random(6)
    assert np.array_equal(hvp(inst, x, np.zeros(6), EnergyParams(beta=0.7)), np.zeros(6))
    quad = hand_instance(inst.covariance, inst.expected_return)
    v = rng.normal(size=6)
    expected = 2 * quad.covariance @ v
    for _ in range(3):
        assert np.allclose(hvp(quad, rng.random(6), v, EnergyParams()), expected, rtol=1e-13)


def test_hvp_matches_differenced_gradients(rng):
    h = 1e-5
    for _ in range(20):
        inst = random_instance(rng, 6, 2, m=8)
        params = EnergyParams(beta=float(rng.random()))
        x = rng.uniform(0.05, 0.95, size=6)
        v = rng.normal(size=6)
        hv = hvp(inst, x, v, params)
        fd = (gradient(inst, x + h * v, params) - gradient(inst, x - h * v, params)) / (2 * h)
        scale = np.maximum(np.abs(fd), 1e-8)
        assert np.all(np.abs(hv - fd) <= 1e-4 * scale + 1e-9)


def test_swap_delta_is_zero_for_interchangeable_assets():
    cov = np.diag([1.0, 0.0, 0.0, 2.0])
    cov[0, 3] = cov[3, 0] = 0.5
    inst = hand_instance(cov, [0.1, 0.3, 0.3, 0.2], K=2)
    p = Portfolio.from_indices(4, [0, 1])
    assert swap_delta(inst, p, 1, 2) == 0.0


def test_every_swap_delta_matches_full_recompute(rng):
    inst = random_instance(rng, 10, 3, m=20)
    p = Portfolio.from_indices(10, [1, 4, 7])
    base = eval_native(inst, p.selection)
    cache = SwapCache(inst, p)
    out_idx, in_idx, D = cache.delta_matrix()
    assert D.shape == (3, 7)
    for a, o in enumerate(out_idx):
        for b, i in enumerate(in_idx):
            sel = p.selection.copy()
            sel[o], sel[i] = 0, 1
            exact = eval_native(inst, sel) - base
            assert abs(swap_delta(inst, p, o, i, cache) - exact) <= 1e-10
            assert abs(D[a, b] - exact) <= 1e-10


def test_applying_best_swap_reproduces_predicted_value(rng):
    inst = generate_instance(50, 10, 3)
    sel = np.zeros(50, dtype=np.int8)
    sel[rng.choice(50, 10, replace=False)] = 1
    cache = SwapCache(inst, Portfolio(sel))
    for _ in range(25):
        out_idx, in_idx, D = cache.delta_matrix()
        r, c = np.unravel_index(np.argmin(D), D.shape)
        predicted = cache.value + D[r, c]
        cache.apply(out_idx[r], in_idx[c], D[r, c])
        assert eval_native(inst, cache.sel) == pytest.approx(predicted, abs=1e-10)
        assert cache.value == pytest.approx(predicted, abs=1e-12)


def test_swap_delta_rejects_wrong_states(rng):
    inst = random_instance(rng, 6, 2)
    p = Portfolio.from_indices(6, [0, 1])
    with pytest.raises(ValueError):
        swap_delta(inst, p, 2, 3)
    with pytest.raises(ValueError):
        swap_delta(inst, p, 0, 1)


def test_swap_deltas_exact_on_many_small_instances(rng):
    for trial in range(50):
        n, K = int(rng.integers(5, 9)), int(rng.integers(1, 4))
        inst = random_instance(rng, n, K, m=int(rng.integers(0, 12)))
        p = Portfolio.from_indices(n, sorted(rng.choice(n, K, replace=False)))
        base = eval_native(inst, p.selection)
        cache = SwapCache(inst, p)
        for o, i in itertools.product(p.indices, np.flatnonzero(p.selection == 0)):
            sel = p.selection.copy()
            sel[o], sel[i] = 0, 1
            assert abs(cache.delta(o, i) - (eval_native(inst, sel) - base)) <= 1e-10
