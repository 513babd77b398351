import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from immunesom import som
from immunesom.errors import ConfigError

SMALL = som.SomParams(grid_rows=4, grid_cols=5, epoch_limit=10_000, global_ordering_steps=200)


def exhaustive_bmu(weights, x):
    best, best_d = 0, math.inf
    for i, w in enumerate(weights):
        d = math.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(w, x)))
        if d < best_d:
            best, best_d = i, d
    return best, best_d


def test_schedules():
    p = som.SomParams()
    assert som.learning_rate(0, p) == pytest.approx(0.9)
    assert som.learning_rate(500, p) == pytest.approx(0.45)
    assert som.learning_rate(990, p) == pytest.approx(0.02)  # floor at alpha_fine
    assert som.learning_rate(5000, p) == 0.02
    assert som.neighborhood_width(0, p) == 5.0
    assert som.neighborhood_width(500, p) == pytest.approx(3.0)
    assert som.neighborhood_width(1000, p) == 1.0
    assert som.neighborhood_width(10**6, p) == 1.0


def test_init_map_is_seeded_and_in_range():
    a = som.init_map(som.SomParams())
    b = som.init_map(som.SomParams())
    assert a.weights.shape == (100, 7)
    assert np.array_equal(a.weights, b.weights)
    assert a.weights.min() >= 0 and a.weights.max() <= 100


def test_bmu_ties_go_to_lowest_index():
    weights = np.array([[5.0, 0.0], [0.0, 0.0], [0.0, 0.0], [10.0, 10.0]])
    m = som.SomMap(weights, 2, 2)
    assert som.find_bmu(m, [0.0, 0.0]) == (1, 0.0)
    # equidistant from nodes 0 and 2
    assert som.find_bmu(m, [2.5, 0.0])[0] == 0


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_bmu_batch_matches_exhaustive(backend, rng):
    m = som.SomMap(rng.integers(0, 4, (12, 3)).astype(float), 3, 4)
    queries = rng.integers(0, 4, (300, 3)).astype(float)
    idx, dist = som.bmu_batch(m, queries, backend=backend)
    for q, i, d in zip(queries, idx, dist):
        assert (i, d) == pytest.approx(exhaustive_bmu(m.weights, q))
        assert i == exhaustive_bmu(m.weights, q)[0]


def test_dimension_mismatch():
    m = som.init_map(SMALL, dim=7)
    with pytest.raises(ConfigError):
        som.find_bmu(m, np.zeros(6))


def test_adapt_with_unit_kernel_moves_onto_input():
    m = som.init_map(SMALL, dim=3)
    x = np.array([1.0, 2.0, 3.0])
    moved = som.adapt(m, x, 0, h=1.0)
    assert np.allclose(moved.weights, x)
    assert moved.epoch == 1 and m.epoch == 0


def test_adapt_winner_moves_by_learning_rate():
    m = som.init_map(SMALL, dim=2)
    x = np.array([50.0, 50.0])
    moved = som.adapt(m, x, 3, SMALL)
    expected = m.weights[3] + 0.9 * (x - m.weights[3])
    assert np.allclose(moved.weights[3], expected)


def test_neighborhood_kernel():
    p = som.SomParams()
    assert som.neighborhood_kernel(0, (0, 0), (0, 0), p) == pytest.approx(0.9)
    assert som.neighborhood_kernel(0, (0, 0), (3, 4), p) == pytest.approx(0.9 * math.exp(-25 / 50))


def test_train_matches_stepwise_adapt(rng):
    data = rng.uniform(0, 100, (50, 3))
    start = som.init_map(SMALL, dim=3)
    trained = som.train(start, data, SMALL, epochs=300)
    picks = np.random.default_rng([SMALL.rng_seed, 1]).integers(0, len(data), 300)
    m = start
    for i in picks:
        winner, _ = som.find_bmu(m, data[i])
        m = som.adapt(m, data[i], winner, SMALL)
    assert np.allclose(trained.weights, m.weights, atol=1e-9)
    assert trained.trained and trained.epoch == 300


def test_backends_agree(rng):
    data = rng.uniform(0, 100, (200, 7))
    m = som.init_map(SMALL)
    a = som.train(m, data, SMALL, epochs=2000, backend="numba")
    b = som.train(m, data, SMALL, epochs=2000, backend="numpy")
    assert np.allclose(a.weights, b.weights, atol=1e-9)


def test_training_is_deterministic(rng):
    data = rng.uniform(0, 100, (100, 7))
    m = som.init_map(SMALL)
    assert np.array_equal(som.train(m, data, SMALL).weights, som.train(m, data, SMALL).weights)


def test_training_reduces_quantization_error(rng):
    data = np.vstack([rng.normal(20, 3, (200, 7)), rng.normal(80, 3, (200, 7))]).clip(0, 100)
    m = som.init_map(SMALL)
    before = som.quantization_error(m, data)
    after = som.quantization_error(som.train(m, data, SMALL), data)
    assert after < 0.25 * before


def test_quantization_error_examples():
    weights = np.array([[0.0, 0.0], [10.0, 0.0]])
    m = som.SomMap(weights, 1, 2)
    assert som.quantization_error(m, weights) == 0
    assert som.quantization_error(m, [[3.0, 4.0]]) == pytest.approx(5.0)
    with pytest.raises(ConfigError):
        som.quantization_error(m, np.empty((0, 2)))


def test_classification_threshold_is_strict():
    m = som.SomMap(np.zeros((1, 2)), 1, 1)
    assert som.classify_frame(m, [65.0, 0.0]) == 0
    assert som.classify_frame(m, [65.0001, 0.0]) == 1
    assert som.classify_batch(m, np.array([[65.0, 0.0], [0.0, 70.0]])).tolist() == [0, 1]


def test_u_matrix_of_flat_map_is_zero():
    m = som.SomMap(np.ones((6, 3)), 2, 3)
    assert np.array_equal(som.u_matrix(m), np.zeros((2, 3)))


def test_low_epoch_warning():
    with pytest.warns(UserWarning):
        som.SomParams(epoch_limit=10)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**31))
def test_find_bmu_matches_exhaustive(rows, cols, dim, seed):
    r = np.random.default_rng(seed)
    # small integer grid makes ties common
    m = som.SomMap(r.integers(0, 3, (rows * cols, dim)).astype(float), rows, cols)
    x = r.integers(0, 3, dim).astype(float)
    assert som.find_bmu(m, x)[0] == exhaustive_bmu(m.weights, x)[0]


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.integers(0, 99), st.integers(0, 2**31))
def test_adapt_never_increases_distance_to_input(h, winner, seed):
    r = np.random.default_rng(seed)
    m = som.SomMap(r.uniform(0, 100, (100, 4)), 10, 10)
    x = r.uniform(0, 100, 4)
    moved = som.adapt(m, x, winner, h=h)
    before = np.linalg.norm(m.weights - x, axis=1)
    after = np.linalg.norm(moved.weights - x, axis=1)
    assert np.all(after <= before + 1e-9)
