"""Incremental Kohonen self-organizing map on a square lattice.

Training runs a global-ordering phase (first ``global_ordering_steps``
epochs: learning rate ``a0 * (1 - t/steps)`` floored at the fine rate,
neighbourhood width shrinking linearly from 5 to 1) and then a fine-tuning
phase with both held at their fine values.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import _accel
from .errors import ConfigError
from .kernels.som import bmu_batch_numba, bmu_batch_numpy, train_numba, train_numpy


@dataclass(frozen=True)
class SomParams:
    grid_rows: int = 10
    grid_cols: int = 10
    epoch_limit: int = 100_000
    alpha_initial_global: float = 0.9
    alpha_fine: float = 0.02
    global_ordering_steps: int = 1_000
    neighborhood_initial: float = 5.0
    neighborhood_fine: float = 1.0
    anomaly_threshold: float = 65.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise ConfigError("grid dimensions must be >= 1")
        if self.epoch_limit < 1 or self.global_ordering_steps < 1:
            raise ConfigError("epoch_limit and global_ordering_steps must be >= 1")
        if not 0 < self.alpha_fine < self.alpha_initial_global <= 1:
            raise ConfigError("need 0 < alpha_fine < alpha_initial_global <= 1")
        if self.neighborhood_fine <= 0 or self.neighborhood_initial < self.neighborhood_fine:
            raise ConfigError("need 0 < neighborhood_fine <= neighborhood_initial")
        if self.epoch_limit < 500 * self.grid_rows * self.grid_cols:
            warnings.warn(
                f"epoch_limit {self.epoch_limit} is below 500 x map units "
                f"({500 * self.grid_rows * self.grid_cols})",
                stacklevel=3,
            )

    @property
    def n_nodes(self) -> int:
        return self.grid_rows * self.grid_cols


def learning_rate(t, params: SomParams):
    t = np.asarray(t, dtype=np.float64)
    decayed = params.alpha_initial_global * (1.0 - t / params.global_ordering_steps)
    out = np.where(t < params.global_ordering_steps,
                   np.maximum(decayed, params.alpha_fine), params.alpha_fine)
    return out if out.ndim else float(out)


def neighborhood_width(t, params: SomParams):
    t = np.asarray(t, dtype=np.float64)
    frac = t / params.global_ordering_steps
    shrinking = params.neighborhood_initial + (params.neighborhood_fine - params.neighborhood_initial) * frac
    out = np.where(t < params.global_ordering_steps, shrinking, params.neighborhood_fine)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SomMap:
    weights: np.ndarray  # (rows*cols, dim), row-major node order
    rows: int
    cols: int
    epoch: int = 0
    trained: bool = False

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def locations(self) -> np.ndarray:
        r, c = np.divmod(np.arange(self.rows * self.cols), self.cols)
        return np.stack([r, c], axis=1)

    def grid_sq_distances(self) -> np.ndarray:
        loc = self.locations.astype(np.float64)
        diff = loc[:, None, :] - loc[None, :, :]
        return (diff ** 2).sum(axis=2)


def init_map(params: SomParams, dim: int = 7, low: float = 0.0, high: float = 100.0) -> SomMap:
    """Random map with every weight uniform in ``[low, high]`` (the signal range)."""
    if dim < 1:
        raise ConfigError("dim must be >= 1")
    rng = np.random.default_rng(params.rng_seed)
    w = rng.uniform(low, high, (params.n_nodes, dim))
    return SomMap(w, params.grid_rows, params.grid_cols)


def _check_dim(som: SomMap, x: np.ndarray) -> None:
    if x.shape[-1] != som.dim:
        raise ConfigError(f"input has dimension {x.shape[-1]}, map has {som.dim}")


def find_bmu(som: SomMap, x) -> tuple[int, float]:
    """Nearest node (Euclidean); ties resolve to the lowest row-major index."""
    x = np.asarray(x, dtype=np.float64)
    _check_dim(som, x)
    idx, dist = bmu_batch(som, x[None, :])
    return int(idx[0]), float(dist[0])


def bmu_batch(som: SomMap, data, backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ConfigError("data must be 2-D")
    _check_dim(som, data)
    if _accel.resolve(backend) == "numba":
        return bmu_batch_numba(np.ascontiguousarray(som.weights), data)
    return bmu_batch_numpy(som.weights, data)


def neighborhood_kernel(t: int, winner_loc, node_loc, params: SomParams) -> float:
    """Gaussian neighbourhood weight scaled by the learning rate at epoch ``t``."""
    d2 = float(np.sum((np.asarray(winner_loc, float) - np.asarray(node_loc, float)) ** 2))
    sigma = neighborhood_width(t, params)
    return learning_rate(t, params) * math.exp(-d2 / (2.0 * sigma * sigma))


def adapt(som: SomMap, x, winner: int, params: SomParams | None = None, h=None) -> SomMap:
    """Pull every node towards ``x`` by its kernel weight; advances the epoch.

    ``h`` overrides the kernel with a scalar or per-node array.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_dim(som, x)
    if h is None:
        if params is None:
            raise ConfigError("adapt needs params or an explicit h")
        d2 = som.grid_sq_distances()[winner]
        sigma = neighborhood_width(som.epoch, params)
        h = learning_rate(som.epoch, params) * np.exp(-d2 / (2.0 * sigma * sigma))
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), (som.weights.shape[0],))
    w = som.weights + h[:, None] * (x - som.weights)
    return replace(som, weights=w, epoch=som.epoch + 1)


def train(som: SomMap, data, params: SomParams, epochs: int | None = None,
          backend: str | None = None) -> SomMap:
    """Run ``epochs`` (default ``params.epoch_limit``) single-stimulus updates.

    Stimuli are drawn uniformly with replacement from ``data`` by a generator
    seeded from ``params.rng_seed``; the returned map is a new object.
    """
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.ndim != 2 or len(data) == 0:
        raise ConfigError("training set must be a non-empty 2-D array")
    _check_dim(som, data)
    epochs = params.epoch_limit if epochs is None else epochs
    rng = np.random.default_rng([params.rng_seed, 1])
    picks = rng.integers(0, len(data), epochs)
    t = np.arange(som.epoch, som.epoch + epochs)
    alpha = np.ascontiguousarray(learning_rate(t, params), dtype=np.float64)
    sigma = np.ascontiguousarray(neighborhood_width(t, params), dtype=np.float64)
    w = np.array(som.weights, dtype=np.float64, copy=True)
    grid_d2 = som.grid_sq_distances()
    kernel = train_numba if _accel.resolve(backend) == "numba" else train_numpy
    w = kernel(w, grid_d2, data, picks, alpha, sigma)
    return replace(som, weights=w, epoch=som.epoch + epochs, trained=True)


def quantization_error(som: SomMap, data, backend: str | None = None) -> float:
    data = np.asarray(data, dtype=np.float64)
    if len(data) == 0:
        raise ConfigError("quantization error of an empty data set is undefined")
    _, dist = bmu_batch(som, data.reshape(len(data), -1), backend)
    return float(dist.mean())


def classify_frame(som: SomMap, x, threshold: float = 65.0) -> int:
    """1 when the BMU distance strictly exceeds ``threshold``."""
    return int(find_bmu(som, x)[1] > threshold)


def classify_batch(som: SomMap, data, threshold: float = 65.0, backend: str | None = None) -> np.ndarray:
    _, dist = bmu_batch(som, data, backend)
    return (dist > threshold).astype(np.int8)


def u_matrix(som: SomMap) -> np.ndarray:
    """Mean weight distance from each node to its 4-connected lattice neighbours."""
    w = som.weights.reshape(som.rows, som.cols, som.dim)
    total = np.zeros((som.rows, som.cols))
    count = np.zeros((som.rows, som.cols))
    for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        r0, r1 = max(0, -dr), som.rows - max(0, dr)
        c0, c1 = max(0, -dc), som.cols - max(0, dc)
        d = np.linalg.norm(w[r0:r1, c0:c1] - w[r0 + dr:r1 + dr, c0 + dc:c1 + dc], axis=2)
        total[r0:r1, c0:c1] += d
        count[r0:r1, c0:c1] += 1
    with np.errstate(invalid="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), 0.0)
