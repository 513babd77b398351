"""Replay kernel for the dendritic cell population.

Antigen are carried as event indices (into the caller's event arrays) so the
caller can recover type, timestamp and check conservation per event.

Outputs, both flavours::

    rec_event, rec_context, rec_semi, rec_mature, rec_cycle, rec_cell,
    rec_forced, evicted, stranded

``evicted`` marks events pushed out of a full tissue store, ``stranded``
events still unsampled in the store when the stream ends.
"""
from __future__ import annotations

import numpy as np

from .._accel import njit


@njit
def _interim(weights, sums, inflamed):
    out = np.empty(3)
    for p in range(3):
        out[p] = weights[p, 0] * sums[0] + weights[p, 1] * sums[1] + weights[p, 2] * sums[2]
        if inflamed:
            out[p] = out[p] * 2.0
    return out


@njit
def run_dca_numba(cat_sums, inflamed, offsets, weights, thresholds, store_cap, cell_cap, per_cycle):
    n_cycles = cat_sums.shape[0]
    n_cells = thresholds.shape[0]
    n_events = offsets[n_cycles]

    rec_event = np.empty(n_events, np.int64)
    rec_context = np.empty(n_events, np.int8)
    rec_semi = np.empty(n_events)
    rec_mature = np.empty(n_events)
    rec_cycle = np.empty(n_events, np.int64)
    rec_cell = np.empty(n_events, np.int64)
    rec_forced = np.empty(n_events, np.int8)
    evicted = np.zeros(n_events, np.bool_)
    stranded = np.zeros(n_events, np.bool_)
    n_rec = 0

    store = np.empty(store_cap, np.int64)
    head = 0
    size = 0
    cell_ag = np.empty((n_cells, cell_cap), np.int64)
    cell_len = np.zeros(n_cells, np.int64)
    cell_out = np.zeros((n_cells, 3))

    for cycle in range(n_cycles):
        for e in range(offsets[cycle], offsets[cycle + 1]):
            if size == store_cap:
                evicted[store[head]] = True
                head = (head + 1) % store_cap
                size -= 1
            store[(head + size) % store_cap] = e
            size += 1

        o = _interim(weights, cat_sums[cycle], inflamed[cycle])
        for m in range(n_cells):
            take = min(per_cycle, cell_cap - cell_len[m], size)
            for _ in range(take):
                cell_ag[m, cell_len[m]] = store[head]
                cell_len[m] += 1
                head = (head + 1) % store_cap
                size -= 1
            cell_out[m, 0] += o[0]
            cell_out[m, 1] += o[1]
            cell_out[m, 2] += o[2]
            if cell_out[m, 0] > thresholds[m]:
                ctx = 1 if cell_out[m, 2] > cell_out[m, 1] else 0
                for k in range(cell_len[m]):
                    rec_event[n_rec] = cell_ag[m, k]
                    rec_context[n_rec] = ctx
                    rec_semi[n_rec] = cell_out[m, 1]
                    rec_mature[n_rec] = cell_out[m, 2]
                    rec_cycle[n_rec] = cycle
                    rec_cell[n_rec] = m
                    rec_forced[n_rec] = 0
                    n_rec += 1
                cell_len[m] = 0
                cell_out[m, 0] = 0.0
                cell_out[m, 1] = 0.0
                cell_out[m, 2] = 0.0

    for m in range(n_cells):
        if cell_len[m] > 0:
            ctx = 1 if cell_out[m, 2] > cell_out[m, 1] else 0
            for k in range(cell_len[m]):
                rec_event[n_rec] = cell_ag[m, k]
                rec_context[n_rec] = ctx
                rec_semi[n_rec] = cell_out[m, 1]
                rec_mature[n_rec] = cell_out[m, 2]
                rec_cycle[n_rec] = n_cycles
                rec_cell[n_rec] = m
                rec_forced[n_rec] = 1
                n_rec += 1

    for k in range(size):
        stranded[store[(head + k) % store_cap]] = True

    return (rec_event[:n_rec], rec_context[:n_rec], rec_semi[:n_rec], rec_mature[:n_rec],
            rec_cycle[:n_rec], rec_cell[:n_rec], rec_forced[:n_rec], evicted, stranded)


def _interim_py(weights, sums, inflamed):
    # same operation order as the jitted version, so both give identical bits
    out = weights[:, 0] * sums[0] + weights[:, 1] * sums[1] + weights[:, 2] * sums[2]
    return out * 2.0 if inflamed else out


def run_dca_numpy(cat_sums, inflamed, offsets, weights, thresholds, store_cap, cell_cap, per_cycle):
    n_cycles = cat_sums.shape[0]
    n_cells = thresholds.shape[0]
    n_events = int(offsets[n_cycles])
    evicted = np.zeros(n_events, bool)
    stranded = np.zeros(n_events, bool)

    store = np.empty(0, np.int64)
    cell_ag = np.empty((n_cells, cell_cap), np.int64)
    cell_len = np.zeros(n_cells, np.int64)
    cell_out = np.zeros((n_cells, 3))
    slot = np.arange(cell_cap)
    chunks: list[tuple] = []

    def emit(cells, cycle, forced):
        lens = cell_len[cells]
        mask = slot[None, :] < lens[:, None]
        events = cell_ag[cells][mask]
        reps = np.repeat(cells, lens)
        out = cell_out[reps]
        ctx = (out[:, 2] > out[:, 1]).astype(np.int8)
        chunks.append((events, ctx, out[:, 1].copy(), out[:, 2].copy(),
                       np.full(len(events), cycle, np.int64), reps.astype(np.int64),
                       np.full(len(events), forced, np.int8)))

    for cycle in range(n_cycles):
        new = np.arange(offsets[cycle], offsets[cycle + 1], dtype=np.int64)
        store = np.concatenate((store, new))
        if len(store) > store_cap:
            evicted[store[: len(store) - store_cap]] = True
            store = store[len(store) - store_cap:]

        o = _interim_py(weights, cat_sums[cycle], inflamed[cycle])

        want = np.minimum(per_cycle, cell_cap - cell_len)
        taken_upto = np.minimum(np.cumsum(want), len(store))
        take = np.diff(np.concatenate(([0], taken_upto)))
        n_taken = int(taken_upto[-1]) if n_cells else 0
        if n_taken:
            owners = np.repeat(np.arange(n_cells), take)
            starts = np.repeat(taken_upto - take, take)
            pos = cell_len[owners] + (np.arange(n_taken) - starts)
            cell_ag[owners, pos] = store[:n_taken]
            cell_len += take
            store = store[n_taken:]

        cell_out += o
        migrating = np.flatnonzero(cell_out[:, 0] > thresholds)
        if len(migrating):
            emit(migrating, cycle, 0)
            cell_len[migrating] = 0
            cell_out[migrating] = 0.0

    holding = np.flatnonzero(cell_len > 0)
    if len(holding):
        emit(holding, n_cycles, 1)
    stranded[store] = True

    if chunks:
        cols = [np.concatenate(c) for c in zip(*chunks)]
    else:
        cols = [np.empty(0, np.int64), np.empty(0, np.int8), np.empty(0), np.empty(0),
                np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int8)]
    return (*cols, evicted, stranded)
