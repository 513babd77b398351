import dataclasses
import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from immunesom import dca
from immunesom.dca import AntigenEvent, DcaParams
from immunesom.errors import ConfigError, SequencingError

TABLE = np.array([[4, 2, 6], [0, 0, 1], [8, 4, -12]], dtype=float)


def reference_replay(frames, events, params, weights=TABLE):
    """Plain-Python replay used as an oracle: one dict per cell, a deque store."""
    thresholds = np.random.default_rng(params.rng_seed).uniform(
        params.migration_threshold_center - params.migration_threshold_halfwidth,
        params.migration_threshold_center + params.migration_threshold_halfwidth,
        params.population_size)
    cells = [{"tm": tm, "ag": [], "out": [0.0, 0.0, 0.0]} for tm in thresholds]
    store, evicted, out = deque(), [], []
    per_t = {}
    for i, (t, pid) in enumerate(events):
        per_t.setdefault(t, []).append((i, pid))
    I = params.signals_per_category
    for cycle, (t, row) in enumerate(frames):
        for item in per_t.get(t, []):
            if len(store) == params.tissue_antigen_capacity:
                evicted.append(store.popleft())
            store.append(item)
        s = [sum(row[c * I:(c + 1) * I]) for c in range(3)]
        o = [weights[p][0] * s[0] + weights[p][1] * s[1] + weights[p][2] * s[2] for p in range(3)]
        if row[-1]:
            o = [2 * v for v in o]
        for m, cell in enumerate(cells):
            n = min(params.antigens_sampled_per_cycle,
                    params.dc_antigen_capacity - len(cell["ag"]), len(store))
            cell["ag"] += [store.popleft() for _ in range(n)]
            cell["out"] = [a + b for a, b in zip(cell["out"], o)]
            if cell["out"][0] > cell["tm"]:
                ctx = int(cell["out"][2] > cell["out"][1])
                out += [(pid, ctx, cycle, m, 0) for _, pid in cell["ag"]]
                cell["ag"], cell["out"] = [], [0.0, 0.0, 0.0]
    for m, cell in enumerate(cells):
        if cell["ag"]:
            ctx = int(cell["out"][2] > cell["out"][1])
            out += [(pid, ctx, len(frames), m, 1) for _, pid in cell["ag"]]
    return out, evicted, list(store)


def random_session(rng, n_frames, width, max_events=40, pids=(1, 2, 3)):
    frames = []
    for t in range(n_frames):
        row = list(rng.uniform(0, 100, width - 1).round(1)) + [int(rng.random() < 0.2)]
        frames.append((t, row))
    events = [(t, int(rng.choice(pids))) for t in range(n_frames)
              for _ in range(rng.integers(0, max_events))]
    return frames, events


def as_arrays(frames, events):
    ft = np.array([t for t, _ in frames])
    fx = np.array([row for _, row in frames], dtype=float)
    et = np.array([t for t, _ in events], dtype=np.int64)
    ep = np.array([p for _, p in events], dtype=np.int64)
    return (ft, fx), (et, ep)


def test_weight_matrix_matches_table():
    assert np.array_equal(dca.DEFAULT_WEIGHTS.w, TABLE)
    w = dca.WeightMatrix.from_pamp_weights(3.0, 5.0).w
    # rows are outputs (csm, semi, mature), columns categories (PAMP, danger, safe)
    assert w[0, 1] == w[0, 0] / 2 and w[0, 2] == w[0, 0] * 1.5
    assert w[1, 0] == w[1, 1] == 0 and w[1, 2] == 1
    assert w[2, 1] == w[2, 0] / 2 and w[2, 2] == -w[2, 0] * 1.5


def test_weight_matrix_is_read_only():
    with pytest.raises(ValueError):
        dca.DEFAULT_WEIGHTS.w[0, 0] = 1


def test_defaults_from_indexed_symbols():
    p = DcaParams.from_indexed()
    assert p == DcaParams()
    assert (p.tissue_antigen_capacity, p.population_size, p.dc_antigen_capacity,
            p.antigens_sampled_per_cycle) == (500, 100, 50, 10)
    assert p.frame_width == 4 and dca.EXPERIMENT_PARAMS.frame_width == 7


@pytest.mark.parametrize("kwargs", [
    {"population_size": 0}, {"migration_threshold_center": 20}, {"categories": 5},
    {"max_cycles": 0}, {"migration_threshold_halfwidth": -1}])
def test_bad_params(kwargs):
    with pytest.raises(ConfigError):
        DcaParams(**kwargs)


@pytest.mark.parametrize("frame, expected", [
    ((100, 100, 0, 0), (600, 0, 1200)),
    ((0, 0, 100, 0), (600, 100, -1200)),
    ((0, 0, 0, 1), (0, 0, 0)),
    ((10, 0, 0, 1), (80, 0, 160)),
])
def test_interim_outputs(frame, expected):
    assert dca.compute_interim_outputs(frame, signals_per_category=1) == expected


def test_in_category_signals_are_summed():
    seven = (60, 40, 30, 70, 0, 0, 0)
    assert dca.compute_interim_outputs(seven) == dca.compute_interim_outputs(
        (100, 100, 0, 0), signals_per_category=1)


def test_thresholds():
    t = dca.migration_thresholds(DcaParams())
    assert len(t) == 100 and t.min() >= 30 and t.max() <= 90
    assert np.array_equal(t, dca.migration_thresholds(DcaParams()))
    flat = dca.migration_thresholds(DcaParams(migration_threshold_halfwidth=0))
    assert np.all(flat == 60)


def test_single_cell_safe_frame_migrates_semi_mature():
    params = DcaParams(population_size=1, migration_threshold_center=10,
                       migration_threshold_halfwidth=0)
    run = dca.replay(([0], [[0, 0, 100, 0]]), [AntigenEvent(0, 7)], params)
    assert run.records() == [dca.PresentedAntigenRecord(7, 0, 100.0, -1200.0, 0, 0, False)]


def test_zero_signals_never_migrate():
    params = DcaParams(population_size=5)
    frames = (np.arange(50), np.zeros((50, 4)))
    run = dca.replay(frames, (np.arange(50), np.ones(50, np.int64)), params)
    assert np.all(run.forced == 1)
    assert np.all(run.cycle == 50)


def test_empty_stream():
    run = dca.replay((np.arange(3), np.zeros((3, 4))), [], DcaParams())
    assert len(run) == 0 and run.records() == []


def test_tissue_store_fifo_eviction():
    tissue = dca.Tissue(capacity=3)
    tissue.update((0, 0, 0, 0), [AntigenEvent(0, p) for p in range(3)])
    assert len(tissue.antigen) == 3
    tissue.update(None, [AntigenEvent(0, 9)])
    assert [e.pid for e in tissue.antigen] == [1, 2, 9]
    assert [e.pid for e in tissue.evicted] == [0]


def test_tied_outputs_are_semi_mature():
    cell = dca.DendriticCell(10.0)
    cell.outputs = np.array([20.0, 5.0, 5.0])
    assert cell.context == 0


def test_sequencing_errors():
    frames = (np.array([0, 1, 2]), np.zeros((3, 4)))
    with pytest.raises(SequencingError):
        dca.replay(frames, (np.array([2, 1]), np.array([1, 1])), DcaParams())
    with pytest.raises(SequencingError):
        dca.replay(frames, (np.array([5]), np.array([1])), DcaParams())
    with pytest.raises(SequencingError):
        dca.replay((np.array([0, 0]), np.zeros((2, 4))), [], DcaParams())


@pytest.mark.parametrize("backend", ["numba", "numpy"])
@pytest.mark.parametrize("seed", range(6))
def test_matches_reference(seed, backend):
    rng = np.random.default_rng(seed)
    params = DcaParams(population_size=int(rng.integers(1, 12)), tissue_antigen_capacity=int(rng.integers(5, 60)),
                       dc_antigen_capacity=int(rng.integers(1, 20)),
                       antigens_sampled_per_cycle=int(rng.integers(1, 8)),
                       signals_per_category=int(rng.integers(1, 3)), rng_seed=seed)
    frames, events = random_session(rng, 40, params.frame_width)
    expected, evicted, stranded = reference_replay(frames, events, params)
    run = dca.replay(*as_arrays(frames, events), params, backend=backend)
    got = list(zip(run.antigen_type.tolist(), run.context.tolist(), run.cycle.tolist(),
                   run.cell.tolist(), run.forced.tolist()))
    assert got == expected
    assert np.flatnonzero(run.evicted).tolist() == sorted(i for i, _ in evicted)
    assert np.flatnonzero(run.stranded).tolist() == sorted(i for i, _ in stranded)


def test_object_path_matches_kernel():
    rng = np.random.default_rng(99)
    params = DcaParams(population_size=8, tissue_antigen_capacity=30, rng_seed=4)
    frames, events = random_session(rng, 30, 4)
    tissue = dca.Tissue(params.tissue_antigen_capacity)
    population = dca.init_population(params)
    records = []
    for cycle, (t, row) in enumerate(frames):
        tissue.update(row, [AntigenEvent(et, p) for et, p in events if et == t])
        _, recs = dca.cell_cycle(tissue, population, dca.DEFAULT_WEIGHTS, params, cycle)
        records += recs
    records += dca.force_migrate(population, len(frames))
    run = dca.replay(*as_arrays(frames, events), params)
    assert records == run.records()


def test_backends_identical_on_generated_session(an_short):
    session, ft, fx = an_short
    events = (session.antigen_t, session.antigen_pid)
    a = dca.replay((ft, fx), events, backend="numba")
    b = dca.replay((ft, fx), events, backend="numpy")
    for field in dataclasses.fields(a):
        assert np.array_equal(getattr(a, field.name), getattr(b, field.name)), field.name


def test_conservation_on_generated_session(an_short):
    session, ft, fx = an_short
    run = dca.replay((ft, fx), (session.antigen_t, session.antigen_pid))
    for pid, c in run.conservation().items():
        assert c["ingested"] == c["presented"] + c["evicted"] + c["stranded"], pid


def test_max_cycles_truncates():
    frames = (np.arange(10), np.full((10, 4), 50.0))
    run = dca.replay(frames, (np.arange(10), np.arange(10)), DcaParams(max_cycles=4))
    assert len(run.frame_times) == 4 and set(run.antigen_type) <= {0, 1, 2, 3}


def test_without_forced():
    params = DcaParams(population_size=3)
    run = dca.replay((np.arange(3), np.zeros((3, 4))), (np.zeros(5, np.int64), np.ones(5, np.int64)), params)
    assert len(run) == 5 and len(run.without_forced()) == 0


def test_live_mode_presents_everything_without_loss():
    params = DcaParams(population_size=4, rng_seed=2)
    live = dca.LiveDca(params)
    for t in range(20):
        live.ingest([AntigenEvent(t, t % 3)] * 5)
        live.update_signals((30, 10, 5, 0))
        live.cycle()
    live.drain()
    assert len(live.records) == 100


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(1, 400), st.floats(0, 80))
def test_migration_after_ceil_threshold_over_csm(seed, csm_per_cycle, halfwidth):
    """Under a constant frame each cell migrates every ceil(t_m / csm) cycles (plus exact ties)."""
    params = DcaParams(population_size=3, rng_seed=seed, migration_threshold_center=100,
                       migration_threshold_halfwidth=min(halfwidth, 99))
    n = 60
    frames = (np.arange(n), np.tile([csm_per_cycle / 4.0, 0, 0, 0], (n, 1)))
    events = (np.zeros(3, np.int64), np.arange(3))
    run = dca.replay(frames, events, params)
    tm = dca.migration_thresholds(params)
    for rec in run.records():
        if rec.forced:
            continue
        csm = (csm_per_cycle / 4.0) * 4
        k = math.floor(tm[rec.cell] / csm) + 1
        assert rec.migration_cycle == k - 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_replay_is_deterministic(seed):
    rng = np.random.default_rng(seed)
    frames, events = random_session(rng, 15, 4, max_events=10)
    params = DcaParams(population_size=5, tissue_antigen_capacity=20, rng_seed=seed)
    a = dca.replay(*as_arrays(frames, events), params)
    b = dca.replay(*as_arrays(frames, events), params)
    assert a.records() == b.records()
    c = a.conservation()
    assert all(v["ingested"] == v["presented"] + v["evicted"] + v["stranded"] for v in c.values())
