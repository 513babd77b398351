"""Dendritic Cell Algorithm: signal fusion, antigen sampling and migration.

Two entry points share one set of semantics:

* :func:`replay` / :func:`run_session` drive a whole recorded session through
  the jitted (or numpy) kernel, one cell cycle per one-second frame;
* :class:`Tissue`, :func:`init_population` and :func:`cell_cycle` expose the
  same algorithm one step at a time, and :class:`LiveDca` wraps them for
  asynchronous use.
"""
from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from . import _accel
from .errors import ConfigError, SequencingError
from .kernels.dca import run_dca_numba, run_dca_numpy
from .signals import NormalizedSignalFrame

PAMP, DANGER, SAFE = 0, 1, 2
CSM, SEMI, MATURE = 0, 1, 2


@dataclass(frozen=True)
class DcaParams:
    """Population and store sizes, stored as capacities (not zero-indexed).

    Defaults are the standard setting: 1 signal per category, 500 tissue
    antigen, 100 cells holding 50 antigen each, 10 antigen sampled per cycle,
    migration thresholds uniform in 60 +/- 30.
    """

    signals_per_category: int = 1
    categories: int = 4
    tissue_antigen_capacity: int = 500
    max_cycles: int | None = None
    population_size: int = 100
    dc_antigen_capacity: int = 50
    outputs_per_dc: int = 3
    antigens_sampled_per_cycle: int = 10
    migration_threshold_center: float = 60.0
    migration_threshold_halfwidth: float = 30.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        counts = ("signals_per_category", "tissue_antigen_capacity", "population_size",
                  "dc_antigen_capacity", "antigens_sampled_per_cycle")
        for name in counts:
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.max_cycles is not None and self.max_cycles < 1:
            raise ConfigError("max_cycles must be >= 1 or None")
        if self.categories != 4:
            raise ConfigError("categories is fixed at 4 (PAMP, danger, safe, inflammation)")
        if self.outputs_per_dc != 3:
            raise ConfigError("outputs_per_dc is fixed at 3 (csm, semi, mature)")
        if self.migration_threshold_halfwidth < 0:
            raise ConfigError("migration_threshold_halfwidth must be >= 0")
        if self.migration_threshold_center - self.migration_threshold_halfwidth <= 0:
            raise ConfigError("migration thresholds must stay positive")

    @classmethod
    def from_indexed(cls, I=0, J=3, K=499, M=99, N=49, P=3, Q=9, L=None, **kwargs) -> "DcaParams":
        """Build from zero-indexed symbol values (each capacity is value + 1)."""
        return cls(
            signals_per_category=I + 1, categories=J + 1, tissue_antigen_capacity=K + 1,
            max_cycles=None if L is None else L + 1, population_size=M + 1,
            dc_antigen_capacity=N + 1, outputs_per_dc=P, antigens_sampled_per_cycle=Q + 1,
            **kwargs,
        )

    @property
    def frame_width(self) -> int:
        return 3 * self.signals_per_category + 1


# Seven-signal frames: two signals per category.
EXPERIMENT_PARAMS = DcaParams(signals_per_category=2)


@dataclass(frozen=True)
class WeightMatrix:
    """Fusion weights ``w[p, j]``: rows are outputs (csm, semi, mature),
    columns are signal categories (PAMP, danger, safe)."""

    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=np.float64)
        if w.shape != (3, 3):
            raise ConfigError(f"weight matrix must be 3x3, got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_pamp_weights(cls, w1: float = 4.0, w2: float = 8.0) -> "WeightMatrix":
        """Derive all nine weights from the PAMP->csm (w1) and PAMP->mature (w2) weights."""
        return cls(np.array([
            [w1, w1 / 2.0, w1 * 1.5],
            [0.0, 0.0, 1.0],
            [w2, w2 / 2.0, -w2 * 1.5],
        ]))

    def __getitem__(self, key):
        return self.w[key]

    def __eq__(self, other) -> bool:
        return isinstance(other, WeightMatrix) and np.array_equal(self.w, other.w)

    def __hash__(self) -> int:
        return hash(self.w.tobytes())


DEFAULT_WEIGHTS = WeightMatrix.from_pamp_weights(4.0, 8.0)


@dataclass(frozen=True)
class AntigenEvent:
    timestamp: int
    pid: int


@dataclass(frozen=True)
class PresentedAntigenRecord:
    antigen_type: int
    context: int
    o_semi: float
    o_mature: float
    migration_cycle: int
    cell: int = -1
    forced: bool = False


@dataclass
class DendriticCell:
    migration_threshold: float
    antigen: list = field(default_factory=list)
    outputs: np.ndarray = field(default_factory=lambda: np.zeros(3))
    signal_snapshot: np.ndarray | None = None
    lifetime_cycles: int = 0

    def reset(self) -> None:
        self.antigen = []
        self.outputs = np.zeros(3)
        self.signal_snapshot = None
        self.lifetime_cycles = 0

    @property
    def context(self) -> int:
        # ties go to the semi-mature (benign) context
        return 1 if self.outputs[MATURE] > self.outputs[SEMI] else 0


def migration_thresholds(params: DcaParams) -> np.ndarray:
    """Per-cell thresholds drawn from a PCG64 generator seeded with ``rng_seed``."""
    rng = np.random.default_rng(params.rng_seed)
    lo = params.migration_threshold_center - params.migration_threshold_halfwidth
    hi = params.migration_threshold_center + params.migration_threshold_halfwidth
    if hi == lo:
        return np.full(params.population_size, lo)
    return rng.uniform(lo, hi, params.population_size)


def init_population(params: DcaParams) -> list[DendriticCell]:
    return [DendriticCell(float(t)) for t in migration_thresholds(params)]


def _frame_values(frame) -> np.ndarray:
    if isinstance(frame, NormalizedSignalFrame):
        return frame.as_array()
    return np.asarray(frame, dtype=np.float64)


def category_sums(values: np.ndarray, signals_per_category: int) -> tuple[np.ndarray, np.ndarray]:
    """Sum in-category signals of ``(..., 3*I+1)`` frame rows.

    Returns ``(sums (..., 3), inflamed (...))``. Signals are laid out category
    by category with inflammation last.
    """
    values = np.asarray(values, dtype=np.float64)
    width = 3 * signals_per_category + 1
    if values.shape[-1] != width:
        raise ConfigError(
            f"frame has {values.shape[-1]} columns, expected {width} "
            f"for {signals_per_category} signal(s) per category"
        )
    grouped = values[..., :-1].reshape(values.shape[:-1] + (3, signals_per_category))
    sums = grouped[..., 0]
    for i in range(1, signals_per_category):
        sums = sums + grouped[..., i]
    return np.ascontiguousarray(sums), values[..., -1] != 0


def compute_interim_outputs(frame, weights: WeightMatrix = DEFAULT_WEIGHTS,
                            signals_per_category: int = 2) -> tuple[float, float, float]:
    """Weighted sum of PAMP, danger and safe signals per output; doubled when inflamed."""
    sums, inflamed = category_sums(_frame_values(frame), signals_per_category)
    w = weights.w
    out = [w[p, 0] * sums[0] + w[p, 1] * sums[1] + w[p, 2] * sums[2] for p in range(3)]
    if inflamed:
        out = [o * 2.0 for o in out]
    return float(out[0]), float(out[1]), float(out[2])


class Tissue:
    """Current signal frame plus a bounded FIFO of unsampled antigen."""

    def __init__(self, capacity: int = 500):
        self.capacity = capacity
        self.signals: np.ndarray | None = None
        self.timestamp: int | None = None
        self.antigen: deque = deque()
        self.evicted: list[AntigenEvent] = []

    def update(self, frame, new_antigen: Iterable[AntigenEvent] = (), timestamp: int | None = None):
        if isinstance(frame, NormalizedSignalFrame):
            timestamp = frame.timestamp
        if frame is not None:
            if timestamp is not None and self.timestamp is not None and timestamp < self.timestamp:
                raise SequencingError(f"frame at {timestamp} is older than {self.timestamp}")
            self.signals = _frame_values(frame).copy()
            if timestamp is not None:
                self.timestamp = timestamp
        for event in new_antigen:
            if len(self.antigen) == self.capacity:
                self.evicted.append(self.antigen.popleft())
            self.antigen.append(event)
        return self

    def take(self, n: int) -> list[AntigenEvent]:
        n = min(n, len(self.antigen))
        return [self.antigen.popleft() for _ in range(n)]


def tissue_update(tissue: Tissue, frame, new_antigen: Iterable[AntigenEvent] = ()) -> Tissue:
    return tissue.update(frame, new_antigen)


def cell_cycle(tissue: Tissue, population: list[DendriticCell], weights: WeightMatrix,
               params: DcaParams, cycle: int = 0):
    """One update of every cell, in index order. Returns ``(population, records)``."""
    if tissue.signals is None:
        raise SequencingError("tissue holds no signal frame yet")
    o = np.array(compute_interim_outputs(tissue.signals, weights, params.signals_per_category))
    records: list[PresentedAntigenRecord] = []
    for m, cell in enumerate(population):
        room = params.dc_antigen_capacity - len(cell.antigen)
        cell.antigen.extend(tissue.take(min(params.antigens_sampled_per_cycle, room)))
        cell.signal_snapshot = tissue.signals.copy()
        cell.outputs = cell.outputs + o
        cell.lifetime_cycles += 1
        if cell.outputs[CSM] > cell.migration_threshold:
            records.extend(_present(cell, m, cycle, forced=False))
            cell.reset()
    return population, records


def _present(cell: DendriticCell, index: int, cycle: int, forced: bool):
    ctx = cell.context
    return [
        PresentedAntigenRecord(ev.pid, ctx, float(cell.outputs[SEMI]), float(cell.outputs[MATURE]),
                               cycle, index, forced)
        for ev in cell.antigen
    ]


def force_migrate(population: list[DendriticCell], cycle: int) -> list[PresentedAntigenRecord]:
    records = []
    for m, cell in enumerate(population):
        if cell.antigen:
            records.extend(_present(cell, m, cycle, forced=True))
            cell.reset()
    return records


@dataclass
class DcaRun:
    """Result of a replayed session, column-oriented."""

    antigen_type: np.ndarray
    context: np.ndarray
    o_semi: np.ndarray
    o_mature: np.ndarray
    cycle: np.ndarray
    cell: np.ndarray
    forced: np.ndarray
    event_index: np.ndarray
    event_pid: np.ndarray
    evicted: np.ndarray
    stranded: np.ndarray
    frame_times: np.ndarray

    def __len__(self) -> int:
        return len(self.antigen_type)

    def records(self) -> list[PresentedAntigenRecord]:
        return [
            PresentedAntigenRecord(int(a), int(c), float(s), float(m), int(l), int(k), bool(f))
            for a, c, s, m, l, k, f in zip(self.antigen_type, self.context, self.o_semi,
                                            self.o_mature, self.cycle, self.cell, self.forced)
        ]

    def without_forced(self) -> "DcaRun":
        keep = self.forced == 0
        cols = {f.name: getattr(self, f.name) for f in fields(self)}
        for name in ("antigen_type", "context", "o_semi", "o_mature", "cycle", "cell",
                     "forced", "event_index"):
            cols[name] = cols[name][keep]
        return DcaRun(**cols)

    def conservation(self) -> dict[int, dict[str, int]]:
        """Per antigen type: ingested, presented, evicted (overflow) and stranded counts."""
        out: dict[int, dict[str, int]] = {}
        for pid in np.unique(self.event_pid):
            is_pid = self.event_pid == pid
            out[int(pid)] = {
                "ingested": int(is_pid.sum()),
                "presented": int((self.antigen_type == pid).sum()),
                "evicted": int((is_pid & self.evicted).sum()),
                "stranded": int((is_pid & self.stranded).sum()),
            }
        return out


def _frames_as_arrays(frames) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(frames, tuple) and len(frames) == 2:
        t, x = frames
        return np.asarray(t, dtype=np.int64), np.asarray(x, dtype=np.float64)
    frames = list(frames)
    t = np.array([f.timestamp for f in frames], dtype=np.int64)
    x = np.array([f.as_tuple() for f in frames], dtype=np.float64).reshape(len(frames), 7)
    return t, x


def _events_as_arrays(events) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(events, tuple) and len(events) == 2:
        t, pid = events
        return np.asarray(t, dtype=np.int64), np.asarray(pid, dtype=np.int64)
    events = list(events)
    return (np.array([e.timestamp for e in events], dtype=np.int64),
            np.array([e.pid for e in events], dtype=np.int64))


def replay(frames, antigen_events, params: DcaParams = EXPERIMENT_PARAMS,
           weights: WeightMatrix = DEFAULT_WEIGHTS, backend: str | None = None) -> DcaRun:
    """Replay a recorded session: per second, ingest antigen, update signals, cycle cells.

    ``frames`` is a sequence of :class:`NormalizedSignalFrame` or a
    ``(timestamps, matrix)`` pair; ``antigen_events`` a sequence of
    :class:`AntigenEvent` or a ``(timestamps, pids)`` pair. Every antigen
    timestamp must have a frame.
    """
    ft, fx = _frames_as_arrays(frames)
    et, epid = _events_as_arrays(antigen_events)
    if len(ft) > 1 and np.any(np.diff(ft) <= 0):
        raise SequencingError("frame timestamps must be strictly increasing")
    if len(et) > 1 and np.any(np.diff(et) < 0):
        raise SequencingError("antigen timestamps must be non-decreasing")
    if params.max_cycles is not None and len(ft) > params.max_cycles:
        cut = ft[params.max_cycles]
        ft, fx = ft[: params.max_cycles], fx[: params.max_cycles]
        keep = et < cut
        et, epid = et[keep], epid[keep]

    slot = np.searchsorted(ft, et)
    if len(et) and (slot.max() >= len(ft) or np.any(ft[slot] != et)):
        bad = et[(slot >= len(ft)) | (ft[np.minimum(slot, len(ft) - 1)] != et)][0]
        raise SequencingError(f"antigen at t={bad} has no matching signal frame")
    offsets = np.zeros(len(ft) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(np.bincount(slot, minlength=len(ft)))

    sums, inflamed = category_sums(fx, params.signals_per_category)
    kernel = run_dca_numba if _accel.resolve(backend) == "numba" else run_dca_numpy
    ev, ctx, semi, mature, cyc, cell, forced, evicted, stranded = kernel(
        sums, inflamed, offsets, weights.w, migration_thresholds(params),
        params.tissue_antigen_capacity, params.dc_antigen_capacity,
        params.antigens_sampled_per_cycle,
    )
    return DcaRun(
        antigen_type=epid[ev], context=np.asarray(ctx, np.int8), o_semi=semi, o_mature=mature,
        cycle=cyc, cell=cell, forced=np.asarray(forced, np.int8), event_index=ev,
        event_pid=epid, evicted=evicted, stranded=stranded, frame_times=ft,
    )


def run_session(frames, antigen_events, params: DcaParams = EXPERIMENT_PARAMS,
                weights: WeightMatrix = DEFAULT_WEIGHTS,
                backend: str | None = None) -> list[PresentedAntigenRecord]:
    return replay(frames, antigen_events, params, weights, backend).records()


class LiveDca:
    """Asynchronous front end: signal updates, antigen ingest and cell cycles may
    arrive from different threads; each holds the tissue lock for its duration.

    Record order is only guaranteed per cell.
    """

    def __init__(self, params: DcaParams = EXPERIMENT_PARAMS,
                 weights: WeightMatrix = DEFAULT_WEIGHTS):
        self.params = params
        self.weights = weights
        self.tissue = Tissue(params.tissue_antigen_capacity)
        self.population = init_population(params)
        self.records: list[PresentedAntigenRecord] = []
        self.cycles = 0
        self._lock = threading.Lock()

    def update_signals(self, frame) -> None:
        with self._lock:
            self.tissue.update(frame)

    def ingest(self, events: Sequence[AntigenEvent]) -> None:
        with self._lock:
            self.tissue.update(None, events)

    def cycle(self) -> list[PresentedAntigenRecord]:
        with self._lock:
            if self.tissue.signals is None:
                return []
            _, recs = cell_cycle(self.tissue, self.population, self.weights, self.params, self.cycles)
            self.cycles += 1
            self.records.extend(recs)
            return recs

    def drain(self) -> list[PresentedAntigenRecord]:
        with self._lock:
            recs = force_migrate(self.population, self.cycles)
            self.records.extend(recs)
            return recs
