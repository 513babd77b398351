"""Post-processing of detector output: antigen segments, MCAV/MBMU scores,
trendlines and a signals-only k-means baseline."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dca import DcaRun, PresentedAntigenRecord
from .errors import ConfigError
from .som import SomMap, classify_batch

logger = logging.getLogger(__name__)

MCAV_ANOMALY_THRESHOLD = 0.5


def compute_mcav(records, antigen_type: int) -> float | None:
    """Fraction of an antigen type's presentations made in mature context.

    Returns ``None`` when the type was never presented.
    """
    types, contexts = _type_context(records)
    mask = types == antigen_type
    total = int(mask.sum())
    if total == 0:
        return None
    return float(contexts[mask].sum()) / total


def mcav_table(records) -> dict[int, float]:
    types, contexts = _type_context(records)
    uniq, inverse = np.unique(types, return_inverse=True)
    mature = np.bincount(inverse, weights=contexts, minlength=len(uniq))
    total = np.bincount(inverse, minlength=len(uniq))
    return {int(t): float(m / n) for t, m, n in zip(uniq, mature, total)}


def _type_context(records) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(records, DcaRun):
        return records.antigen_type, records.context.astype(np.float64)
    records = list(records)
    if records and isinstance(records[0], PresentedAntigenRecord):
        return (np.array([r.antigen_type for r in records], dtype=np.int64),
                np.array([r.context for r in records], dtype=np.float64))
    return np.empty(0, np.int64), np.empty(0)


@dataclass
class SegmentSeries:
    """Per-segment, per-antigen-type scores over consecutive blocks of ``z`` items.

    ``span`` holds the first and last timestamp (cell cycle for the DCA,
    second for the SOM) covered by each segment.
    """

    z: int
    kind: str  # "MCAV" or "MBMU"
    scores: list[dict[int, float]] = field(default_factory=list)
    counts: list[dict[int, int]] = field(default_factory=list)
    partial: list[bool] = field(default_factory=list)
    span: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.scores)

    def series(self, antigen_type: int) -> np.ndarray:
        """Scores of one type across the segments in which it appears."""
        return np.array([s[antigen_type] for s in self.scores if antigen_type in s])

    def types(self) -> list[int]:
        return sorted({t for s in self.scores for t in s})

    def rows(self):
        for i, (scores, counts) in enumerate(zip(self.scores, self.counts)):
            for t in sorted(scores):
                yield i, t, scores[t], counts[t], self.partial[i]


def _segment(types: np.ndarray, values: np.ndarray, times: np.ndarray, z: int, kind: str) -> SegmentSeries:
    if z < 1:
        raise ConfigError("segment size z must be >= 1")
    n = len(types)
    out = SegmentSeries(z, kind)
    if n == 0:
        return out
    block = np.arange(n) // z
    n_blocks = int(block[-1]) + 1
    uniq_types, type_idx = np.unique(types, return_inverse=True)
    key = block * len(uniq_types) + type_idx
    keys, inverse = np.unique(key, return_inverse=True)
    sums = np.bincount(inverse, weights=values, minlength=len(keys))
    cnts = np.bincount(inverse, minlength=len(keys))
    out.scores = [dict() for _ in range(n_blocks)]
    out.counts = [dict() for _ in range(n_blocks)]
    for k, s, c in zip(keys, sums, cnts):
        b, ti = divmod(int(k), len(uniq_types))
        t = int(uniq_types[ti])
        out.scores[b][t] = float(s / c)
        out.counts[b][t] = int(c)
    out.partial = [False] * n_blocks
    out.partial[-1] = n % z != 0
    starts = np.arange(n_blocks) * z
    ends = np.minimum(starts + z, n) - 1
    out.span = [(int(times[s]), int(times[e])) for s, e in zip(starts, ends)]
    return out


def segment_stream(records, z: int) -> SegmentSeries:
    """Cut presented antigen into blocks of ``z`` in presentation order and
    compute each type's MCAV within each block."""
    if isinstance(records, DcaRun):
        types, ctx, times = records.antigen_type, records.context.astype(np.float64), records.cycle
    else:
        records = list(records)
        types = np.array([r.antigen_type for r in records], dtype=np.int64)
        ctx = np.array([r.context for r in records], dtype=np.float64)
        times = np.array([r.migration_cycle for r in records], dtype=np.int64)
    return _segment(types, ctx, times, z, "MCAV")


@dataclass
class Couplings:
    """Antigen events paired with the signal frame of the same second."""

    antigen_type: np.ndarray
    frame_index: np.ndarray
    timestamp: np.ndarray
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.antigen_type)


def couple_antigen_signals(antigen_events, frame_times) -> Couplings:
    """Attach each antigen event to the frame carrying its timestamp.

    ``antigen_events`` is a ``(timestamps, pids)`` pair or a sequence of
    :class:`~immunesom.dca.AntigenEvent`; events in seconds without a frame
    are dropped and counted.
    """
    if isinstance(antigen_events, tuple) and len(antigen_events) == 2:
        et, pid = (np.asarray(a, dtype=np.int64) for a in antigen_events)
    else:
        events = list(antigen_events)
        et = np.array([e.timestamp for e in events], dtype=np.int64)
        pid = np.array([e.pid for e in events], dtype=np.int64)
    ft = np.asarray(frame_times, dtype=np.int64)
    order = np.argsort(ft, kind="stable")
    sorted_ft = ft[order]
    pos = np.searchsorted(sorted_ft, et)
    pos_c = np.minimum(pos, max(len(ft) - 1, 0))
    hit = (pos < len(ft)) & (sorted_ft[pos_c] == et) if len(ft) else np.zeros(len(et), bool)
    dropped = int((~hit).sum())
    if dropped:
        logger.warning("dropped %d antigen events with no signal frame", dropped)
    return Couplings(pid[hit], order[pos_c[hit]], et[hit], dropped)


def compute_mbmu(couplings: Couplings, frames: np.ndarray, som: SomMap,
                 threshold: float = 65.0, z: int = 1800, backend: str | None = None) -> SegmentSeries:
    """Per segment of ``z`` couplings, each type's mean binary BMU-distance verdict."""
    if not som.trained:
        raise ConfigError("MBMU needs a trained map")
    frames = np.asarray(frames, dtype=np.float64)
    # every coupling in a second shares one frame, so classify frames once
    verdict = classify_batch(som, frames, threshold, backend).astype(np.float64)
    return _segment(couplings.antigen_type, verdict[couplings.frame_index],
                    couplings.timestamp, z, "MBMU")


def matched_som_segment_size(z_dca: int, n_presented: int, n_couplings: int) -> int:
    """SOM segment size giving as many segments as the DCA does at ``z_dca``."""
    if n_presented <= 0:
        raise ConfigError("no DCA presentations to match")
    return max(1, int(round(z_dca * n_couplings / n_presented)))


def mean_of_runs(series_list: list[SegmentSeries]) -> SegmentSeries:
    """Average per-segment scores across replicate runs.

    Each (segment, type) score is the mean over the runs in which the type
    appears in that segment; counts are summed.
    """
    if not series_list:
        raise ConfigError("no series to average")
    z, kind = series_list[0].z, series_list[0].kind
    n_seg = max(len(s) for s in series_list)
    out = SegmentSeries(z, kind)
    for i in range(n_seg):
        acc: dict[int, list[float]] = {}
        cnt: dict[int, int] = {}
        partial = False
        spans = []
        for s in series_list:
            if i >= len(s):
                continue
            partial = partial or s.partial[i]
            spans.append(s.span[i])
            for t, v in s.scores[i].items():
                acc.setdefault(t, []).append(v)
                cnt[t] = cnt.get(t, 0) + s.counts[i][t]
        out.scores.append({t: float(np.mean(v)) for t, v in acc.items()})
        out.counts.append(cnt)
        out.partial.append(partial)
        out.span.append((min(a for a, _ in spans), max(b for _, b in spans)))
    return out


def segments_within(series: SegmentSeries, start: int, end: int) -> list[int]:
    """Indices of segments whose whole span lies in ``[start, end)``."""
    return [i for i, (a, b) in enumerate(series.span) if a >= start and b < end]


def mean_score(series: SegmentSeries, types, segments=None) -> float | None:
    """Mean over every (segment, type) score for the given types and segments.

    ``None`` when none of the types appears in the chosen segments.
    """
    wanted = set(int(t) for t in np.atleast_1d(types))
    chosen = range(len(series)) if segments is None else segments
    values = [v for i in chosen for t, v in series.scores[i].items() if t in wanted]
    return float(np.mean(values)) if values else None


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean over the last ``min(window, i+1)`` points."""
    if window < 1:
        raise ConfigError("window must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    if len(x) == 0:
        return x
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(0, idx - window)
    return (csum[idx] - csum[lo]) / (idx - lo)


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centers: np.ndarray
    fractions: np.ndarray
    iterations: int
    converged: bool
    inertia: float = 0.0

    @property
    def split(self) -> float:
        """Share of points in the largest cluster."""
        return float(self.fractions.max())


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int) -> KMeansResult:
    k = len(centers)
    assign = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        for c in range(k):
            if not np.any(new == c):
                # move the point farthest from its own centre into the empty cluster
                own = d2[np.arange(len(x)), new]
                far = int(np.argmax(own))
                new[far] = c
                centers[c] = x[far]
        if assign is not None and np.array_equal(new, assign):
            converged = True
            break
        assign = new
        for c in range(k):
            centers[c] = x[assign == c].mean(axis=0)
    inertia = float(((x - centers[assign]) ** 2).sum())
    fractions = np.bincount(assign, minlength=k) / len(x)
    return KMeansResult(assign, centers, fractions, it, converged, inertia)


def kmeans_baseline(frames, k: int = 2, seed: int = 0, max_iter: int = 300,
                    n_init: int = 10) -> KMeansResult:
    """Lloyd's algorithm from ``k`` distinct, randomly chosen data points.

    Runs ``n_init`` seeded starts and keeps the one with the lowest
    within-cluster sum of squares, since a single start can settle in a
    poor local minimum.
    """
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ConfigError("k-means needs a non-empty 2-D data set")
    if k < 1 or n_init < 1:
        raise ConfigError("k and n_init must be >= 1")
    distinct = np.unique(x, axis=0)
    if k > len(distinct):
        raise ConfigError(f"k={k} exceeds the {len(distinct)} distinct points")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        centers = distinct[rng.choice(len(distinct), size=k, replace=False)].copy()
        result = _lloyd(x, centers, max_iter)
        if best is None or result.inertia < best.inertia:
            best = result
    return best
