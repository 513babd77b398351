"""Raw host telemetry to the seven normalized detector signals.

Signal layout of a frame, in order: PAMP-1 (ICMP destination-unreachable
rate), PAMP-2 (RST rate), DS-1 (packets sent), DS-2 (TCP share of all
packets), SS-1 (inverted packet-rate change), SS-2 (60 s mean packet size)
and the binary inflammation flag (remote root login).
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import InputDomainError, SequencingError

SIGNAL_NAMES = ("pamp1", "pamp2", "ds1", "ds2", "ss1", "ss2", "inflammation")
SS2_WINDOW = 60

# (upper bound of band, signal value); bands are (prev, upper].
_SS2_BANDS = ((45.0, 0.0), (50.0, 10.0), (60.0, 50.0))


def _check_nonneg(name: str, value: float) -> float:
    value = float(value)
    if not value >= 0.0:  # also rejects NaN
        raise InputDomainError(f"{name} must be >= 0, got {value!r}")
    return value


def normalize_pamp1(raw: float) -> float:
    """ICMP destination-unreachable errors per second, x5 and capped at 100."""
    raw = _check_nonneg("icmp_du", raw)
    return min(100.0, raw * 5.0)


def normalize_pamp2(raw: float) -> float:
    raw = _check_nonneg("rst", raw)
    return min(100.0, raw)


def normalize_ds1(raw: float) -> float:
    """Base-2 sigmoid over packets sent per second, centred on 750 pkt/s.

    Inputs past 1500 pkt/s are accepted; the output saturates towards 100.
    """
    raw = _check_nonneg("pkts", raw)
    return min(100.0 / (1.0 + 2.0 ** (7.5 - raw / 100.0)), 100.0)


def normalize_ds2(tcp: float, all_pkts: float) -> float:
    tcp = _check_nonneg("tcp_pkts", tcp)
    all_pkts = _check_nonneg("all_pkts", all_pkts)
    if tcp > all_pkts:
        raise InputDomainError(f"tcp_pkts ({tcp}) exceeds all_pkts ({all_pkts})")
    if all_pkts == 0.0:
        return 0.0
    return tcp / all_pkts * 100.0


def normalize_ss1(raw: float) -> float:
    """Inverted packet-rate change: 100 at raw <= 10, 0 at raw >= 100."""
    raw = _check_nonneg("pkt_roc", raw)
    return min(100.0, max(0.0, (100.0 - raw) * 10.0 / 9.0))


def ss2_step(mean_size: float) -> float:
    """Step map of a mean packet size (bytes) onto {0, 10, 50, 100}."""
    for upper, value in _SS2_BANDS:
        if mean_size <= upper:
            return value
    return 100.0


@dataclass
class Ss2State:
    """Trailing window of per-second average packet sizes."""

    window_len: int = SS2_WINDOW
    window: deque = field(default_factory=deque)

    def __post_init__(self) -> None:
        if self.window_len < 1:
            raise ValueError("window_len must be >= 1")
        self.window = deque(self.window, maxlen=self.window_len)

    def push(self, value: float) -> float:
        self.window.append(float(value))
        return math.fsum(self.window) / len(self.window)

    def copy(self) -> "Ss2State":
        return Ss2State(self.window_len, deque(self.window))


def normalize_ss2(state: Ss2State, avg_pkt_size: float) -> float:
    avg_pkt_size = _check_nonneg("avg_size", avg_pkt_size)
    return ss2_step(state.push(avg_pkt_size))


def inflammation_signal(root_login_active: bool) -> int:
    return 1 if root_login_active else 0


@dataclass(frozen=True)
class RawSample:
    timestamp: int
    icmp_du_per_sec: float
    rst_per_sec: float
    pkts_sent_per_sec: float
    tcp_pkts_per_sec: float
    all_pkts_per_sec: float
    pkt_rate_of_change: float
    avg_pkt_size_bytes: float
    root_login_active: bool


@dataclass(frozen=True)
class NormalizedSignalFrame:
    timestamp: int
    pamp1: float
    pamp2: float
    ds1: float
    ds2: float
    ss1: float
    ss2: float
    inflammation: int

    def as_tuple(self) -> tuple:
        return (self.pamp1, self.pamp2, self.ds1, self.ds2, self.ss1, self.ss2, self.inflammation)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)


def build_frame(sample: RawSample, state: Ss2State) -> NormalizedSignalFrame:
    """Apply all seven normalizers to one sample. Mutates ``state``."""
    pamp1 = normalize_pamp1(sample.icmp_du_per_sec)
    pamp2 = normalize_pamp2(sample.rst_per_sec)
    ds1 = normalize_ds1(sample.pkts_sent_per_sec)
    ds2 = normalize_ds2(sample.tcp_pkts_per_sec, sample.all_pkts_per_sec)
    ss1 = normalize_ss1(sample.pkt_rate_of_change)
    ss2 = normalize_ss2(state, sample.avg_pkt_size_bytes)
    return NormalizedSignalFrame(
        int(sample.timestamp), pamp1, pamp2, ds1, ds2, ss1, ss2,
        inflammation_signal(sample.root_login_active),
    )


class SignalPipeline:
    """Stateful per-session normalizer; enforces increasing timestamps.

    One instance per session, driven from a single thread.
    """

    def __init__(self, window_len: int = SS2_WINDOW):
        self.state = Ss2State(window_len)
        self._last_t: int | None = None

    def push(self, sample: RawSample) -> NormalizedSignalFrame:
        if self._last_t is not None and sample.timestamp <= self._last_t:
            raise SequencingError(
                f"timestamp {sample.timestamp} does not follow {self._last_t}"
            )
        frame = build_frame(sample, self.state)
        self._last_t = sample.timestamp
        return frame

    def run(self, samples: Iterable[RawSample]) -> Iterator[NormalizedSignalFrame]:
        for sample in samples:
            yield self.push(sample)


def normalize_session(samples: Iterable[RawSample]) -> list[NormalizedSignalFrame]:
    return list(SignalPipeline().run(samples))


def frames_to_array(frames: Iterable[NormalizedSignalFrame]) -> tuple[np.ndarray, np.ndarray]:
    """Split frames into a timestamp vector and an ``(n, 7)`` signal matrix."""
    frames = list(frames)
    t = np.array([f.timestamp for f in frames], dtype=np.int64)
    x = np.array([f.as_tuple() for f in frames], dtype=np.float64).reshape(len(frames), 7)
    return t, x


def array_to_frames(t: np.ndarray, x: np.ndarray) -> list[NormalizedSignalFrame]:
    return [
        NormalizedSignalFrame(int(ti), *map(float, row[:6]), int(row[6]))
        for ti, row in zip(t, x)
    ]
