"""Seeded synthetic SYN-scan sessions.

A session is a per-second raw telemetry table, a stream of (second, pid)
antigen events (one per system call) and per-process ground truth. Two
scenario shapes are provided:

* ``PN`` (passive normal): the scan and its shell dominate antigen, a
  locally run browser only perturbs the network signals;
* ``AN`` (active normal): the same scan overlaps a remotely driven browser
  whose parent and two children emit antigen throughout.

Scan activity follows an intensity curve in ``[0, 1]``: three full-strength
spikes (probe burst, targeted scanning, teardown) on top of alternating
scanning and timeout-wait phases. nmap's syscall rate tracks that intensity.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .signals import RawSample

RAW_COLUMNS = ("t", "icmp_du", "rst", "pkts", "tcp_pkts", "all_pkts", "pkt_roc", "avg_size", "root")

RAW_DTYPE = np.dtype([
    ("t", np.int64), ("icmp_du", np.float64), ("rst", np.float64), ("pkts", np.float64),
    ("tcp_pkts", np.float64), ("all_pkts", np.float64), ("pkt_roc", np.float64),
    ("avg_size", np.float64), ("root", np.int8),
])

ANOMALOUS = 1
NORMAL = 0

SCAN_PACKET_BYTES = 40.0
HOSTS_TOTAL = 254
HOSTS_AVAILABLE = 70


@dataclass(frozen=True)
class ProcessModel:
    """Per-second syscall rate model for one process.

    Rates are log-normal with the given median and log-scale spread.
    ``driver`` names what modulates the rate: ``"scan"`` (scan intensity),
    ``"browse"`` (browser activity), ``"interactive"`` (shell use outside
    the scan) or ``"constant"``.
    """

    name: str
    pid: int
    median_rate: float
    log_sd: float
    driver: str = "constant"
    share: float = 1.0
    idle_rate: float = 0.0
    label: int = NORMAL
    active_window: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.median_rate < 0 or self.idle_rate < 0 or self.log_sd < 0:
            raise ConfigError(f"process {self.name}: rates must be >= 0")


def _lognormal_sd_from_quartiles(q1: float, q3: float) -> float:
    return float(np.log(q3 / q1) / (2 * 0.6744897501960817))


# nmap: log-normal matched to the median and inter-quartile range of its
# observed syscall frequency (median 2106, quartiles 1796 / 2894).
NMAP_MEDIAN = 2106.0
NMAP_LOG_SD = _lognormal_sd_from_quartiles(1796.0, 2894.0)
# firefox family: activity-gated, overall mean near 880 calls/s.
FIREFOX_ACTIVE_MEDIAN = 1400.0
FIREFOX_LOG_SD = 0.5


def default_processes(kind: str) -> tuple[ProcessModel, ...]:
    nmap = ProcessModel("nmap", 2311, NMAP_MEDIAN, NMAP_LOG_SD, "scan", label=ANOMALOUS)
    pts = ProcessModel("pts", 2290, 40.0, 0.4, "scan", idle_rate=0.5, label=ANOMALOUS)
    sshd = ProcessModel("sshd", 2288, 5.0, 0.3, "interactive", idle_rate=0.01, label=NORMAL)
    if kind == "PN":
        return (nmap, pts, sshd)
    return (
        nmap, pts, sshd,
        ProcessModel("firefox", 3101, FIREFOX_ACTIVE_MEDIAN, FIREFOX_LOG_SD, "browse",
                     share=0.30, idle_rate=40.0, label=NORMAL),
        ProcessModel("firefox_child1", 3102, FIREFOX_ACTIVE_MEDIAN, FIREFOX_LOG_SD, "browse",
                     share=0.45, idle_rate=40.0, label=NORMAL),
        ProcessModel("firefox_child2", 3103, FIREFOX_ACTIVE_MEDIAN, FIREFOX_LOG_SD, "browse",
                     share=0.25, idle_rate=40.0, label=NORMAL),
    )


@dataclass(frozen=True)
class TrafficModel:
    """Amplitudes of the synthetic traffic. Generator knobs, not measurements."""

    du_per_intensity: float = 20.0
    rst_per_intensity: float = 120.0
    probes_per_intensity: float = 300.0
    probe_burstiness: float = 0.6
    replies_per_intensity: float = 20.0
    browse_on_mean_s: float = 90.0
    browse_off_mean_s: float = 90.0
    browse_sent_median: float = 900.0
    browse_recv_ratio: float = 1.3
    browse_tcp_share: float = 0.95
    browse_rst_rate: float = 1.0
    browse_packet_bytes: float = 80.0
    idle_sent_median: float = 8.0
    background_rate: float = 5.0
    background_tcp_share: float = 0.3
    scan_active_mean_s: float = 40.0
    scan_wait_mean_s: float = 20.0
    spike_fraction: float = 0.03


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str = "AN"
    duration: int = 7000
    scan_start: int = 651
    scan_duration: int = 4584
    processes: tuple[ProcessModel, ...] = ()
    rng_seed: int = 0
    antigen_scale: float = 1.0
    browse_amplitude: float = 1.0
    traffic: TrafficModel = field(default_factory=TrafficModel)

    def __post_init__(self) -> None:
        if self.kind not in ("PN", "AN", "NORMAL"):
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        if self.duration <= 0:
            raise ConfigError("duration must be > 0")
        if self.scan_duration < 0 or self.scan_start < 0:
            raise ConfigError("scan window must be non-negative")
        if self.scan_duration and self.scan_start + self.scan_duration > self.duration:
            raise ConfigError("scan window must lie inside the session")
        if self.antigen_scale < 0:
            raise ConfigError("antigen_scale must be >= 0")
        if not self.processes:
            object.__setattr__(self, "processes", default_processes(self.kind))

    @property
    def scan_end(self) -> int:
        return self.scan_start + self.scan_duration

    @classmethod
    def an(cls, rng_seed: int = 0, duration: int = 7000, **kwargs) -> "ScenarioConfig":
        """Active normal: scan from second 651 to 5235 of 7000, browser in use throughout."""
        f = duration / 7000.0
        return cls("AN", duration, int(round(651 * f)), int(round(4584 * f)),
                   rng_seed=rng_seed, **kwargs)

    @classmethod
    def pn(cls, rng_seed: int = 0, duration: int = 7000, **kwargs) -> "ScenarioConfig":
        """Passive normal: scan from second 60 to 5500 of 7000, light local browsing."""
        f = duration / 7000.0
        kwargs.setdefault("browse_amplitude", 0.25)
        return cls("PN", duration, int(round(60 * f)), int(round(5440 * f)),
                   rng_seed=rng_seed, **kwargs)

    @classmethod
    def normal(cls, rng_seed: int = 0, duration: int = 3600, **kwargs) -> "ScenarioConfig":
        """Scan-free session of ordinary use, signals only."""
        return cls("NORMAL", duration, 0, 0, processes=(), rng_seed=rng_seed, **kwargs)

    @classmethod
    def for_kind(cls, kind: str, rng_seed: int = 0, duration: int = 7000, **kwargs) -> "ScenarioConfig":
        builders = {"AN": cls.an, "PN": cls.pn, "NORMAL": cls.normal}
        try:
            return builders[kind.upper()](rng_seed=rng_seed, duration=duration, **kwargs)
        except KeyError:
            raise ConfigError(f"unknown scenario {kind!r}") from None


@dataclass
class Session:
    config: ScenarioConfig
    raw: np.ndarray  # RAW_DTYPE records, one per second
    antigen_t: np.ndarray
    antigen_pid: np.ndarray
    labels: dict[int, tuple[str, int]]
    scan_intensity: np.ndarray
    browsing: np.ndarray

    @property
    def scan_mask(self) -> np.ndarray:
        t = self.raw["t"]
        return (t >= self.config.scan_start) & (t < self.config.scan_end)

    def samples(self) -> list[RawSample]:
        return raw_to_samples(self.raw)

    def pid_of(self, name: str) -> int:
        for pid, (n, _) in self.labels.items():
            if n == name:
                return pid
        raise KeyError(name)


def raw_to_samples(raw: np.ndarray) -> list[RawSample]:
    return [
        RawSample(int(r["t"]), float(r["icmp_du"]), float(r["rst"]), float(r["pkts"]),
                  float(r["tcp_pkts"]), float(r["all_pkts"]), float(r["pkt_roc"]),
                  float(r["avg_size"]), bool(r["root"]))
        for r in raw
    ]


def _alternating(rng, n: int, on_mean: float, off_mean: float, start_on: bool) -> np.ndarray:
    state = np.zeros(n, dtype=bool)
    t = 0
    on = start_on
    while t < n:
        length = max(1, int(round(rng.exponential(on_mean if on else off_mean))))
        state[t:t + length] = on
        t += length
        on = not on
    return state


def _scan_intensity(rng, cfg: ScenarioConfig) -> np.ndarray:
    s = np.zeros(cfg.duration)
    if cfg.scan_duration == 0:
        return s
    tm = cfg.traffic
    n = cfg.scan_duration
    active = _alternating(rng, n, tm.scan_active_mean_s, tm.scan_wait_mean_s, True)
    level = np.where(active, rng.uniform(0.5, 1.0, n), rng.uniform(0.05, 0.25, n))
    # hold the level within each phase
    change = np.flatnonzero(np.diff(active.astype(np.int8)) != 0) + 1
    starts = np.concatenate(([0], change))
    for a, b in zip(starts, np.append(starts[1:], n)):
        level[a:b] = level[a]
    spike = max(1, int(round(tm.spike_fraction * n)))
    mid = n // 2 - spike // 2
    level[:spike] = 1.0
    level[mid:mid + spike] = 1.0
    level[n - spike:] = 1.0
    s[cfg.scan_start:cfg.scan_end] = level
    return s


def _raw_signals(rng, cfg: ScenarioConfig, s: np.ndarray, browsing: np.ndarray) -> np.ndarray:
    tm = cfg.traffic
    n = cfg.duration
    amp = cfg.browse_amplitude
    scanning = s > 0

    du = rng.poisson(s * tm.du_per_intensity).astype(float)
    # unsolicited ICMP errors are rare and small outside a scan
    du = np.where(scanning, du, np.minimum(rng.poisson(0.05, n), 2))
    rst = rng.poisson(s * tm.rst_per_intensity + tm.browse_rst_rate * amp * browsing).astype(float)
    # nmap sends in bursts, so its packet rate swings from second to second
    probes = rng.poisson(s * tm.probes_per_intensity
                         * rng.lognormal(-tm.probe_burstiness ** 2 / 2, tm.probe_burstiness, n)).astype(float)
    replies = rng.poisson(s * tm.replies_per_intensity).astype(float)

    browse_sent = np.where(
        browsing,
        amp * tm.browse_sent_median * rng.lognormal(0.0, 0.4, n),
        tm.idle_sent_median * rng.lognormal(0.0, 0.5, n),
    )
    browse_sent = np.round(browse_sent)
    browse_recv = np.round(browse_sent * tm.browse_recv_ratio)
    bg_sent = rng.poisson(tm.background_rate, n).astype(float)
    bg_recv = rng.poisson(tm.background_rate, n).astype(float)

    pkts = probes + browse_sent + bg_sent
    browse_total = browse_sent + browse_recv
    bg_total = bg_sent + bg_recv
    tcp = probes + replies + rst + np.round(tm.browse_tcp_share * browse_total) + np.round(
        tm.background_tcp_share * bg_total)
    all_pkts = probes + replies + rst + du + browse_total + bg_total
    tcp = np.minimum(tcp, all_pkts)

    # /proc exposes a 2 s moving average of the sending-rate change
    delta = np.abs(np.diff(pkts, prepend=pkts[0]))
    roc = np.convolve(delta, [0.5, 0.5])[:n]
    roc[0] = delta[0]

    browse_bytes = tm.browse_packet_bytes * rng.lognormal(0.0, 0.08, n)
    small = probes + replies + rst + du
    size_total = small * SCAN_PACKET_BYTES + (browse_total + bg_total) * browse_bytes
    avg_size = np.where(all_pkts > 0, size_total / np.maximum(all_pkts, 1), 0.0)

    root = np.zeros(n, dtype=np.int8)
    if cfg.scan_duration:
        root[max(0, cfg.scan_start - 30):min(n, cfg.scan_end + 30)] = 1

    raw = np.zeros(n, dtype=RAW_DTYPE)
    raw["t"] = np.arange(n)
    raw["icmp_du"] = du
    raw["rst"] = rst
    raw["pkts"] = pkts
    raw["tcp_pkts"] = tcp
    raw["all_pkts"] = all_pkts
    # six decimals so a CSV round trip reproduces the values exactly
    raw["pkt_roc"] = np.round(roc, 6)
    raw["avg_size"] = np.round(avg_size, 6)
    raw["root"] = root
    return raw


def _antigen_counts(rng, cfg: ScenarioConfig, s: np.ndarray, browsing: np.ndarray) -> dict[int, np.ndarray]:
    n = cfg.duration
    scan_mask = s > 0
    mean_drive = float(s[scan_mask].mean()) if scan_mask.any() else 1.0
    interactive = np.ones(n, dtype=bool)
    interactive[scan_mask] = False
    counts: dict[int, np.ndarray] = {}
    for proc in cfg.processes:
        base = proc.median_rate * rng.lognormal(0.0, proc.log_sd, n) if proc.log_sd else np.full(
            n, proc.median_rate)
        if proc.driver == "scan":
            drive = np.where(scan_mask, (0.1 + 0.9 * s) / (0.1 + 0.9 * mean_drive), 0.0)
            rate = base * drive + proc.idle_rate * ~scan_mask
        elif proc.driver == "browse":
            idle = proc.idle_rate * rng.lognormal(0.0, 0.8, n)
            rate = proc.share * np.where(browsing, base, idle)
        elif proc.driver == "interactive":
            rate = np.where(interactive, base, proc.idle_rate)
        else:
            rate = base
        if proc.active_window is not None:
            lo, hi = proc.active_window
            window = np.zeros(n, dtype=bool)
            window[lo:hi] = True
            rate = np.where(window, rate, 0.0)
        counts[proc.pid] = rng.poisson(rate * cfg.antigen_scale)
    return counts


def _interleave(rng, counts: dict[int, np.ndarray], n: int) -> tuple[np.ndarray, np.ndarray]:
    pids = np.array(sorted(counts), dtype=np.int64)
    if len(pids) == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    mat = np.stack([counts[p] for p in pids], axis=1)  # (n, n_pids)
    per_second = mat.sum(axis=1)
    total = int(per_second.sum())
    t = np.repeat(np.arange(n, dtype=np.int64), per_second)
    pid = np.repeat(np.tile(pids, n), mat.ravel())
    # shuffle within each second: sort by (second, random key)
    key = rng.random(total)
    order = np.lexsort((key, t))
    return t[order], pid[order]


def generate_session(config: ScenarioConfig) -> Session:
    """Raw telemetry, antigen events and ground truth for one scenario."""
    rng = np.random.default_rng(config.rng_seed)
    tm = config.traffic
    s = _scan_intensity(rng, config)
    browsing = _alternating(rng, config.duration, tm.browse_on_mean_s, tm.browse_off_mean_s,
                            bool(rng.integers(0, 2)))
    raw = _raw_signals(rng, config, s, browsing)
    counts = _antigen_counts(rng, config, s, browsing)
    t, pid = _interleave(rng, counts, config.duration)
    labels = {p.pid: (p.name, p.label) for p in config.processes}
    return Session(config, raw, t, pid, labels, s, browsing)


def training_corpus(n_sessions: int = 10, seed: int = 0, duration: int = 3600) -> list[np.ndarray]:
    """Raw tables of ``n_sessions`` scan-free sessions (signals only)."""
    if n_sessions < 1:
        raise ConfigError("n_sessions must be >= 1")
    out = []
    for i in range(n_sessions):
        # vary how heavily the network is used from session to session
        amp = float(np.random.default_rng([seed, i]).uniform(0.5, 1.5))
        cfg = ScenarioConfig.normal(rng_seed=seed * 1000 + i, duration=duration, browse_amplitude=amp)
        out.append(generate_session(cfg).raw)
    return out
