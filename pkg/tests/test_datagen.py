import numpy as np
import pytest

from immunesom import datagen, signals
from immunesom.errors import ConfigError


def test_same_seed_same_stream():
    cfg = datagen.ScenarioConfig.pn(rng_seed=4, duration=120)
    a, b = datagen.generate_session(cfg), datagen.generate_session(cfg)
    assert np.array_equal(a.raw, b.raw)
    assert np.array_equal(a.antigen_t, b.antigen_t) and np.array_equal(a.antigen_pid, b.antigen_pid)


def test_different_seed_differs():
    a = datagen.generate_session(datagen.ScenarioConfig.pn(rng_seed=1, duration=120))
    b = datagen.generate_session(datagen.ScenarioConfig.pn(rng_seed=2, duration=120))
    assert not np.array_equal(a.raw, b.raw)


def test_frames_satisfy_invariants(an_short):
    session, ft, fx = an_short
    assert len(ft) == session.config.duration
    assert fx[:, :6].min() >= 0 and fx[:, :6].max() <= 100
    assert set(np.unique(fx[:, 6])) <= {0.0, 1.0}


def test_raw_invariants(an_short):
    session, *_ = an_short
    for s in session.samples()[:50]:
        assert s.all_pkts_per_sec >= s.tcp_pkts_per_sec >= 0


def test_antigen_sorted_and_labelled(an_short):
    session, *_ = an_short
    assert np.all(np.diff(session.antigen_t) >= 0)
    assert set(np.unique(session.antigen_pid)) <= set(session.labels)
    assert session.pid_of("nmap") == 2311


def test_an_scan_window_scales_with_duration():
    cfg = datagen.ScenarioConfig.an(duration=700)
    assert cfg.scan_start < cfg.scan_end <= 700
    assert cfg.scan_start == pytest.approx(65, abs=1)


def test_nmap_quiet_before_scan():
    s = datagen.generate_session(datagen.ScenarioConfig.an(rng_seed=0, duration=700))
    pre = s.antigen_t < s.config.scan_start
    assert np.sum(s.antigen_pid[pre] == 2311) == 0


def test_scan_raises_danger_signals():
    s = datagen.generate_session(datagen.ScenarioConfig.pn(rng_seed=0, duration=700))
    _, fx = signals.frames_to_array(signals.normalize_session(s.samples()))
    scan = s.scan_mask
    assert fx[scan, 0].mean() > fx[~scan, 0].mean()
    assert fx[scan, 2].mean() > fx[~scan, 2].mean()


def test_antigen_scale():
    full = datagen.generate_session(datagen.ScenarioConfig.pn(rng_seed=0, duration=100))
    half = datagen.generate_session(datagen.ScenarioConfig.pn(rng_seed=0, duration=100, antigen_scale=0.5))
    assert 0.4 < len(half.antigen_t) / len(full.antigen_t) < 0.6


def test_training_corpus():
    corpus = datagen.training_corpus(2, seed=0, duration=60)
    assert len(corpus) == 2 and all(len(c) == 60 for c in corpus)


@pytest.mark.parametrize("kwargs", [{"kind": "XX"}, {"duration": 0}, {"scan_start": 10, "scan_duration": 100, "duration": 50}])
def test_bad_config(kwargs):
    with pytest.raises(ConfigError):
        datagen.ScenarioConfig(**kwargs)
