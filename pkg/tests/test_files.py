import numpy as np
import pytest

from immunesom import analysis, dca, files, som
from immunesom.files import CsvFormatError


def test_raw_round_trip(tmp_path, an_short):
    session, ft, fx = an_short
    files.write_raw(tmp_path / "raw.csv", session.raw)
    back = files.read_raw(tmp_path / "raw.csv")
    assert np.allclose(back.view(np.float64) if back.dtype.names is None else
                       np.array(back.tolist()), np.array(session.raw.tolist()))


def test_frames_round_trip(tmp_path, an_short):
    _, ft, fx = an_short
    files.write_frames(tmp_path / "f.csv", ft, fx)
    t2, x2 = files.read_frames(tmp_path / "f.csv")
    assert np.array_equal(ft, t2) and np.array_equal(fx, x2)


def test_antigen_round_trip(tmp_path):
    t = np.array([0, 0, 1, 3])
    pid = np.array([7, 8, 7, 8])
    files.write_antigen(tmp_path / "a.csv", t, pid, {7: "nmap", 8: "sshd"})
    t2, pid2, names = files.read_antigen(tmp_path / "a.csv")
    assert t2.tolist() == t.tolist() and pid2.tolist() == pid.tolist()
    assert names == {7: "nmap", 8: "sshd"}


def test_labels_round_trip(tmp_path):
    labels = {1: ("nmap", 1), 2: ("sshd", 0)}
    files.write_labels(tmp_path / "l.csv", labels)
    assert files.read_labels(tmp_path / "l.csv") == labels


def test_map_round_trip_is_exact(tmp_path, rng):
    m = som.SomMap(rng.uniform(0, 100, (12, 7)), 3, 4, epoch=5, trained=True)
    files.write_map(tmp_path / "m.csv", m)
    back = files.read_map(tmp_path / "m.csv")
    assert np.array_equal(back.weights, m.weights)
    assert (back.rows, back.cols, back.trained) == (3, 4, True)


def test_segments_round_trip(tmp_path):
    records = [dca.PresentedAntigenRecord(i % 3, i % 2, 0, 0, i) for i in range(25)]
    seg = analysis.segment_stream(records, 10)
    files.write_segments(tmp_path / "s.csv", seg)
    back = files.read_segments(tmp_path / "s.csv")
    assert back.partial == seg.partial and back.counts == seg.counts
    for got, want in zip(back.scores, seg.scores):
        assert got == pytest.approx(want, abs=1e-6)


def test_log_has_header_and_rows(tmp_path):
    run = dca.replay((np.arange(3), np.full((3, 4), 50.0)), (np.arange(3), np.ones(3, np.int64)),
                     dca.DcaParams(population_size=2))
    files.write_log(tmp_path / "log.csv", run)
    df = files.read_log(tmp_path / "log.csv")
    assert list(df.columns) == ["cycle", "antigen_type", "context", "o_semi", "o_mature", "forced"]
    assert len(df) == len(run)


def test_params_round_trip(tmp_path):
    p = dca.DcaParams(population_size=7, rng_seed=3, max_cycles=100)
    files.write_params(tmp_path / "p.txt", p)
    assert files.read_params(tmp_path / "p.txt", dca.DcaParams()) == p


def test_params_unknown_key(tmp_path):
    (tmp_path / "p.txt").write_text("population_size = 5\nbogus = 1\n")
    with pytest.raises(Exception, match="bogus"):
        files.read_params(tmp_path / "p.txt", dca.DcaParams())


def test_corrupted_csv_names_line(tmp_path):
    path = tmp_path / "f.csv"
    files.write_frames(path, np.arange(3), np.zeros((3, 7)))
    lines = path.read_text().splitlines()
    lines[2] = lines[2].replace("0", "zero", 1)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CsvFormatError, match="line 3"):
        files.read_frames(path)


def test_manifest_round_trip(tmp_path):
    files.write_manifest(tmp_path, {"seed": 1, "created": "now"})
    assert files.read_manifest(tmp_path)["seed"] == 1
