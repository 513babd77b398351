"""CSV and text formats read and written by the command line tools."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import pandas as pd

from .analysis import SegmentSeries
from .datagen import RAW_COLUMNS, RAW_DTYPE
from .dca import DcaRun
from .errors import ImmuneSomError
from .som import SomMap

FRAME_COLUMNS = ("t", "pamp1", "pamp2", "ds1", "ds2", "ss1", "ss2", "infl")
ANTIGEN_COLUMNS = ("t", "pid", "name")
LABEL_COLUMNS = ("pid", "name", "label")
LOG_COLUMNS = ("cycle", "antigen_type", "context", "o_semi", "o_mature", "forced")
SEGMENT_COLUMNS = ("segment_index", "antigen_type", "score", "count", "partial")


class CsvFormatError(ImmuneSomError):
    def __init__(self, path, line: int | None, message: str):
        where = f"{path}, line {line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def _read_numeric(path, columns: tuple[str, ...], text_columns: tuple[str, ...] = ()) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.ParserError as exc:
        raise CsvFormatError(path, None, str(exc)) from exc
    except pd.errors.EmptyDataError as exc:
        raise CsvFormatError(path, 1, "empty file") from exc
    if tuple(df.columns) != columns:
        raise CsvFormatError(path, 1, f"expected header {','.join(columns)}, got {','.join(df.columns)}")
    out = pd.DataFrame(index=df.index)
    for col in columns:
        if col in text_columns:
            out[col] = df[col]
            continue
        try:
            # numpy's string conversion is correctly rounded, unlike the fast path of to_numeric
            out[col] = df[col].to_numpy().astype(np.float64)
        except ValueError:
            bad = pd.to_numeric(df[col], errors="coerce").isna().to_numpy()
            row = int(np.flatnonzero(bad)[0]) if bad.any() else 0
            raise CsvFormatError(path, row + 2, f"column {col!r}: cannot parse {df[col].iloc[row]!r}") from None
    return out


def write_raw(path, raw: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(RAW_COLUMNS) + "\n")
        for r in raw:
            fh.write(
                f"{int(r['t'])},{r['icmp_du']:.0f},{r['rst']:.0f},{r['pkts']:.0f},"
                f"{r['tcp_pkts']:.0f},{r['all_pkts']:.0f},{r['pkt_roc']:.6f},"
                f"{r['avg_size']:.6f},{int(r['root'])}\n"
            )


def read_raw(path) -> np.ndarray:
    df = _read_numeric(path, RAW_COLUMNS)
    raw = np.zeros(len(df), dtype=RAW_DTYPE)
    for col in RAW_COLUMNS:
        raw[col] = df[col].to_numpy()
    return raw


def write_frames(path, t: np.ndarray, x: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(FRAME_COLUMNS) + "\n")
        for ti, row in zip(t, x):
            fh.write(f"{int(ti)}," + ",".join(repr(float(v)) for v in row[:6]) + f",{int(row[6])}\n")


def read_frames(path) -> tuple[np.ndarray, np.ndarray]:
    df = _read_numeric(path, FRAME_COLUMNS)
    return df["t"].to_numpy(np.int64), df[list(FRAME_COLUMNS[1:])].to_numpy(np.float64)


def write_antigen(path, t: np.ndarray, pid: np.ndarray, names: dict[int, str]) -> None:
    name_of = np.vectorize(lambda p: names.get(int(p), str(p)), otypes=[object])
    uniq, inv = np.unique(pid, return_inverse=True)
    df = pd.DataFrame({"t": t, "pid": pid, "name": name_of(uniq)[inv] if len(uniq) else []})
    df.to_csv(path, index=False, lineterminator="\n")


def read_antigen(path) -> tuple[np.ndarray, np.ndarray, dict[int, str]]:
    df = _read_numeric(path, ANTIGEN_COLUMNS, text_columns=("name",))
    t = df["t"].to_numpy(np.int64)
    pid = df["pid"].to_numpy(np.int64)
    first = df.drop_duplicates("pid")
    return t, pid, {int(p): str(n) for p, n in zip(first["pid"], first["name"])}


def write_labels(path, labels: dict[int, tuple[str, int]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_COLUMNS)
        for pid in sorted(labels):
            name, label = labels[pid]
            w.writerow([pid, name, label])


def read_labels(path) -> dict[int, tuple[str, int]]:
    df = _read_numeric(path, LABEL_COLUMNS, text_columns=("name",))
    return {int(p): (str(n), int(l)) for p, n, l in zip(df["pid"], df["name"], df["label"])}


def write_log(path, run: DcaRun) -> None:
    df = pd.DataFrame({
        "cycle": run.cycle, "antigen_type": run.antigen_type, "context": run.context,
        "o_semi": run.o_semi, "o_mature": run.o_mature, "forced": run.forced,
    })
    df.to_csv(path, index=False, lineterminator="\n", float_format="%.6f")


def read_log(path) -> pd.DataFrame:
    return _read_numeric(path, LOG_COLUMNS)


def write_segments(path, series: SegmentSeries) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SEGMENT_COLUMNS) + "\n")
        for i, t, score, count, partial in series.rows():
            fh.write(f"{i},{t},{score:.6f},{count},{int(partial)}\n")


def read_segments(path, z: int = 0, kind: str = "") -> SegmentSeries:
    df = _read_numeric(path, SEGMENT_COLUMNS)
    n = int(df["segment_index"].max()) + 1 if len(df) else 0
    out = SegmentSeries(z, kind, [dict() for _ in range(n)], [dict() for _ in range(n)],
                        [False] * n, [(0, 0)] * n)
    for i, t, s, c, p in df.itertuples(index=False):
        out.scores[int(i)][int(t)] = float(s)
        out.counts[int(i)][int(t)] = int(c)
        out.partial[int(i)] = out.partial[int(i)] or bool(p)
    return out


def write_map(path, som: SomMap) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("row,col," + ",".join(f"w{k}" for k in range(som.dim)) + "\n")
        for (r, c), w in zip(som.locations, som.weights):
            fh.write(f"{r},{c}," + ",".join(repr(float(v)) for v in w) + "\n")


def read_map(path) -> SomMap:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[:2] != ["row", "col"] or len(header) < 3:
        raise CsvFormatError(path, 1, "expected header row,col,w0..")
    df = _read_numeric(path, tuple(header))
    rows = int(df["row"].max()) + 1
    cols = int(df["col"].max()) + 1
    if len(df) != rows * cols:
        raise CsvFormatError(path, None, f"incomplete grid: {len(df)} nodes for {rows}x{cols}")
    df = df.sort_values(["row", "col"])
    return SomMap(df[header[2:]].to_numpy(np.float64), rows, cols, trained=True)


def write_umatrix(path, umat: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("row,col,u\n")
        for (r, c), v in np.ndenumerate(umat):
            fh.write(f"{r},{c},{v:.6f}\n")


def _coerce(value: str, target: Any):
    if value.lower() in ("none", ""):
        return None
    if isinstance(target, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(target, int):
        return int(value)
    if isinstance(target, float):
        return float(value)
    return value


def read_params(path, defaults):
    """Override a params dataclass from a flat ``key=value`` file (``#`` comments)."""
    names = {f.name: f for f in dataclasses.fields(defaults)}
    updates = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CsvFormatError(path, lineno, f"expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in names:
                raise CsvFormatError(path, lineno, f"unknown parameter {key!r}")
            current = getattr(defaults, key)
            try:
                updates[key] = _coerce(value, current if current is not None else 0)
            except ValueError as exc:
                raise CsvFormatError(path, lineno, f"bad value for {key}: {value!r}") from exc
    return dataclasses.replace(defaults, **updates)


def write_params(path, params) -> None:
    with open(path, "w") as fh:
        for f in dataclasses.fields(params):
            fh.write(f"{f.name}={getattr(params, f.name)}\n")


MANIFEST_NAME = "manifest.json"


def write_manifest(out_dir, manifest: dict) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def read_manifest(out_dir) -> dict:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.exists():
        return {}
    with open(path) as fh:
        return json.load(fh)


def output_digest(out_dir) -> dict[str, str]:
    """SHA-256 of every file in ``out_dir``; the manifest is hashed without its
    ``created`` timestamp."""
    digests = {}
    for path in sorted(Path(out_dir).iterdir()):
        if not path.is_file():
            continue
        if path.name == MANIFEST_NAME:
            manifest = read_manifest(out_dir)
            manifest.pop("created", None)
            data = json.dumps(manifest, sort_keys=True).encode()
        else:
            data = path.read_bytes()
        digests[path.name] = hashlib.sha256(data).hexdigest()
    return digests
