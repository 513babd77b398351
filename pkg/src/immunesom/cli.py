"""Command line entry point: ``immunesom <subcommand> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, datagen, dca, files, signals, som, stats
from .errors import ImmuneSomError

log = logging.getLogger("immunesom")

DCA_Z = (100, 1_000, 10_000, 100_000, 1_000_000)
SOM_Z = (1_800, 18_000, 180_000, 1_800_000)

RAW_FILE = "raw.csv"
ANTIGEN_FILE = "antigen.csv"
LABELS_FILE = "labels.csv"


class UsageError(ImmuneSomError):
    pass


def _default_seed() -> int:
    env = os.environ.get("IMMUNESOM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"IMMUNESOM_SEED must be an integer, got {env!r}") from None


def _manifest(args: argparse.Namespace, **extra) -> dict:
    recorded = {k: v for k, v in vars(args).items() if k != "func"}
    return {
        "subcommand": args.command,
        "arguments": recorded,
        "seed": args.seed,
        "version": __version__,
        # excluded from reproducibility hashing
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        **extra,
    }


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_session(session_dir):
    """Raw table, antigen arrays, pid names, labels and manifest of a session directory."""
    d = Path(session_dir)
    for name in (RAW_FILE, ANTIGEN_FILE, LABELS_FILE):
        if not (d / name).exists():
            raise ImmuneSomError(f"session file missing: {d / name}")
    raw = files.read_raw(d / RAW_FILE)
    t, pid, names = files.read_antigen(d / ANTIGEN_FILE)
    labels = files.read_labels(d / LABELS_FILE)
    return raw, t, pid, names, labels, files.read_manifest(d)


def session_frames(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    frames = signals.normalize_session(datagen.raw_to_samples(raw))
    return signals.frames_to_array(frames)


def cmd_generate(args) -> int:
    kind = args.scenario.upper()
    kwargs = {"antigen_scale": args.antigen_scale}
    duration = args.duration or (3600 if kind == "NORMAL" else 7000)
    cfg = datagen.ScenarioConfig.for_kind(kind, rng_seed=args.seed, duration=duration, **kwargs)
    session = datagen.generate_session(cfg)
    out = _out_dir(args.out)
    files.write_raw(out / RAW_FILE, session.raw)
    names = {pid: name for pid, (name, _) in session.labels.items()}
    files.write_antigen(out / ANTIGEN_FILE, session.antigen_t, session.antigen_pid, names)
    files.write_labels(out / LABELS_FILE, session.labels)
    files.write_manifest(out, _manifest(
        args, scenario=kind, duration=cfg.duration, scan_start=cfg.scan_start,
        scan_end=cfg.scan_end, antigen_events=int(len(session.antigen_t)),
    ))
    print(f"wrote {kind} session ({cfg.duration} s, {len(session.antigen_t)} antigen) to {out}")
    return 0


def _dca_params(args) -> dca.DcaParams:
    params = dca.EXPERIMENT_PARAMS
    if args.params:
        params = files.read_params(args.params, params)
    return params


def cmd_run_dca(args) -> int:
    raw, et, epid, names, labels, _ = load_session(args.session)
    ft, fx = session_frames(raw)
    params = _dca_params(args)
    out = _out_dir(args.out)
    files.write_frames(out / "frames.csv", ft, fx)
    z_values = args.z or list(DCA_Z)
    per_z: dict[int, list[analysis.SegmentSeries]] = {z: [] for z in z_values}
    presented = []
    for run in range(args.runs):
        run_params = dataclasses.replace(params, rng_seed=args.seed + run)
        result = dca.replay((ft, fx), (et, epid), run_params)
        files.write_log(out / f"run_{run:02d}_log.csv", result)
        if args.exclude_forced:
            result = result.without_forced()
        presented.append(len(result))
        for z in z_values:
            per_z[z].append(analysis.segment_stream(result, z))
        log.info("run %d: %d presentations", run, len(result))
    for z in z_values:
        files.write_segments(out / f"segments_z{z}.csv", analysis.mean_of_runs(per_z[z]))
    files.write_params(out / "params.txt", params)
    files.write_manifest(out, _manifest(
        args, z=z_values, runs=args.runs, presented=presented,
        antigen_events=int(len(et)), couplings_hint=int(len(et)),
    ))
    print(f"{args.runs} DCA run(s), {len(z_values)} segment file(s) in {out}")
    return 0


def _som_params(args) -> som.SomParams:
    params = som.SomParams()
    if args.params:
        params = files.read_params(args.params, params)
    if getattr(args, "epochs", None):
        params = dataclasses.replace(params, epoch_limit=args.epochs)
    return params


def _corpus(args) -> np.ndarray:
    tables = []
    if args.corpus:
        for entry in args.corpus:
            p = Path(entry)
            tables.append(files.read_raw(p / RAW_FILE if p.is_dir() else p))
    else:
        tables = datagen.training_corpus(args.sessions, seed=args.seed)
    return np.vstack([session_frames(t)[1] for t in tables])


def cmd_train_som(args) -> int:
    params = _som_params(args)
    data = _corpus(args)
    out = _out_dir(args.out)
    maps = []
    for run in range(args.runs):
        run_params = dataclasses.replace(params, rng_seed=args.seed + run)
        trained = som.train(som.init_map(run_params, data.shape[1]), data, run_params)
        files.write_map(out / f"map_{run:02d}.csv", trained)
        files.write_umatrix(out / f"umatrix_{run:02d}.csv", som.u_matrix(trained))
        maps.append(f"map_{run:02d}.csv")
        log.info("map %d: quantization error %.3f", run, som.quantization_error(trained, data))
    files.write_params(out / "params.txt", params)
    files.write_manifest(out, _manifest(args, runs=args.runs, maps=maps, training_vectors=len(data)))
    print(f"trained {args.runs} map(s) on {len(data)} vectors into {out}")
    return 0


def cmd_run_som(args) -> int:
    raw, et, epid, names, labels, _ = load_session(args.session)
    ft, fx = session_frames(raw)
    if fx.shape[1] != 7:
        raise ImmuneSomError("session frames must have 7 signals")
    maps = []
    for path in args.map:
        if not Path(path).exists():
            raise ImmuneSomError(f"map file not found: {path}")
        m = files.read_map(path)
        if m.dim != fx.shape[1]:
            raise ImmuneSomError(f"map {path} has dimension {m.dim}, frames have {fx.shape[1]}")
        maps.append(m)
    couplings = analysis.couple_antigen_signals((et, epid), ft)
    z_values = list(args.z or SOM_Z)
    if args.match_dca:
        manifest = files.read_manifest(args.match_dca)
        presented = manifest.get("presented")
        if not presented:
            raise ImmuneSomError(f"no DCA manifest with presentation counts in {args.match_dca}")
        mean_presented = int(round(float(np.mean(presented))))
        z_values = [analysis.matched_som_segment_size(z, mean_presented, len(couplings))
                    for z in manifest.get("z", DCA_Z)]
    out = _out_dir(args.out)
    for z in z_values:
        per_map = [analysis.compute_mbmu(couplings, fx, m, args.threshold, z) for m in maps]
        files.write_segments(out / f"segments_z{z}.csv", analysis.mean_of_runs(per_map))
    files.write_manifest(out, _manifest(
        args, z=z_values, maps=len(maps), couplings=len(couplings), dropped=couplings.dropped,
    ))
    print(f"MBMU over {len(couplings)} couplings, {len(maps)} map(s), z={z_values} in {out}")
    return 0


def _resolve_process(process: str, labels_path) -> int:
    try:
        return int(process)
    except ValueError:
        pass
    if labels_path:
        for pid, (name, _) in files.read_labels(labels_path).items():
            if name == process:
                return pid
    raise ImmuneSomError(f"unknown process {process!r}; pass a pid or --labels")


def format_report(result_one: stats.RankTestResult, result_two: stats.RankTestResult,
                  process: int, confidence: float, a_name: str, b_name: str) -> str:
    chosen = result_two if result_one is None else result_one
    verdict = "significant" if chosen.significant(confidence) else "not significant"
    lines = [
        "Mann-Whitney U test",
        f"process: {process}",
        f"sample_a: {a_name}",
        f"sample_b: {b_name}",
        f"n1: {result_two.n1}",
        f"n2: {result_two.n2}",
        f"U: {result_two.u_statistic:.6f}",
        f"method: {result_two.method}",
        f"p_two_sided: {result_two.p_value:.6g}",
    ]
    if result_one is not None:
        lines.append(f"p_one_sided ({result_one.alternative}): {result_one.p_value:.6g}")
    lines += [
        f"sidedness: {chosen.sidedness}",
        f"confidence: {confidence:g}",
        f"verdict: {verdict}",
    ]
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    pid = _resolve_process(args.process, args.labels)
    a = files.read_segments(args.dca).series(pid)
    b = files.read_segments(args.som).series(pid)
    if len(a) == 0 or len(b) == 0:
        missing = args.dca if len(a) == 0 else args.som
        raise ImmuneSomError(f"process {pid} has no scores in {missing}")
    two = stats.mann_whitney_u(a, b, "two-sided")
    one = None if args.sidedness == "two" else stats.mann_whitney_u(a, b, args.alternative)
    report = format_report(one, two, pid, args.confidence, str(args.dca), str(args.som))
    sys.stdout.write(report)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report)
    return 0


def cmd_baseline(args) -> int:
    raw, *_, manifest = load_session(args.session)
    ft, fx = session_frames(raw)
    result = analysis.kmeans_baseline(fx, args.k, args.seed, n_init=args.n_init)
    out = _out_dir(args.out)
    with open(out / "kmeans_assignments.csv", "w") as fh:
        fh.write("t,cluster\n")
        for t, c in zip(ft, result.assignments):
            fh.write(f"{t},{c}\n")
    lines = [f"k: {args.k}", f"restarts: {args.n_init}", f"iterations: {result.iterations}",
             f"converged: {result.converged}", f"inertia: {result.inertia:.6g}"]
    lines += [f"cluster_{c}_fraction: {f:.4f}" for c, f in enumerate(result.fractions)]
    if "scan_start" in manifest:
        truth = (ft >= manifest["scan_start"]) & (ft < manifest["scan_end"])
        lines.append(f"anomalous_second_fraction: {truth.mean():.4f}")
        if args.k == 2:
            agree = np.mean((result.assignments == 1) == truth)
            lines.append(f"best_label_agreement: {max(agree, 1 - agree):.4f}")
    report = "\n".join(lines) + "\n"
    (out / "kmeans_report.txt").write_text(report)
    files.write_manifest(out, _manifest(args))
    sys.stdout.write(report)
    return 0


def _z_list(text: str) -> list[int]:
    try:
        values = [int(v.replace("_", "")) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad z list {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("z values must be positive integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="immunesom", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--seed", type=int, default=None,
                       help="base seed (default: $IMMUNESOM_SEED or 0)")
        p.set_defaults(func=func)
        return p

    p = add("generate", cmd_generate, "write a synthetic session")
    p.add_argument("--scenario", required=True, type=str.lower, choices=("an", "pn", "normal"))
    p.add_argument("--out", required=True)
    p.add_argument("--duration", type=int, default=None)
    p.add_argument("--antigen-scale", type=float, default=1.0)

    p = add("run-dca", cmd_run_dca, "replay a session through the DCA")
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--params", default=None)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--z", type=_z_list, default=None)
    p.add_argument("--exclude-forced", action="store_true")

    p = add("train-som", cmd_train_som, "train SOM map(s) on normal sessions")
    p.add_argument("--out", required=True)
    p.add_argument("--corpus", nargs="*", default=None, help="session dirs or raw CSVs")
    p.add_argument("--sessions", type=int, default=10, help="synthetic corpus size")
    p.add_argument("--params", default=None)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--epochs", type=int, default=None)

    p = add("run-som", cmd_run_som, "score a session with trained map(s)")
    p.add_argument("--session", required=True)
    p.add_argument("--map", required=True, nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--z", type=_z_list, default=None)
    p.add_argument("--threshold", type=float, default=65.0)
    p.add_argument("--match-dca", default=None,
                   help="run-dca output dir; derive z values giving equal segment counts")

    p = add("compare", cmd_compare, "Mann-Whitney test between two segment series")
    p.add_argument("--dca", required=True)
    p.add_argument("--som", required=True)
    p.add_argument("--process", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--sidedness", choices=("one", "two"), default="one")
    p.add_argument("--alternative", choices=("greater", "less"), default="greater")
    p.add_argument("--out", default=None)

    p = add("baseline", cmd_baseline, "k-means on the session's signals")
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n-init", type=int, default=10, help="seeded restarts; lowest inertia wins")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        print(f"immunesom: {exc}", file=sys.stderr)
        return 2
    except (ImmuneSomError, OSError, ValueError) as exc:
        print(f"immunesom: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
