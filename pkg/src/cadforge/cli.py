"""Command-line entry points.

Exit codes: 0 success, 1 generic failure, 2 configuration problems
(bad config file, missing directories), 3 empty execution result,
4 empty report. CADFORGE_THREADS caps internal parallelism.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .augment import AugmentConfig, diversify, expand, shorten
from .dsl import parse, print_program, validate
from .errors import (
    BudgetExhaustedError,
    CadforgeError,
    ConfigError,
    EmptyResultError,
)
from .geometry import (
    execute,
    load_cloud,
    normalize_unit_box,
    occupancy_grid,
    read_xyz,
    surface_sample,
    write_xyz,
)
from .metrics import chamfer, iou
from .persist import RunSink, atomic_write_text, load_run
from .proposer import (
    DecodingParams,
    MemoryBankProposer,
    NEUTRAL_PARAMS,
    PcfgProposer,
    RemoteProposer,
)
from .proposer.grammar import hidden_weights, sample_program
from .seeds import derive_rng, derive_seed
from .selftrain import PairSource, PipelineConfig, Target
from . import selftrain

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_EMPTY_RESULT = 3
EXIT_EMPTY_REPORT = 4

DEFAULT_POINTS = 2048
TARGET_MAX_FEATURES = 4
_GEN_RETRIES = 50

_CONFIG_KEYS = {
    "targets", "out", "proposer", "endpoint", "capacity",
    "k", "tie_tolerance", "iterations", "sample_points", "policy", "seed",
    "decoding", "augment",
}
_DECODING_KEYS = {"temperature", "top_p", "top_k", "max_tokens"}
_AUGMENT_KEYS = {"w_max", "max_expand_variants", "token_cap"}


def thread_count() -> int:
    raw = os.environ.get("CADFORGE_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("CADFORGE_THREADS must be an integer, got %r" % raw)
    return max(1, n)


def load_config(path):
    """(PipelineConfig, raw dict). Unknown keys anywhere are fatal."""
    p = Path(path)
    if not p.exists():
        raise ConfigError("config file not found: %s" % p)
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config is not valid JSON: %s" % exc)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError("unknown config keys: %s" % ", ".join(sorted(unknown)))
    for key in ("targets", "out"):
        if key not in raw:
            raise ConfigError('config is missing required key "%s"' % key)

    decoding_raw = raw.get("decoding", {})
    unknown = set(decoding_raw) - _DECODING_KEYS
    if unknown:
        raise ConfigError("unknown decoding keys: %s" % ", ".join(sorted(unknown)))
    augment_raw = raw.get("augment", {})
    unknown = set(augment_raw) - _AUGMENT_KEYS
    if unknown:
        raise ConfigError("unknown augment keys: %s" % ", ".join(sorted(unknown)))

    try:
        policy = PairSource(raw.get("policy", "ours"))
    except ValueError:
        raise ConfigError(
            "policy must be one of %s" % ", ".join(s.value for s in PairSource)
        )
    try:
        cfg = PipelineConfig(
            k=raw.get("k", 10),
            tie_tolerance=raw.get("tie_tolerance", 1e-4),
            iterations=raw.get("iterations", 6),
            sample_points=raw.get("sample_points", DEFAULT_POINTS),
            decoding=DecodingParams(**decoding_raw),
            augment=AugmentConfig(**augment_raw),
            policy=policy,
            seed=raw.get("seed", 0),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError("bad config value: %s" % exc)
    return cfg, raw


def build_proposer(raw: dict, threads: int):
    kind = raw.get("proposer", "retrieve")
    if kind == "pcfg":
        return PcfgProposer()
    if kind == "retrieve":
        capacity = raw.get("capacity", 512)
        if not isinstance(capacity, int) or capacity < 1:
            raise ConfigError("capacity must be a positive integer")
        return MemoryBankProposer(capacity=capacity)
    if kind == "remote":
        endpoint = raw.get("endpoint")
        if not endpoint:
            raise ConfigError('remote proposer needs an "endpoint"')
        return RemoteProposer(endpoint, max_in_flight=threads)
    raise ConfigError('proposer must be "pcfg", "retrieve", or "remote"')


def load_targets(targets_dir) -> list[Target]:
    d = Path(targets_dir)
    if not d.is_dir():
        raise ConfigError("targets directory not found: %s" % d)
    files = sorted(d.glob("*.xyz"))
    if not files:
        raise ConfigError("no .xyz targets in %s" % d)

    answers = {}
    answers_path = d / "answers.jsonl"
    if answers_path.exists():
        for line in answers_path.read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                answers[rec["id"]] = rec

    targets = []
    for f in files:
        cloud = read_xyz(f)
        rec = answers.get(f.stem)
        if rec is None:
            targets.append(Target(id=f.stem, cloud=cloud))
        else:
            oracle = execute(parse(rec["program"]))
            transform = (float(rec["scale"]), np.asarray(rec["offset"], dtype=np.float64))
            targets.append(Target(id=f.stem, cloud=cloud, oracle=oracle, transform=transform))
    return targets


def cmd_run(args) -> int:
    threads = thread_count()
    cfg, raw = load_config(args.config)
    out = Path(raw["out"])
    targets = load_targets(raw["targets"])

    start = 0
    dataset = None
    proposer = build_proposer(raw, threads)
    if args.resume:
        if not (out / "manifest.json").exists():
            raise ConfigError("nothing to resume: no manifest in %s" % out)
        manifest, rows, dataset_lines, pairs = load_run(out)
        if manifest.get("config") != raw:
            raise ConfigError("config does not match the manifest in %s" % out)
        start = int(manifest.get("iterations_completed", 0))
        if start >= cfg.iterations:
            print("run already complete (%d iterations)" % start)
            return EXIT_OK
        # Rebuild proposer state by replaying the persisted pairs in
        # iteration order, mirroring the original update sequence.
        by_iteration: dict[int, list] = {}
        for pair in pairs:
            by_iteration.setdefault(pair.iteration, []).append(pair)
        for it in sorted(by_iteration):
            proposer.update(by_iteration[it])
        dataset = pairs
        sink = RunSink(out, manifest, rows, dataset_lines)
    else:
        manifest = {"config": raw, "seed": cfg.seed, "targets": str(raw["targets"])}
        sink = RunSink(out, manifest)

    reports = selftrain.run(
        cfg, targets, proposer,
        sink=sink, start_iteration=start, dataset=dataset, threads=threads,
    )
    for r in reports:
        print("iteration %d: cd_mean=%.6f pairs=%d" % (r.iteration, r.cd_mean, r.pairs_emitted))
    print("report: %s" % (out / "report.csv"))
    return EXIT_OK


def cmd_gen_targets(args) -> int:
    if args.count < 1:
        raise ConfigError("--count must be at least 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hidden = hidden_weights()
    answers = []
    for i in range(args.count):
        for attempt in range(_GEN_RETRIES):
            rng = derive_rng(args.seed, "target", i, attempt)
            program = sample_program(
                hidden, NEUTRAL_PARAMS, rng, max_features=TARGET_MAX_FEATURES
            )
            sample_seed = derive_seed(args.seed, "sample", i, attempt)
            try:
                validate(program)
                cloud = surface_sample(execute(program), args.points, sample_seed)
                break
            except CadforgeError:
                continue
        else:
            raise BudgetExhaustedError("could not generate target %d" % i)
        normalized, scale, offset = normalize_unit_box(cloud)
        name = "t%04d" % i
        write_xyz(out / (name + ".xyz"), normalized)
        answers.append(json.dumps({
            "id": name,
            "program": print_program(program),
            "sample_seed": sample_seed,
            "points": args.points,
            "scale": scale,
            "offset": [float(c) for c in offset],
        }))
    atomic_write_text(out / "answers.jsonl", "".join(a + "\n" for a in answers))
    print("wrote %d targets to %s" % (args.count, out))
    return EXIT_OK


def cmd_execute(args) -> int:
    program = parse(Path(args.program).read_text())
    cloud = surface_sample(execute(program), args.points, args.seed)
    write_xyz(args.out, cloud)
    print("wrote %d points to %s" % (len(cloud), args.out))
    return EXIT_OK


def cmd_metrics(args) -> int:
    a = load_cloud(args.cloud_a)
    b = load_cloud(args.cloud_b)
    if args.normalize:
        a, _, _ = normalize_unit_box(a)
        b, _, _ = normalize_unit_box(b)
    report = chamfer(a, b)
    print("cd=%.6f" % report.value)
    print("cd_ab=%.6f" % report.direction_ab)
    print("cd_ba=%.6f" % report.direction_ba)
    if args.programs:
        oa = execute(parse(Path(args.programs[0]).read_text()))
        ob = execute(parse(Path(args.programs[1]).read_text()))
        frame = oa.bbox.join(ob.bbox)
        ga = occupancy_grid(oa, args.grid, frame=frame)
        gb = occupancy_grid(ob, args.grid, frame=frame)
        print("iou=%.3f" % iou(ga, gb))
    return EXIT_OK


def cmd_augment(args) -> int:
    program = parse(Path(args.program).read_text())
    validate(program)
    if args.mode == "expand":
        variants = [(p, None) for p in expand(program, AugmentConfig(), args.seed)]
    elif args.mode == "shorten":
        variants = [(p, None) for p in shorten(program)]
    else:
        variants = diversify(program, AugmentConfig(), args.seed, args.points)

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for i, (p, cloud) in enumerate(variants):
            (out / ("variant_%02d.dsl" % i)).write_text(print_program(p))
            if cloud is not None:
                write_xyz(out / ("variant_%02d.xyz" % i), cloud)
        print("wrote %d variants to %s" % (len(variants), out))
    else:
        for i, (p, _) in enumerate(variants):
            if i:
                print()
            sys.stdout.write(print_program(p))
        print("variants: %d" % len(variants), file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.csv)
    if not path.exists():
        raise ConfigError("report file not found: %s" % path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        print("report is empty", file=sys.stderr)
        return EXIT_EMPTY_REPORT
    header = lines[0].split(",")
    from .persist import CSV_COLUMNS

    if header != CSV_COLUMNS:
        raise CadforgeError("malformed report header in %s" % path)
    rows = []
    for ln in lines[1:]:
        fields = ln.split(",")
        if len(fields) != len(CSV_COLUMNS):
            raise CadforgeError("malformed report row: %r" % ln)
        rows.append(dict(zip(CSV_COLUMNS, fields)))
    if not rows:
        print("report is empty", file=sys.stderr)
        return EXIT_EMPTY_REPORT

    cols = ["iteration", "cd_best10", "cd_mean", "cd_worst10", "iou_mean",
            "len_min", "len_mean", "len_max"]
    print("\t".join(cols))
    for r in rows:
        print("\t".join(_cell(r[c]) for c in cols))

    def val(row, col):
        return float(row[col]) if row[col] else None

    for col in ("cd_best10", "cd_mean", "cd_worst10", "iou_mean", "len_mean", "len_max"):
        first, last = val(rows[0], col), val(rows[-1], col)
        if first is None or last is None:
            print("%s delta: n/a" % col)
        else:
            print("%s delta: %+.6f" % (col, last - first))
    return EXIT_OK


def _cell(field: str) -> str:
    if field == "":
        return "-"
    try:
        return "%.6g" % float(field)
    except ValueError:
        return field


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cadforge",
        description="Self-training pipeline for sketch-extrude program synthesis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a self-training run from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen-targets", help="generate synthetic target clouds")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--points", type=int, default=DEFAULT_POINTS)
    p.set_defaults(func=cmd_gen_targets)

    p = sub.add_parser("execute", help="run a program and sample its boundary")
    p.add_argument("program")
    p.add_argument("--points", type=int, default=DEFAULT_POINTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_execute)

    p = sub.add_parser("metrics", help="chamfer distance between two clouds")
    p.add_argument("cloud_a")
    p.add_argument("cloud_b")
    p.add_argument("--programs", nargs=2, metavar=("PA", "PB"))
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--normalize", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("augment", help="expand, shorten, or diversify a program")
    p.add_argument("program")
    p.add_argument("--mode", choices=["expand", "shorten", "diversify"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--points", type=int, default=DEFAULT_POINTS)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("report", help="summarize a run report CSV")
    p.add_argument("csv")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except EmptyResultError as exc:
        print("error: EmptyResult: %s" % exc, file=sys.stderr)
        return EXIT_EMPTY_RESULT
    except CadforgeError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
