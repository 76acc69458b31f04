"""Run persistence: report CSV, pair dataset, manifest.

Every file is rewritten whole through a temp-then-rename so a kill at
any instant leaves the previous complete version on disk. Prior CSV rows
are carried as literal strings on resume, which is what makes a resumed
run's CSV byte-identical to an uninterrupted one.
"""
from __future__ import annotations

import json
import os
from datetime import datetime, timezone
from pathlib import Path

from .dsl import parse, print_program
from .geometry.pointcloud import read_xyz, write_xyz
from .selftrain import IterationReport, PairSource, TrainingPair

CSV_COLUMNS = [
    "iteration", "cd_best10", "cd_mean", "cd_worst10", "iou_mean",
    "len_mean", "len_max", "len_min", "pairs_emitted", "proposals_dropped",
]
REPORT_NAME = "report.csv"
DATASET_NAME = "dataset.jsonl"
MANIFEST_NAME = "manifest.json"
SHAPES_DIR = "shapes"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.parent / (path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def format_report_row(r: IterationReport) -> str:
    return ",".join([
        str(r.iteration),
        _fmt(r.cd_best10), _fmt(r.cd_mean), _fmt(r.cd_worst10),
        _fmt(r.iou_mean),
        _fmt(r.len_mean), str(r.len_max), str(r.len_min),
        str(r.pairs_emitted), str(r.proposals_dropped),
    ])


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunSink:
    """Receives each finished iteration and mirrors it to disk."""

    def __init__(
        self,
        out_dir,
        manifest: dict,
        prior_rows: list[str] | None = None,
        prior_dataset_lines: list[str] | None = None,
    ):
        self.out = Path(out_dir)
        (self.out / SHAPES_DIR).mkdir(parents=True, exist_ok=True)
        self.rows = list(prior_rows or [])
        self.dataset_lines = list(prior_dataset_lines or [])
        self.manifest = dict(manifest)
        self.manifest.setdefault("started", _now())
        self.manifest.setdefault("iterations_completed", 0)
        self.manifest.setdefault("report_csv", REPORT_NAME)
        self.manifest.setdefault("dataset", DATASET_NAME)
        self._flush_manifest()

    def on_iteration(self, report: IterationReport, new_pairs, state) -> None:
        for idx, pair in enumerate(new_pairs):
            rel = "%s/it%02d_p%04d.xyz" % (SHAPES_DIR, report.iteration, idx)
            write_xyz(self.out / rel, pair.shape)
            self.dataset_lines.append(json.dumps({
                "shape": rel,
                "program": print_program(pair.program),
                "cd": pair.cd_to_target,
                "source": pair.source.value,
                "iteration": pair.iteration,
            }))
        self.rows.append(format_report_row(report))
        self._flush_data()
        self.manifest["iterations_completed"] = report.iteration + 1
        if self.manifest["iterations_completed"] >= self.manifest.get(
            "config", {}
        ).get("iterations", 0):
            self.manifest["finished"] = _now()
        self._flush_manifest()

    def _flush_data(self) -> None:
        body = "".join(line + "\n" for line in self.dataset_lines)
        atomic_write_text(self.out / DATASET_NAME, body)
        csv = ",".join(CSV_COLUMNS) + "\n" + "".join(r + "\n" for r in self.rows)
        atomic_write_text(self.out / REPORT_NAME, csv)

    def _flush_manifest(self) -> None:
        atomic_write_text(
            self.out / MANIFEST_NAME, json.dumps(self.manifest, indent=2) + "\n"
        )


def load_run(out_dir):
    """(manifest, csv rows, dataset lines, pairs) of a previous run, for
    resuming. Shapes are re-read from their sidecars; xyz printing uses
    shortest round-trip floats, so the pairs are bit-identical to the
    originals."""
    out = Path(out_dir)
    manifest = json.loads((out / MANIFEST_NAME).read_text())
    rows: list[str] = []
    report_path = out / REPORT_NAME
    if report_path.exists():
        lines = report_path.read_text().splitlines()
        rows = lines[1:]  # drop header
    dataset_lines: list[str] = []
    pairs: list[TrainingPair] = []
    dataset_path = out / DATASET_NAME
    if dataset_path.exists():
        for line in dataset_path.read_text().splitlines():
            if not line.strip():
                continue
            dataset_lines.append(line)
            rec = json.loads(line)
            pairs.append(TrainingPair(
                shape=read_xyz(out / rec["shape"]),
                program=parse(rec["program"]),
                cd_to_target=rec["cd"],
                source=PairSource(rec["source"]),
                iteration=int(rec["iteration"]),
            ))
    return manifest, rows, dataset_lines, pairs
