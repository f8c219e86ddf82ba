"""Command-line pipeline: CSV cohort ingestion, synthetic cohorts, task
runs, and triangle-spectrum plots.

Every command resolves a RunConfig (JSON file plus flag overrides), hashes
it, and writes its artifacts under `<output>/<command>-<hash12>/`. Reports
and plots embed the config hash and tool version; reruns with the same
config are byte-identical."""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .encode import (
    ASRM_MAX,
    MISSING,
    QIDS_MAX,
    Cohort,
    Group,
    ParticipantRecord,
    WeeklyObservation,
)
from .errors import CohortValidationError, CsvParseError
from .forest import ForestConfig
from .metrics import report_to_dict
from .sigcore import stream_signature
from .spectrum import emit_plot, kde2d, simplex_project, true_proportions
from .synth import CohortSpec, generate_cohort
from .tasks import (
    CLASSIFY_TASK,
    SCORE_TASK,
    STATE_TASK,
    Instrument,
    TaskConfig,
    run_classification,
    run_score_prediction,
    run_state_prediction,
    run_state_rollout,
)

TOOL = "moodsig"
CSV_HEADER = ["participant_id", "group", "week", "asrm", "qids"]
MIN_WEEKS = 20
STATE_VERTEX_LABELS = ("NoAnswer", "Normal", "Elevated")

log = logging.getLogger(TOOL)


def _parse_int(text, what, path, lineno):
    try:
        return int(text)
    except ValueError:
        raise CsvParseError(
            lineno, f"{path}: {what} must be an integer, got {text!r}"
        ) from None


def _check_score(value, maximum, what, path, lineno):
    if value != MISSING and not 0 <= value <= maximum:
        raise CsvParseError(
            lineno, f"{path}: {what} must be -1 or 0..{maximum}, got {value}"
        )


def ingest(path):
    """Read a cohort CSV into records.

    Keeps the first row per (participant, week), drops exact duplicates with
    it, inserts missing-sentinel observations for skipped week numbers inside
    a participant's span, and excludes (with a logged reason) participants
    whose span is shorter than 20 weeks."""
    weeks_of = {}
    group_of = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvParseError(1, f"{path}: empty file")
        if [c.strip() for c in header] != CSV_HEADER:
            raise CsvParseError(
                1, f"{path}: expected header {','.join(CSV_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(CSV_HEADER):
                raise CsvParseError(
                    lineno,
                    f"{path}: expected {len(CSV_HEADER)} fields, got {len(row)}",
                )
            pid, gname, wtxt, atxt, qtxt = (c.strip() for c in row)
            if not pid:
                raise CsvParseError(lineno, f"{path}: empty participant_id")
            try:
                group = Group[gname]
            except KeyError:
                raise CsvParseError(
                    lineno, f"{path}: unknown group {gname!r}"
                ) from None
            week = _parse_int(wtxt, "week", path, lineno)
            if week < 0:
                raise CsvParseError(lineno, f"{path}: negative week {week}")
            asrm = _parse_int(atxt, "asrm", path, lineno)
            qids = _parse_int(qtxt, "qids", path, lineno)
            _check_score(asrm, ASRM_MAX, "asrm", path, lineno)
            _check_score(qids, QIDS_MAX, "qids", path, lineno)
            if (asrm == MISSING) != (qids == MISSING):
                raise CohortValidationError(
                    f"{path} line {lineno}: asrm and qids must be missing "
                    f"together (participant {pid}, week {week})"
                )
            if group_of.setdefault(pid, group) != group:
                raise CohortValidationError(
                    f"{path} line {lineno}: participant {pid} listed under "
                    f"both {group_of[pid].name} and {group.name}"
                )
            weeks_of.setdefault(pid, {}).setdefault(week, (asrm, qids))
    records, exclusions = [], []
    for pid, by_week in weeks_of.items():
        first, last = min(by_week), max(by_week)
        span = last - first + 1
        if span < MIN_WEEKS:
            exclusions.append((pid, f"{span} weeks < {MIN_WEEKS}"))
            continue
        obs = tuple(
            WeeklyObservation(w, *by_week.get(w, (MISSING, MISSING)))
            for w in range(first, last + 1)
        )
        records.append(ParticipantRecord(id=pid, group=group_of[pid], weeks=obs))
    for pid, reason in exclusions:
        log.info("excluded participant %s: %s", pid, reason)
    return Cohort(records=tuple(records), exclusions=tuple(exclusions))


def write_cohort(cohort, path):
    """Write records in the schema `ingest` reads; round-trips exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in cohort.records:
            for obs in rec.weeks:
                writer.writerow([rec.id, rec.group.name, obs.week, obs.asrm, obs.qids])


@dataclass(frozen=True)
class RunConfig:
    """Cross-command run settings; everything except `output` is hashed."""

    input: str | None = None
    output: str = "runs"
    seed: int = 0
    window_length: int | None = None
    signature_level: int = 2
    split_fraction: float = 0.7
    instrument: str | None = None
    groups: tuple[str, ...] | None = None
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int | None = None
    bootstrap_samples: int = 1000
    synth_sizes: tuple[int, ...] = (49, 45, 32)
    synth_weeks: int = 51
    spectrum_source: str = "classify"
    resolution: int = 200
    bandwidth: float | None = None

    def __post_init__(self):
        if self.instrument is not None and self.instrument not in ("ASRM", "QIDS"):
            raise ValueError(f"instrument must be ASRM or QIDS, got {self.instrument!r}")
        if self.groups is not None:
            bad = [g for g in self.groups if g not in Group.__members__]
            if bad:
                raise ValueError(f"unknown groups: {bad}")
        if self.spectrum_source not in ("classify", "state", "true"):
            raise ValueError(f"unknown spectrum_source {self.spectrum_source!r}")
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2")


def config_hash(cfg):
    doc = {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name != "output"}
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def load_config(args):
    """Merge defaults, the JSON config file, and flag overrides (flags win)."""
    data = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
        unknown = sorted(set(data) - {f.name for f in fields(RunConfig)})
        if unknown:
            raise ValueError(f"{args.config}: unknown config keys: {', '.join(unknown)}")
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            data[f.name] = value
    if isinstance(data.get("groups"), str):
        data["groups"] = [g.strip() for g in data["groups"].split(",") if g.strip()]
    if data.get("groups") is not None:
        data["groups"] = tuple(data["groups"])
    if isinstance(data.get("synth_sizes"), str):
        data["synth_sizes"] = [s.strip() for s in data["synth_sizes"].split(",")]
    if data.get("synth_sizes") is not None:
        data["synth_sizes"] = tuple(int(s) for s in data["synth_sizes"])
    if data.get("instrument") is not None:
        data["instrument"] = str(data["instrument"]).upper()
    return RunConfig(**data)


def _task_config(cfg, task):
    return TaskConfig(
        task=task,
        window_length=cfg.window_length,
        signature_level=cfg.signature_level,
        split_fraction=cfg.split_fraction,
        instrument=Instrument[cfg.instrument] if cfg.instrument else None,
        groups=tuple(Group[g] for g in cfg.groups) if cfg.groups else None,
        seed=cfg.seed,
        forest=ForestConfig(
            n_trees=cfg.n_trees,
            max_depth=cfg.max_depth,
            min_leaf=cfg.min_leaf,
            features_per_split=cfg.features_per_split,
        ),
        bootstrap_samples=cfg.bootstrap_samples,
    )


def _prepare_run(cfg, command):
    run_hash = config_hash(cfg)
    run_dir = Path(cfg.output) / f"{command}-{run_hash[:12]}"
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir, run_hash


def _stamp(cfg, command, run_hash):
    return {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "config_hash": run_hash,
    }


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_meta(run_dir, cfg, command, run_hash, extra=None):
    doc = _stamp(cfg, command, run_hash)
    doc["config"] = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    doc.update(extra or {})
    _write_json(run_dir / "meta.json", doc)


def _require_input(cfg, command):
    if not cfg.input:
        raise ValueError(f"{command} needs an input CSV (--input or config 'input')")
    return ingest(cfg.input)


def _report_doc(cfg, command, run_hash, report, **extra):
    doc = _stamp(cfg, command, run_hash)
    doc["report"] = report_to_dict(report)
    doc.update(extra)
    return doc


def cmd_synth(cfg):
    run_dir, run_hash = _prepare_run(cfg, "synth")
    spec = CohortSpec(sizes=cfg.synth_sizes, weeks=cfg.synth_weeks, seed=cfg.seed)
    cohort = generate_cohort(spec)
    csv_path = run_dir / "cohort.csv"
    write_cohort(cohort, csv_path)
    _write_meta(
        run_dir,
        cfg,
        "synth",
        run_hash,
        {"participants": len(cohort.records), "weeks": cfg.synth_weeks},
    )
    print(f"wrote {csv_path} ({len(cohort.records)} participants)")
    return 0


def cmd_classify(cfg):
    cohort = _require_input(cfg, "classify")
    run_dir, run_hash = _prepare_run(cfg, "classify")
    result = run_classification(cohort, _task_config(cfg, CLASSIFY_TASK))
    _write_json(
        run_dir / "report_mrsf.json",
        _report_doc(cfg, "classify", run_hash, result.mrsf_report, model="mrsf"),
    )
    _write_json(
        run_dir / "report_naive.json",
        _report_doc(cfg, "classify", run_hash, result.naive_report, model="naive"),
    )
    prob_cols = "\t".join(f"p_{g.name.lower()}" for g in Group)
    lines = [
        f"# tool\t{TOOL}\t{__version__}",
        f"# config_hash\t{run_hash}",
        f"participant_id\tgroup\t{prob_cols}",
    ]
    for point in result.loo_points:
        probs = "\t".join(repr(float(v)) for v in point.probs)
        lines.append(f"{point.participant_id}\t{point.group.name}\t{probs}")
    with open(run_dir / "loo_points.tsv", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    _write_meta(
        run_dir,
        cfg,
        "classify",
        run_hash,
        {
            "n_train": result.n_train,
            "n_test": result.n_test,
            "exclusions": list(cohort.exclusions),
        },
    )
    print(
        f"classify: mrsf accuracy {result.mrsf_report.accuracy_mean:.3f}, "
        f"naive accuracy {result.naive_report.accuracy_mean:.3f} -> {run_dir}"
    )
    return 0


def cmd_predict_state(cfg):
    cohort = _require_input(cfg, "predict-state")
    run_dir, run_hash = _prepare_run(cfg, "predict-state")
    results = run_state_prediction(cohort, _task_config(cfg, STATE_TASK))
    doc = _stamp(cfg, "predict-state", run_hash)
    doc["results"] = [
        {
            "group": r.group.name,
            "instrument": r.instrument.name,
            "n_train": r.n_train,
            "n_test": r.n_test,
            "mrsf": report_to_dict(r.mrsf_report),
            "naive": report_to_dict(r.naive_report),
        }
        for r in results
    ]
    _write_json(run_dir / "reports.json", doc)
    _write_meta(
        run_dir, cfg, "predict-state", run_hash, {"exclusions": list(cohort.exclusions)}
    )
    for r in results:
        print(
            f"predict-state {r.group.name}/{r.instrument.name}: "
            f"mrsf {r.mrsf_report.accuracy_mean:.3f}, "
            f"naive {r.naive_report.accuracy_mean:.3f}"
        )
    print(f"wrote {run_dir / 'reports.json'}")
    return 0


def cmd_predict_score(cfg):
    cohort = _require_input(cfg, "predict-score")
    run_dir, run_hash = _prepare_run(cfg, "predict-score")
    results = run_score_prediction(cohort, _task_config(cfg, SCORE_TASK))
    doc = _stamp(cfg, "predict-score", run_hash)
    doc["results"] = [
        {
            "group": r.group.name,
            "instrument": r.instrument.name,
            "n_train": r.n_train,
            "n_test": r.n_test,
            "mrsf": report_to_dict(r.mrsf_report),
            "naive": report_to_dict(r.naive_report),
            "severity": report_to_dict(r.severity_report),
        }
        for r in results
    ]
    _write_json(run_dir / "reports.json", doc)
    _write_meta(
        run_dir, cfg, "predict-score", run_hash, {"exclusions": list(cohort.exclusions)}
    )
    for r in results:
        print(
            f"predict-score {r.group.name}/{r.instrument.name}: "
            f"mrsf mae {r.mrsf_report.mae:.3f}, naive mae {r.naive_report.mae:.3f}"
        )
    print(f"wrote {run_dir / 'reports.json'}")
    return 0


def _emit_group_plot(run_dir, name, vectors, labels, vertex_labels, cfg, run_hash, meta):
    points = [simplex_project(v) for v in vectors]
    grid = kde2d(points, bandwidth=cfg.bandwidth, resolution=cfg.resolution)
    return emit_plot(
        grid,
        points,
        run_dir / name,
        point_labels=labels,
        vertex_labels=vertex_labels,
        metadata={"tool": TOOL, "version": __version__, "config_hash": run_hash, **meta},
    )


def cmd_spectrum(cfg):
    cohort = _require_input(cfg, "spectrum")
    run_dir, run_hash = _prepare_run(cfg, "spectrum")
    tcfg_groups = _task_config(cfg, STATE_TASK).group_list
    written = []
    rows = []
    if cfg.spectrum_source == "classify":
        result = run_classification(cohort, _task_config(cfg, CLASSIFY_TASK))
        vertex_labels = tuple(g.name for g in Group)
        for g in tcfg_groups:
            pts = [p for p in result.loo_points if p.group == g]
            rows += [(p.participant_id, g.name, "", p.probs) for p in pts]
            written += _emit_group_plot(
                run_dir,
                f"spectrum_classify_{g.name}",
                [p.probs for p in pts],
                [g.name] * len(pts),
                vertex_labels,
                cfg,
                run_hash,
                {"source": "classify", "group": g.name},
            )
    elif cfg.spectrum_source == "state":
        rollouts = run_state_rollout(cohort, _task_config(cfg, STATE_TASK))
        for rollout in rollouts:
            for g in tcfg_groups:
                pts = [p for p in rollout.points if p.group == g]
                rows += [
                    (p.participant_id, g.name, rollout.instrument.name, p.probs)
                    for p in pts
                ]
                written += _emit_group_plot(
                    run_dir,
                    f"spectrum_state_{g.name}_{rollout.instrument.name}",
                    [p.probs for p in pts],
                    [g.name] * len(pts),
                    STATE_VERTEX_LABELS,
                    cfg,
                    run_hash,
                    {
                        "source": "state",
                        "group": g.name,
                        "instrument": rollout.instrument.name,
                    },
                )
    else:
        tcfg = _task_config(cfg, STATE_TASK)
        for instrument in tcfg.instruments:
            for g in tcfg_groups:
                recs = cohort.by_group(g)
                vectors = [true_proportions(r, instrument) for r in recs]
                rows += [
                    (r.id, g.name, instrument.name, v) for r, v in zip(recs, vectors)
                ]
                written += _emit_group_plot(
                    run_dir,
                    f"spectrum_true_{g.name}_{instrument.name}",
                    vectors,
                    [g.name] * len(vectors),
                    STATE_VERTEX_LABELS,
                    cfg,
                    run_hash,
                    {"source": "true", "group": g.name, "instrument": instrument.name},
                )
    lines = [
        f"# tool\t{TOOL}\t{__version__}",
        f"# config_hash\t{run_hash}",
        f"# source\t{cfg.spectrum_source}",
        "participant_id\tgroup\tinstrument\tp0\tp1\tp2",
    ]
    for pid, gname, iname, probs in rows:
        vals = "\t".join(repr(float(v)) for v in probs)
        lines.append(f"{pid}\t{gname}\t{iname}\t{vals}")
    with open(run_dir / "points.tsv", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    written.append(str(run_dir / "points.tsv"))
    _write_meta(
        run_dir,
        cfg,
        "spectrum",
        run_hash,
        {"source": cfg.spectrum_source, "files": sorted(Path(p).name for p in written)},
    )
    print(f"spectrum ({cfg.spectrum_source}): wrote {len(written)} files -> {run_dir}")
    return 0


def cmd_sig(args):
    points = np.loadtxt(args.points, delimiter=",", ndmin=2)
    signature = stream_signature(points, args.level)
    d = signature.dimension
    flat = signature.flatten(include_scalar=True)
    words = itertools.chain.from_iterable(
        itertools.product(range(1, d + 1), repeat=k)
        for k in range(signature.level + 1)
    )
    print(f"# {TOOL} {__version__} signature level {signature.level} dimension {d}")
    for word, value in zip(words, flat):
        label = ".".join(str(i) for i in word) or "()"
        print(f"{label}\t{float(value)!r}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog=TOOL,
        description="Signature-feature pipeline for weekly mood scores "
        "with missing responses",
    )
    parser.add_argument(
        "--version", action="version", version=f"{TOOL} {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("-c", "--config", help="JSON run-config file")
        sp.add_argument("-o", "--output", help="output root (default runs/)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--input", help="cohort CSV path")
        sp.add_argument("--window-length", type=int, dest="window_length")
        sp.add_argument("--signature-level", type=int, dest="signature_level")
        sp.add_argument("--split-fraction", type=float, dest="split_fraction")
        sp.add_argument("--instrument", help="ASRM or QIDS (default both)")
        sp.add_argument("--groups", help="comma-separated subset of BD,HC,BPD")
        sp.add_argument("--n-trees", type=int, dest="n_trees")
        sp.add_argument("--max-depth", type=int, dest="max_depth")
        sp.add_argument("--min-leaf", type=int, dest="min_leaf")
        sp.add_argument(
            "--features-per-split", type=int, dest="features_per_split"
        )
        sp.add_argument(
            "--bootstrap-samples", type=int, dest="bootstrap_samples"
        )

    sp = sub.add_parser("synth", help="generate a synthetic cohort CSV")
    add_common(sp)
    sp.add_argument("--sizes", dest="synth_sizes", help="BD,HC,BPD counts")
    sp.add_argument("--weeks", type=int, dest="synth_weeks")

    for name, description in [
        ("classify", "3-group classification from one window per participant"),
        ("predict-state", "next-week state-label prediction per group"),
        ("predict-score", "next-week raw-score prediction per group"),
    ]:
        sp = sub.add_parser(name, help=description)
        add_common(sp)

    sp = sub.add_parser("spectrum", help="triangle density plots per group")
    add_common(sp)
    sp.add_argument(
        "--source",
        dest="spectrum_source",
        choices=["classify", "state", "true"],
        help="probability vectors to plot",
    )
    sp.add_argument("--resolution", type=int)
    sp.add_argument("--bandwidth", type=float)

    sp = sub.add_parser("sig", help="print the signature of a CSV of points")
    sp.add_argument("--points", required=True, help="CSV, one point per row")
    sp.add_argument("--level", type=int, default=2)
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "classify": cmd_classify,
    "predict-state": cmd_predict_state,
    "predict-score": cmd_predict_score,
    "spectrum": cmd_spectrum,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "sig":
            return cmd_sig(args)
        return COMMANDS[args.command](load_config(args))
    except (ValueError, OSError) as exc:
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
