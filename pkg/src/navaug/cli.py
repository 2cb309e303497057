"""Command-line front end.

Each subcommand reads files, writes files into --out, and exits 0 on
success, 1 when some units failed but a report was written, 2 on
configuration or input errors.  All commands are deterministic under a
fixed config and seed.
"""

from __future__ import annotations

import argparse
import shlex
import sys
from pathlib import Path

from .actions import RotationConfig, predict_sequence
from .detections import ClassFilter, load_detections
from .errors import NavaugError, ParseError
from .frames import load_frame
from .jsonl import read_jsonl, write_json, write_jsonl
from .navgraph import NavGraph, evaluate_batch
from .pretrain import write_pretrain
from .templates import (
    Category,
    SubprocessScorer,
    TemplateBank,
    extract_candidates,
    lm_filter,
    lm_filter_from_scores,
    load_annotations,
    load_corpus,
    probe_requests,
)
from .trajectory import (
    PipelineConfig,
    VlnSample,
    load_clips,
    resolve_frame_path,
    run_pipeline,
)


class CliError(Exception):
    """Configuration or input problem; maps to exit code 2."""


_SCHEMA: dict[str, type] = {
    "seed": int,
    "workers": int,
    "out": str,
    "interval_s": float,
    "length_min": int,
    "length_max": int,
    "window_deg": float,
    "shift_deg": float,
    "frame_fov_deg": float,
    "keep_fraction": float,
    "fwd_threshold_deg": float,
    "mask_prob": float,
    "shard_size": int,
    "corpus": str,
    "annotations": str,
    "scorer_cmd": str,
    "scores_file": str,
    "emit_probes": str,
    "clips": str,
    "detections": str,
    "blocked_classes": str,
    "bank": str,
    "samples": str,
    "graph": str,
    "batch": str,
}

_DEFAULTS: dict[str, object] = {
    "seed": 0,
    "workers": 1,
    "out": "out",
    "interval_s": 1.0,
    "length_min": 25,
    "length_max": 40,
    "window_deg": 80.0,
    "shift_deg": 60.0,
    "frame_fov_deg": 360.0,
    "keep_fraction": 0.5,
    "fwd_threshold_deg": 45.0,
    "mask_prob": 0.15,
    "shard_size": 64,
}


def _parse_config_file(path: str) -> dict[str, str]:
    """key=value per line; blank lines and # comments ignored."""
    p = Path(path)
    if not p.is_file():
        raise CliError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for line_no, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _SCHEMA:
            raise CliError(f"{path}:{line_no}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def resolve_config(args: argparse.Namespace) -> dict:
    """Layered settings: defaults, then config file, then flags (flags win)."""
    cfg: dict[str, object] = dict(_DEFAULTS)
    if getattr(args, "config", None):
        for key, raw in _parse_config_file(args.config).items():
            try:
                cfg[key] = _SCHEMA[key](raw)
            except ValueError as exc:
                raise CliError(f"config key {key!r}: {exc}") from exc
    for key in _SCHEMA:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if cfg["workers"] < 1:
        raise CliError("workers must be >= 1")
    if cfg["interval_s"] <= 0:
        raise CliError("interval_s must be positive")
    if not 2 <= cfg["length_min"] <= cfg["length_max"]:
        raise CliError("length range needs 2 <= length_min <= length_max")
    if not 0.0 <= cfg["keep_fraction"] <= 1.0:
        raise CliError("keep_fraction must lie in [0, 1]")
    if not 0.0 < cfg["fwd_threshold_deg"] <= 180.0:
        raise CliError("fwd_threshold_deg must lie in (0, 180]")
    if not 0.0 < cfg["mask_prob"] <= 1.0:
        raise CliError("mask_prob must lie in (0, 1]")
    if cfg["shard_size"] < 1:
        raise CliError("shard_size must be >= 1")
    _rotation(cfg)  # angle tunables checked before any work starts


def _rotation(cfg: dict) -> RotationConfig:
    try:
        return RotationConfig(
            window_deg=cfg["window_deg"],
            shift_deg=cfg["shift_deg"],
            frame_fov_deg=cfg["frame_fov_deg"],
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _input_path(cfg: dict, key: str) -> Path:
    value = cfg.get(key)
    if not value:
        raise CliError(f"missing required input: --{key.replace('_', '-')}")
    path = Path(str(value))
    if not path.is_file():
        raise CliError(f"{key.replace('_', '-')} file not found: {path}")
    return path


def _out_dir(cfg: dict) -> Path:
    out = Path(str(cfg["out"]))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_scores_table(path: Path) -> dict[tuple[str, str], float]:
    table: dict[tuple[str, str], float] = {}
    for line_no, rec in read_jsonl(path):
        try:
            table[(str(rec["template_id"]), str(rec["probe"]))] = float(rec["loss"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(str(path), line_no, f"bad score record: {exc}") from exc
    return table


def cmd_extract_templates(cfg: dict) -> int:
    corpus_path = _input_path(cfg, "corpus")
    annotations_path = _input_path(cfg, "annotations")
    corpus = load_corpus(corpus_path)
    annotations = load_annotations(annotations_path)
    candidates, stats = extract_candidates(corpus, annotations)
    corpus_id = corpus_path.stem
    out = _out_dir(cfg)

    if cfg.get("emit_probes"):
        requests = probe_requests(candidates)
        target = Path(str(cfg["emit_probes"]))
        write_jsonl(target, requests)
        print(f"wrote {len(requests)} probe requests to {target}")
        return 0

    if cfg.get("scores_file") and cfg.get("scorer_cmd"):
        raise CliError("give either --scores-file or --scorer-cmd, not both")
    if cfg.get("scores_file"):
        table = _load_scores_table(_input_path(cfg, "scores_file"))
        bank = lm_filter_from_scores(
            candidates, table, keep_fraction=cfg["keep_fraction"], corpus_id=corpus_id
        )
    elif cfg.get("scorer_cmd"):
        with SubprocessScorer(shlex.split(str(cfg["scorer_cmd"]))) as scorer:
            bank = lm_filter(
                candidates, scorer, keep_fraction=cfg["keep_fraction"], corpus_id=corpus_id
            )
    else:
        raise CliError("a scorer is required: --scorer-cmd or --scores-file")

    bank_path = out / "templates.json"
    bank.save(bank_path)
    for category in Category:
        print(f"{category.value}: {len(bank.templates(category))}")
    kept = len(bank)
    print(
        f"kept {kept} of {stats['sentences']} sentences"
        f" ({stats['filtered']} filtered, {stats['unannotated']} unannotated)"
    )
    print(f"wrote {bank_path}")
    return 0


def cmd_predict_actions(cfg: dict) -> int:
    clips_path = _input_path(cfg, "clips")
    clips = load_clips(clips_path)
    rotation = _rotation(cfg)
    manifest_dir = clips_path.parent
    out = _out_dir(cfg)

    records: list[dict] = []
    failures: list[dict] = []
    for clip in sorted(clips, key=lambda c: c.video_id):
        try:
            pixels = [
                load_frame(resolve_frame_path(manifest_dir, f.path)) for f in clip.frames
            ]
            predictions = predict_sequence(pixels, rotation)
        except Exception as exc:  # per-clip isolation: record and move on
            failures.append({"video_id": clip.video_id, "error": f"{type(exc).__name__}: {exc}"})
            continue
        for i, pred in enumerate(predictions):
            records.append(
                {
                    "video_id": clip.video_id,
                    "pair_index": i,
                    "first_frame": clip.frames[i].path,
                    "second_frame": clip.frames[i + 1].path,
                    "label": pred.label.value,
                    "scores": {c.value: s for c, s in pred.decision_scores.items()},
                }
            )

    write_jsonl(out / "predictions.jsonl", records)
    report = {
        "clips_in": len(clips),
        "clips_ok": len(clips) - len(failures),
        "pairs": len(records),
        "failures": failures,
    }
    write_json(out / "report.json", report)
    print(f"{report['clips_ok']}/{report['clips_in']} clips, {report['pairs']} pairs")
    for failure in failures:
        print(f"failed {failure['video_id']}: {failure['error']}", file=sys.stderr)
    return 1 if failures else 0


def cmd_generate(cfg: dict) -> int:
    clips_path = _input_path(cfg, "clips")
    bank = TemplateBank.load(_input_path(cfg, "bank"))
    store = load_detections(_input_path(cfg, "detections"))
    clips = load_clips(clips_path)
    class_filter = (
        ClassFilter.from_file(_input_path(cfg, "blocked_classes"))
        if cfg.get("blocked_classes")
        else ClassFilter()
    )
    pipeline_cfg = PipelineConfig(
        interval_s=cfg["interval_s"],
        length_range=(cfg["length_min"], cfg["length_max"]),
        rotation=_rotation(cfg),
        class_filter=class_filter,
    )
    out = _out_dir(cfg)
    samples, report = run_pipeline(
        clips,
        bank,
        store,
        pipeline_cfg,
        cfg["seed"],
        clips_path.parent,
        max_workers=cfg["workers"],
    )
    write_jsonl(out / "samples.jsonl", (s.to_json_dict() for s in samples))
    write_json(out / "report.json", report)
    print(
        f"{report['samples_out']} samples from {report['clips_in']} clips"
        f" ({report['rejected']} rejected, {len(report['failures'])} failed)"
    )
    return 1 if report["failures"] else 0


def cmd_build_pretrain(cfg: dict) -> int:
    samples_path = _input_path(cfg, "samples")
    samples = []
    for line_no, rec in read_jsonl(samples_path):
        try:
            samples.append(VlnSample.from_json_dict(rec))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(str(samples_path), line_no, f"bad sample record: {exc}") from exc
    out = _out_dir(cfg)
    manifest = write_pretrain(
        samples,
        out,
        seed=cfg["seed"],
        shard_size=cfg["shard_size"],
        mask_prob=cfg["mask_prob"],
    )
    counts = manifest["counts"]
    print(f"mlm: {counts['mlm']}  itm: {counts['itm']}  nap: {counts['nap']}")
    return 0


def cmd_evaluate(cfg: dict) -> int:
    graph = NavGraph.load(_input_path(cfg, "graph"))
    batch_path = _input_path(cfg, "batch")
    records = []
    for line_no, rec in read_jsonl(batch_path):
        for key in ("sample_id", "predicted", "gold", "goal"):
            if key not in rec:
                raise ParseError(str(batch_path), line_no, f"missing key {key!r}")
        records.append(rec)
    results, aggregate = evaluate_batch(graph, records)
    out = _out_dir(cfg)
    write_jsonl(out / "results.jsonl", results)
    write_json(out / "aggregate.json", aggregate)
    print(
        f"n={aggregate['count']}"
        f" tc={aggregate['mean_tc']:.4f}"
        f" spd={aggregate['mean_spd']:.4f}"
        f" sed={aggregate['mean_sed']:.4f}"
    )
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value settings file; flags override it")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", help="output directory (default: out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="navaug")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-templates", help="build a template bank from a chunked corpus")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--annotations")
    p.add_argument("--scorer-cmd", dest="scorer_cmd")
    p.add_argument("--scores-file", dest="scores_file")
    p.add_argument("--emit-probes", dest="emit_probes", metavar="PATH")
    p.add_argument("--keep-fraction", dest="keep_fraction", type=float)
    p.set_defaults(handler=cmd_extract_templates)

    p = sub.add_parser("predict-actions", help="label consecutive frame pairs for each clip")
    _add_common(p)
    p.add_argument("--clips")
    p.add_argument("--window-deg", dest="window_deg", type=float)
    p.add_argument("--shift-deg", dest="shift_deg", type=float)
    p.add_argument("--frame-fov-deg", dest="frame_fov_deg", type=float)
    p.set_defaults(handler=cmd_predict_actions)

    p = sub.add_parser("generate", help="run the clip-to-sample pipeline")
    _add_common(p)
    p.add_argument("--clips")
    p.add_argument("--detections")
    p.add_argument("--bank")
    p.add_argument("--blocked-classes", dest="blocked_classes")
    p.add_argument("--interval-s", dest="interval_s", type=float)
    p.add_argument("--length-min", dest="length_min", type=int)
    p.add_argument("--length-max", dest="length_max", type=int)
    p.add_argument("--window-deg", dest="window_deg", type=float)
    p.add_argument("--shift-deg", dest="shift_deg", type=float)
    p.add_argument("--frame-fov-deg", dest="frame_fov_deg", type=float)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("build-pretrain", help="derive proxy-task records from samples")
    _add_common(p)
    p.add_argument("--samples")
    p.add_argument("--mask-prob", dest="mask_prob", type=float)
    p.add_argument("--shard-size", dest="shard_size", type=int)
    p.set_defaults(handler=cmd_build_pretrain)

    p = sub.add_parser("evaluate", help="score predicted trajectories against gold")
    _add_common(p)
    p.add_argument("--graph")
    p.add_argument("--batch")
    p.add_argument("--fwd-threshold-deg", dest="fwd_threshold_deg", type=float)
    p.set_defaults(handler=cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.handler(cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NavaugError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
