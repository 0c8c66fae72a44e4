"""Command-line tools: simulate scenes, run the label engine, evaluate.

Every command that consumes randomness takes an explicit ``--seed`` and is
byte-deterministic: the same inputs and seed always produce identical
output files.  JSONL outputs get a ``<out>.meta.json`` sidecar echoing the
command, seed, parameters, and effective configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, resolve_config
from .errors import SsodlabError
from .geometry import boxes_to_array, is_small
from .io import (
    DetectionRow,
    difficult_by_image,
    group_by_image,
    read_detections,
    write_detections,
)
from .metrics import evaluate
from .pipeline import child_seed, run_pipeline
from .sat import apply_thresholds, select_pseudo_labels
from .simulator import SimScene, gen_scene, simulate_teacher
from .sla import baseline_iou_assign, topk_assign, wd_similarity_matrix
from .tnl import select_negatives


class CliError(SsodlabError):
    """Operational failure surfaced to the user."""


def _seed(value: str) -> int:
    try:
        seed = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {value!r}")
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def _write_json(path: str | Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _write_meta(out: str | Path, command: str, params: dict,
                config: RunConfig | None = None, seed: int | None = None) -> None:
    _write_json(f"{out}.meta.json", {
        "command": command,
        "seed": seed,
        "params": params,
        "config": config.to_dict() if config is not None else None,
    })


def cmd_simulate(args: argparse.Namespace) -> int:
    config = resolve_config(args.config)
    count = args.count if args.count is not None else config.scene_count
    if count < 0:
        raise CliError(f"scene count must be non-negative: {count}")
    rows = []
    for i in range(count):
        scene = gen_scene(config.scene, seed=child_seed(args.seed, i),
                          image_id=f"scene_{i:06d}")
        rows.extend(DetectionRow(scene.image_id, gt) for gt in scene.gts)
    write_detections(args.out, rows)
    _write_meta(args.out, "simulate", {"count": count}, config, args.seed)
    print(f"wrote {len(rows)} ground-truth boxes across {count} scenes to {args.out}")
    return 0


def cmd_teacher(args: argparse.Namespace) -> int:
    config = resolve_config(args.config)
    groups = group_by_image(read_detections(args.scenes))
    rows = []
    for idx, (image_id, gts) in enumerate(groups.items()):
        n_small = sum(1 for g in gts if is_small(g.box))
        scene = SimScene(image_id=image_id, image_size=tuple(config.scene.image_size),
                         gts=tuple(gts), n_small=n_small, n_large=len(gts) - n_small)
        sim = simulate_teacher(scene, config.teacher, seed=child_seed(args.seed, idx))
        rows.extend(DetectionRow(image_id, p) for p in sim.predictions)
    write_detections(args.out, rows)
    _write_meta(args.out, "teacher", {"scenes": str(args.scenes)}, config, args.seed)
    print(f"wrote {len(rows)} teacher predictions for {len(groups)} scenes to {args.out}")
    return 0


def cmd_pseudolabel(args: argparse.Namespace) -> int:
    rows = read_detections(args.preds)
    _, thresholds = select_pseudo_labels(
        [r.detection for r in rows], percentile=args.p, floor=args.floor)
    kept = [r for r in rows if apply_thresholds([r.detection], thresholds)]
    kept.sort(key=lambda r: -r.detection.score)
    write_detections(args.out, kept)
    report = {
        "small_threshold": thresholds.small_threshold,
        "large_threshold": thresholds.large_threshold,
        "percentile": thresholds.percentile,
        "floor": thresholds.floor,
        "n_small_candidates": thresholds.n_small_candidates,
        "n_large_candidates": thresholds.n_large_candidates,
        "n_small_kept": thresholds.n_small_kept,
        "n_large_kept": thresholds.n_large_kept,
    }
    if args.report is not None:
        _write_json(args.report, report)
    _write_meta(args.out, "pseudolabel",
                {"p": args.p, "floor": args.floor, "thresholds": report})
    print(f"kept {len(kept)} of {len(rows)} predictions "
          f"(small cut {thresholds.small_threshold:.4f}, "
          f"large cut {thresholds.large_threshold:.4f})")
    return 0


def cmd_assign(args: argparse.Namespace) -> int:
    config = resolve_config(args.config)
    rows = read_detections(args.pseudo)
    anchors = config.anchors()
    images = []
    n_positives = 0
    for image_id, image_rows in _rows_by_image(rows).items():
        boxes = boxes_to_array([r.detection.box for r in image_rows])
        if args.baseline_iou:
            result = baseline_iou_assign(boxes, anchors, iou_threshold=0.5)
        else:
            result = topk_assign(wd_similarity_matrix(boxes, anchors), k=args.k)
        pairs = [[int(a), i] for i, picks in enumerate(result.positives) for a in picks]
        n_positives += len(pairs)
        images.append({
            "image_id": image_id,
            "pseudo": [_record_echo(r) for r in image_rows],
            "positives": pairs,
            "best_similarity": [float(v) for v in result.best_similarity],
        })
    payload = {
        "method": "iou_threshold" if args.baseline_iou else "wd_topk",
        "k": args.k,
        "n_anchors": len(anchors),
        "config": config.to_dict(),
        "images": images,
    }
    _write_json(args.out, payload)
    _write_meta(args.out, "assign",
                {"pseudo": str(args.pseudo), "k": args.k,
                 "method": payload["method"]}, config)
    print(f"assigned {n_positives} positive anchors over {len(images)} images "
          f"({payload['method']}, {len(anchors)} anchors)")
    return 0


def _rows_by_image(rows: list[DetectionRow]) -> dict[str, list[DetectionRow]]:
    grouped: dict[str, list[DetectionRow]] = {}
    for row in rows:
        grouped.setdefault(row.image_id, []).append(row)
    return grouped


def _record_echo(row: DetectionRow) -> dict:
    box = row.detection.box
    return {"cx": box.cx, "cy": box.cy, "w": box.w, "h": box.h,
            "theta": box.theta, "class": row.detection.category,
            "score": row.detection.score}


def _echo_key(record: dict) -> tuple:
    return (record["cx"], record["cy"], record["w"], record["h"],
            record["theta"], record["class"], record["score"])


def cmd_negatives(args: argparse.Namespace) -> int:
    rows = read_detections(args.preds)
    with open(args.assign, "r", encoding="utf-8") as fh:
        assignment = json.load(fh)
    promoted: dict[str, set[tuple]] = {}
    for image in assignment.get("images", []):
        promoted[image["image_id"]] = {_echo_key(p) for p in image["pseudo"]}

    images = []
    n_normal = n_hard = 0
    for image_id, image_rows in _rows_by_image(rows).items():
        excluded = promoted.get(image_id, set())
        pool = [(i, r) for i, r in enumerate(image_rows)
                if _echo_key(_record_echo(r)) not in excluded]
        for _, r in pool:
            if r.detection.bg_score is None:
                raise CliError(
                    f"prediction records must carry bg_score (image {image_id!r})")
        boxes = boxes_to_array([r.detection.box for _, r in pool])
        bg_scores = [r.detection.bg_score for _, r in pool]
        dets = [r.detection for _, r in pool]
        selection = select_negatives(boxes, bg_scores, dets,
                                     bg_threshold=args.bg_thr,
                                     hard_score_max=args.s_max)
        kept_normal = [pool[j][0] for j in selection.kept_normal]
        hard = [{"index": pool[h.index][0], "score": h.score, "weight": h.weight}
                for h in selection.hard]
        n_normal += len(kept_normal)
        n_hard += len(hard)
        images.append({"image_id": image_id, "kept_normal": kept_normal, "hard": hard})
    payload = {
        "bg_threshold": args.bg_thr,
        "hard_score_max": args.s_max,
        "images": images,
    }
    _write_json(args.out, payload)
    _write_meta(args.out, "negatives",
                {"preds": str(args.preds), "assign": str(args.assign),
                 "bg_thr": args.bg_thr, "s_max": args.s_max})
    print(f"selected {n_normal} plain and {n_hard} hard negatives "
          f"over {len(images)} images")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    pred_rows = read_detections(args.preds)
    gt_rows = read_detections(args.gt)
    report = evaluate(
        group_by_image(pred_rows),
        group_by_image(gt_rows),
        iou_threshold=args.iou,
        difficult_by_image=difficult_by_image(gt_rows),
    )
    _write_json(args.out, report.to_dict())
    _write_meta(args.out, "evaluate",
                {"preds": str(args.preds), "gt": str(args.gt), "iou": args.iou})
    mean_ap = "n/a" if report.mean_ap is None else f"{report.mean_ap:.4f}"
    recall = "n/a" if report.recall is None else f"{report.recall:.4f}"
    print(f"mean AP {mean_ap}, recall {recall}, "
          f"false alarm {report.false_alarm:.4f} "
          f"({report.tp} TP / {report.fp} FP / {report.n_gt} GT)")
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = resolve_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    anchors = config.anchors()
    records = list(run_pipeline(config.pipeline, config.scene, config.teacher,
                                anchors, iterations=args.iters, seed=args.seed))
    with open(out_dir / "iterations.jsonl", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict()))
            fh.write("\n")
    summary = {
        "command": "pipeline",
        "iterations": args.iters,
        "seed": args.seed,
        "config": config.to_dict(),
        "n_anchors": len(anchors),
        "loss_total_mean": float(np.mean([r.loss_total for r in records])) if records else None,
        "final_ema_gap": records[-1].ema_gap if records else None,
        "n_small_positives": sum(r.n_small_positives for r in records),
        "n_large_positives": sum(r.n_large_positives for r in records),
    }
    _write_json(out_dir / "summary.json", summary)
    mean = "n/a" if summary["loss_total_mean"] is None else f"{summary['loss_total_mean']:.4f}"
    print(f"ran {args.iters} iterations (mean total loss {mean}) into {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssodlab",
        description="Deterministic label engine for rotated-object detection "
                    "on simulated scenes.")
    parser.add_argument("--version", action="version", version=f"ssodlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize ground-truth scenes")
    p.add_argument("--config", default=None, help="config JSON path")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--count", type=int, default=None,
                   help="number of scenes (default: config scene_count)")
    p.add_argument("--out", required=True, help="output scenes JSONL")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("teacher", help="run the simulated teacher on scenes")
    p.add_argument("--config", default=None)
    p.add_argument("--scenes", required=True, help="scenes JSONL from 'simulate'")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out", required=True, help="output predictions JSONL")
    p.set_defaults(func=cmd_teacher)

    p = sub.add_parser("pseudolabel",
                       help="size-aware percentile thresholding of predictions")
    p.add_argument("--preds", required=True, help="predictions JSONL")
    p.add_argument("--p", type=float, default=35.0,
                   help="per-group percentile (default 35)")
    p.add_argument("--floor", type=float, default=0.5,
                   help="hard score floor (default 0.5)")
    p.add_argument("--out", required=True, help="output pseudo-label JSONL")
    p.add_argument("--report", default=None, help="optional thresholds JSON")
    p.set_defaults(func=cmd_pseudolabel)

    p = sub.add_parser("assign", help="assign pseudo-labels to anchors")
    p.add_argument("--pseudo", required=True, help="pseudo-label JSONL")
    p.add_argument("--config", default=None)
    p.add_argument("--k", type=int, default=2, help="anchors per pseudo-label (default 2)")
    p.add_argument("--baseline-iou", action="store_true",
                   help="use overlap-threshold assignment instead of transport distance")
    p.add_argument("--out", required=True, help="output assignment JSON")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("negatives", help="select background and hard negatives")
    p.add_argument("--preds", required=True, help="predictions JSONL (with bg_score)")
    p.add_argument("--assign", required=True, help="assignment JSON from 'assign'")
    p.add_argument("--bg-thr", type=float, default=0.7,
                   help="background confidence cut (default 0.7)")
    p.add_argument("--s-max", type=float, default=0.5,
                   help="hard-negative score ceiling (default 0.5)")
    p.add_argument("--out", required=True, help="output negatives JSON")
    p.set_defaults(func=cmd_negatives)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--preds", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run the full training loop end to end")
    p.add_argument("--config", default=None)
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SsodlabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
