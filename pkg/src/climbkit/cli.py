"""Command line for batch detection, evaluation, calibration, stats, and simulation.

Exit codes: 0 success, 2 input/format error, 3 precondition violation,
4 internal failure. Every structured output embeds the resolved
configuration and the tool version for provenance.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .annotations import (
    AnnotationError,
    Point2,
    parse_topo,
    read_keypoints,
    read_topo,
    read_usage,
    serialize_keypoints,
    serialize_topo,
    serialize_usage,
)
from .detector import DetectorConfig, FpsMismatch, OutOfOrderFrame, detect, events_to_intervals
from .evaluation import DuplicateVideoId, MatchMode, VideoEval, evaluate
from .geometry import (
    AoiConfig,
    DegenerateConfiguration,
    EmptyInput,
    InsufficientPoints,
    estimate_homography,
    reprojection_error,
)
from .simulate import InfeasiblePlacement, parse_scenario, synthesize
from .stats import VideoAnnotations, compute_stats

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PRECONDITION = 3
EXIT_INTERNAL = 4


def _atomic_write(path: Path, text: str) -> None:
    # Per-video outputs appear all-or-nothing even when runs race or die.
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)

_PRECONDITION_ERRORS = (
    FpsMismatch,
    OutOfOrderFrame,
    DegenerateConfiguration,
    InsufficientPoints,
    EmptyInput,
    InfeasiblePlacement,
    DuplicateVideoId,
)


class InputError(Exception):
    pass


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise InputError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"config file {p} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError(f"config file {p} must hold a JSON object")
    return doc


def _detector_config(args) -> tuple[DetectorConfig, dict]:
    """Merge config file and flags into a DetectorConfig; flags win."""
    doc = _load_config_file(args.config)
    det = dict(doc.get("detector", {}))
    aoi_doc = doc.get("aoi")
    cfg = DetectorConfig(
        persistence_seconds=float(det.get("persistence_seconds", 0.5)),
        memory_seconds=float(det.get("memory_seconds", 1.0)),
        confidence_threshold=float(det.get("confidence_threshold", 0.3)),
        footholds_only_for_feet=bool(det.get("footholds_only_for_feet", False)),
        aoi=AoiConfig(**aoi_doc) if aoi_doc else None,
    )
    resolved = {
        "detector": {
            "persistence_seconds": cfg.persistence_seconds,
            "memory_seconds": cfg.memory_seconds,
            "confidence_threshold": cfg.confidence_threshold,
            "footholds_only_for_feet": cfg.footholds_only_for_feet,
        },
        "aoi": aoi_doc or "scaled defaults",
    }
    return cfg, resolved


def _provenance(resolved_config: dict) -> dict:
    return {"tool": "climbkit", "version": __version__, "config": resolved_config}


def _read_topo_checked(path: str):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"topo file not found: {p}")
    return read_topo(p)


def cmd_detect(args) -> int:
    cfg, resolved = _detector_config(args)
    kp_path = Path(args.keypoints)
    if not kp_path.is_file():
        raise InputError(f"keypoints file not found: {kp_path}")
    stream = read_keypoints(kp_path)
    topo = _read_topo_checked(args.topo)
    if args.fps_override is not None:
        stream = replace(stream, fps=args.fps_override)
        topo = replace(topo, fps=args.fps_override)
        resolved["fps_override"] = args.fps_override

    events, stats = detect(stream, topo, cfg)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    pred_path = out_dir / f"{stream.video_id}.predictions.csv"
    _atomic_write(pred_path, serialize_usage(events_to_intervals(events)))
    runstats_path = out_dir / f"{stream.video_id}.runstats.json"
    payload = {
        **_provenance(resolved),
        "video_id": stream.video_id,
        "route": topo.route_name,
        "events": len(events),
        "run_stats": stats.to_dict(),
    }
    _atomic_write(runstats_path, json.dumps(payload, indent=2) + "\n")
    print(f"wrote {pred_path} ({len(events)} events) and {runstats_path}")
    return EXIT_OK


def _video_entries(gt_dir: Path) -> list[dict]:
    index = gt_dir / "videos.json"
    if index.is_file():
        try:
            doc = json.loads(index.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{index} is not valid JSON: {exc}") from None
        entries = doc["videos"] if isinstance(doc, dict) and "videos" in doc else doc
        if not isinstance(entries, list):
            raise InputError(f"{index} must hold a list of video entries")
        return entries
    entries = []
    for path in sorted(gt_dir.glob("*.csv")):
        stem = path.name.removesuffix(".usage.csv").removesuffix(".csv")
        route = stem.split("__", 1)[0] if "__" in stem else "all"
        entries.append({"video_id": stem, "route": route})
    return entries


def _usage_file(directory: Path, video_id: str) -> Path | None:
    for name in (f"{video_id}.usage.csv", f"{video_id}.csv", f"{video_id}.predictions.csv"):
        path = directory / name
        if path.is_file():
            return path
    return None


def cmd_eval(args) -> int:
    gt_dir = Path(args.gt_dir)
    pred_dir = Path(args.pred_dir)
    for d in (gt_dir, pred_dir):
        if not d.is_dir():
            raise InputError(f"directory not found: {d}")
    entries = _video_entries(gt_dir)
    if not entries:
        raise InputError(f"no ground-truth usage files in {gt_dir}")

    thresholds = tuple(args.threshold) if args.threshold else (0.0, 0.5)
    mode = MatchMode(args.match_mode)

    def load_one(entry) -> VideoEval:
        video_id = entry["video_id"]
        gt_path = _usage_file(gt_dir, video_id)
        if gt_path is None:
            raise InputError(f"no ground-truth usage file for {video_id} in {gt_dir}")
        pred_path = _usage_file(pred_dir, video_id)
        pred = read_usage(pred_path) if pred_path is not None else []
        return VideoEval(
            video_id=video_id,
            route=str(entry.get("route", "all")),
            gt=tuple(read_usage(gt_path)),
            pred=tuple(pred),
        )

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        videos = list(pool.map(load_one, entries))

    report = evaluate(videos, thresholds=thresholds, mode=mode)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = {"thresholds": list(thresholds), "match_mode": mode.value}
    doc = {**_provenance(resolved), "report": report.to_dict()}
    report_path = out_dir / "report.json"
    _atomic_write(report_path, json.dumps(doc, indent=2) + "\n")
    tables = report.render_tables()
    if args.format in ("text", "csv"):
        _atomic_write(out_dir / "tables.txt", tables + "\n")
    if args.format == "structured":
        print(json.dumps(doc, indent=2))
    else:
        print(tables)
    print(f"\nwrote {report_path}")
    return EXIT_OK


def _load_reference_points(path: Path) -> tuple[list[Point2], list[Point2]]:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None
    if isinstance(doc, dict) and "holds" in doc:
        topo = parse_topo(path.read_text(encoding="utf-8"))
        pairs = topo.reference_points
        if not pairs:
            raise InputError(f"topo {path} has no reference points")
        return [img for img, _ in pairs], [wall for _, wall in pairs]
    if isinstance(doc, dict) and "pairs" in doc:
        src, dst = [], []
        for pair in doc["pairs"]:
            src.append(Point2(*pair["image"]))
            dst.append(Point2(*pair["wall"]))
        return src, dst
    raise InputError(f"{path} is neither a topo nor a reference-point file")


def cmd_calibrate(args) -> int:
    path = Path(args.points)
    if not path.is_file():
        raise InputError(f"reference-points file not found: {path}")
    src, dst = _load_reference_points(path)
    h = estimate_homography(src, dst)
    error = reprojection_error(h, src, dst)
    payload = {
        **_provenance({"points": len(src)}),
        "matrix": h.as_rows(),
        "mean_reprojection_error": error,
        "n_points": len(src),
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(out, json.dumps(payload, indent=2) + "\n")
    print(f"calibrated from {len(src)} points, mean reprojection error {error:.6f}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    annot_dir = Path(args.annotations)
    if not annot_dir.is_dir():
        raise InputError(f"directory not found: {annot_dir}")
    entries = _video_entries(annot_dir)
    if not entries:
        raise InputError(f"no usage files in {annot_dir}")
    fps = args.fps_override if args.fps_override is not None else 25.0
    videos = []
    for entry in entries:
        video_id = entry["video_id"]
        path = _usage_file(annot_dir, video_id)
        if path is None:
            raise InputError(f"no usage file for {video_id} in {annot_dir}")
        usages = read_usage(path)
        n_frames = int(entry.get("n_frames", max((iv.end for iv in usages), default=0) + 1))
        videos.append(
            VideoAnnotations(
                video_id=video_id,
                route=str(entry.get("route", "all")),
                n_frames=n_frames,
                usages=tuple(usages),
            )
        )
    report = compute_stats(videos, fps=fps)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {**_provenance({"fps": fps}), "stats": report.to_dict()}
    _atomic_write(out_dir / "stats.json", json.dumps(doc, indent=2) + "\n")
    tables = report.render_tables()
    if args.format in ("text", "csv"):
        _atomic_write(out_dir / "stats.txt", tables + "\n")
    if args.format == "structured":
        print(json.dumps(doc, indent=2))
    else:
        print(tables)
    return EXIT_OK


def cmd_simulate(args) -> int:
    path = Path(args.scenario)
    if not path.is_file():
        raise InputError(f"scenario file not found: {path}")
    spec = parse_scenario(path.read_text(encoding="utf-8"))
    stream, truth = synthesize(spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / f"{stream.video_id}.keypoints.jsonl", serialize_keypoints(stream))
    _atomic_write(out_dir / f"{stream.video_id}.usage.csv", serialize_usage(truth))
    _atomic_write(out_dir / f"{stream.video_id}.topo.json", serialize_topo(spec.topo))
    manifest = {
        **_provenance({"seed": spec.seed, "noise_sigma": spec.noise_sigma}),
        "video_id": stream.video_id,
        "frames": spec.n_frames,
        "truth_intervals": len(truth),
    }
    _atomic_write(out_dir / f"{stream.video_id}.manifest.json", json.dumps(manifest, indent=2) + "\n")
    print(f"wrote stream, truth, and topo for {stream.video_id} to {out_dir}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.report)
    if not path.is_file():
        raise InputError(f"report file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None
    report = doc.get("report", doc)
    lines = []
    for s in report.get("slices", []):
        if args.format == "csv":
            lines.append(
                f"{s['threshold']},{s['group']},{s['key'] or ''},{s['limbs']},"
                f"{s['tp']},{s['fp']},{s['fn']},"
                f"{s['accuracy']:.4f},{s['precision']:.4f},{s['sensitivity']:.4f},{s['mean_tiou']:.4f}"
            )
        else:
            scope = s["key"] or "all"
            lines.append(
                f"tIoU>{s['threshold']:g} {scope:>16s} {s['limbs']:>8s}  "
                f"tp={s['tp']:4d} fp={s['fp']:4d} fn={s['fn']:4d}  "
                f"acc={s['accuracy'] * 100:5.1f}% prec={s['precision'] * 100:5.1f}% "
                f"sens={s['sensitivity'] * 100:5.1f}% mtiou={s['mean_tiou']:.3f}"
            )
    if args.format == "csv":
        lines.insert(0, "threshold,group,key,limbs,tp,fp,fn,accuracy,precision,sensitivity,mean_tiou")
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="climbkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"climbkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--fps-override", type=float, default=None)
        p.add_argument("--jobs", type=int, default=4, help="parallel videos")
        p.add_argument("--format", choices=("csv", "text", "structured"), default="text")

    p = sub.add_parser("detect", help="run the usage detector over one keypoint stream")
    p.add_argument("keypoints", help="keypoint stream file (.jsonl)")
    p.add_argument("topo", help="route topo file (.json)")
    p.add_argument("--out", default=".", help="output directory")
    common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("gt_dir", help="directory of ground-truth usage files")
    p.add_argument("pred_dir", help="directory of predicted usage files")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument(
        "--threshold", type=float, action="append", help="tIoU threshold (repeatable)"
    )
    p.add_argument(
        "--match-mode",
        choices=[m.value for m in MatchMode],
        default=MatchMode.LIMB_KIND.value,
    )
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("calibrate", help="estimate the wall homography from reference points")
    p.add_argument("points", help="topo or reference-point JSON file")
    p.add_argument("--out", default="homography.json")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("stats", help="dataset statistics from usage annotations")
    p.add_argument("annotations", help="directory with usage files and videos.json")
    p.add_argument("--out", default=".", help="output directory")
    common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("simulate", help="generate a synthetic climb from a scenario file")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--out", default=".", help="output directory")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="render an eval report.json as text or CSV")
    p.add_argument("report", help="report.json produced by `climbkit eval`")
    common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AnnotationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _PRECONDITION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except Exception as exc:  # pragma: no cover - internal invariant failures
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
