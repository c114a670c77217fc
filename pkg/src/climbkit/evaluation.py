"""Interval matching and the detection quality metrics.

Predicted usage intervals are matched one-to-one against ground truth by
hold id (and, depending on the mode, limb identity) when their temporal IoU
exceeds the threshold. True negatives are not counted: most holds in a video
are never used, so they would swamp every metric. Accuracy is therefore
tp / (tp + fp + fn), which keeps it below both precision (tp / (tp + fp))
and sensitivity (tp / (tp + fn)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .annotations import LimbKind, UsageInterval, Wall
from .detector import RunStats


class DuplicateVideoId(ValueError):
    pass


class MatchMode(Enum):
    """How much limb identity a prediction must share with the ground truth."""

    HOLD_ONLY = "hold"
    LIMB_KIND = "kind"
    LIMB_EXACT = "exact"


def temporal_iou(a: UsageInterval, b: UsageInterval) -> float:
    """Temporal intersection over union of two usage intervals, in [0, 1]."""
    a0, a1 = a.span()
    b0, b1 = b.span()
    inter = min(a1, b1) - max(a0, b0)
    if inter <= 0:
        return 0.0
    union = (a1 - a0) + (b1 - b0) - inter
    return inter / union


@dataclass(frozen=True)
class MatchedPair:
    gt: UsageInterval
    pred: UsageInterval
    tiou: float


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one video: TP pairs plus the leftovers."""

    pairs: tuple[MatchedPair, ...]
    unmatched_gt: tuple[UsageInterval, ...]
    unmatched_pred: tuple[UsageInterval, ...]

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def fp(self) -> int:
        return len(self.unmatched_pred)

    @property
    def fn(self) -> int:
        return len(self.unmatched_gt)


def _compatible(gt: UsageInterval, pred: UsageInterval, mode: MatchMode) -> bool:
    if gt.hold != pred.hold:
        return False
    if mode is MatchMode.HOLD_ONLY:
        return True
    if mode is MatchMode.LIMB_KIND:
        return gt.extremity.kind is pred.extremity.kind
    return gt.extremity is pred.extremity


def match_intervals(
    gt: Sequence[UsageInterval],
    pred: Sequence[UsageInterval],
    threshold: float = 0.0,
    mode: MatchMode = MatchMode.LIMB_KIND,
) -> MatchResult:
    """Greedy one-to-one matching by descending tIoU.

    A pair is a candidate when hold ids agree, limb identity satisfies the
    mode, and tIoU is strictly above the threshold. Ties are broken by the
    earlier ground-truth start, then the earlier predicted start. Wall
    ground-truth entries are expected to be filtered out beforehand (see
    ``evaluate``).
    """
    if not 0.0 <= threshold < 1.0:
        raise ValueError(f"threshold must be in [0, 1), got {threshold}")
    candidates = []
    for i, g in enumerate(gt):
        for j, p in enumerate(pred):
            if not _compatible(g, p, mode):
                continue
            tiou = temporal_iou(g, p)
            if tiou > threshold:
                candidates.append((-tiou, g.start, p.start, i, j))
    candidates.sort()

    gt_taken = [False] * len(gt)
    pred_taken = [False] * len(pred)
    pairs = []
    for neg_tiou, _, _, i, j in candidates:
        if gt_taken[i] or pred_taken[j]:
            continue
        gt_taken[i] = True
        pred_taken[j] = True
        pairs.append(MatchedPair(gt[i], pred[j], -neg_tiou))

    return MatchResult(
        pairs=tuple(pairs),
        unmatched_gt=tuple(g for i, g in enumerate(gt) if not gt_taken[i]),
        unmatched_pred=tuple(p for j, p in enumerate(pred) if not pred_taken[j]),
    )


@dataclass(frozen=True)
class MetricValues:
    """The metric suite for one slice; ``undefined`` names the metrics whose
    denominator was empty (their value is 0.0 by convention)."""

    tp: int
    fp: int
    fn: int
    accuracy: float
    precision: float
    sensitivity: float
    mean_tiou: float
    undefined: tuple[str, ...] = ()


def _values_from_counts(
    tp: int, fp: int, fn: int, tious: Sequence[float], mean_tiou_over: str
) -> MetricValues:
    undefined = []
    if tp + fp + fn > 0:
        accuracy = tp / (tp + fp + fn)
    else:
        accuracy = 0.0
        undefined.append("accuracy")
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        undefined.append("precision")
    if tp + fn > 0:
        sensitivity = tp / (tp + fn)
    else:
        sensitivity = 0.0
        undefined.append("sensitivity")

    if mean_tiou_over == "matched":
        denom = len(tious)
    elif mean_tiou_over == "all_gt":
        denom = tp + fn
    else:
        raise ValueError(f"mean_tiou_over must be 'matched' or 'all_gt', got {mean_tiou_over!r}")
    if denom > 0:
        mean_tiou = sum(tious) / denom
    else:
        mean_tiou = 0.0
        undefined.append("mean_tiou")

    return MetricValues(tp, fp, fn, accuracy, precision, sensitivity, mean_tiou, tuple(undefined))


def compute_metrics(result: MatchResult, mean_tiou_over: str = "matched") -> MetricValues:
    """Accuracy, precision, sensitivity, and mean tIoU for a match result.

    ``mean_tiou_over`` selects the averaging population: matched pairs only
    (default) or all ground-truth intervals, counting misses as zero.
    """
    return _values_from_counts(
        result.tp,
        result.fp,
        result.fn,
        [p.tiou for p in result.pairs],
        mean_tiou_over,
    )


@dataclass(frozen=True)
class VideoEval:
    """Ground truth and predictions for one video, plus optional run stats."""

    video_id: str
    route: str
    gt: tuple[UsageInterval, ...]
    pred: tuple[UsageInterval, ...]
    run_stats: RunStats | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "gt", tuple(self.gt))
        object.__setattr__(self, "pred", tuple(self.pred))


@dataclass(frozen=True)
class MetricSlice:
    """Metric values for one (threshold, limb scope, grouping) combination.

    ``group`` is "all", "route", or "video"; ``key`` names the route/video
    (None for "all"). ``limbs`` is "overall", "hands", or "feet".
    """

    threshold: float
    limbs: str
    group: str
    key: str | None
    values: MetricValues


@dataclass(frozen=True)
class EvalReport:
    """Every metric slice of one evaluation run, plus run-stat aggregates."""

    mode: MatchMode
    thresholds: tuple[float, ...]
    mean_tiou_over: str
    slices: tuple[MetricSlice, ...]
    wall_gt_excluded: int
    videos: tuple[tuple[str, str], ...]  # (video_id, route)
    run_summary: dict | None = None

    def slice(
        self,
        threshold: float,
        limbs: str = "overall",
        route: str | None = None,
        video: str | None = None,
    ) -> MetricSlice:
        if route is not None and video is not None:
            raise ValueError("give at most one of route/video")
        group, key = "all", None
        if route is not None:
            group, key = "route", route
        elif video is not None:
            group, key = "video", video
        for s in self.slices:
            if (
                abs(s.threshold - threshold) < 1e-12
                and s.limbs == limbs
                and s.group == group
                and s.key == key
            ):
                return s
        raise KeyError(f"no slice for threshold={threshold} limbs={limbs} group={group} key={key}")

    @property
    def routes(self) -> tuple[str, ...]:
        return tuple(sorted({route for _, route in self.videos}))

    def to_dict(self) -> dict:
        return {
            "match_mode": self.mode.value,
            "thresholds": list(self.thresholds),
            "mean_tiou_over": self.mean_tiou_over,
            "wall_gt_excluded": self.wall_gt_excluded,
            "videos": [{"video_id": v, "route": r} for v, r in self.videos],
            "slices": [
                {
                    "threshold": s.threshold,
                    "limbs": s.limbs,
                    "group": s.group,
                    "key": s.key,
                    "tp": s.values.tp,
                    "fp": s.values.fp,
                    "fn": s.values.fn,
                    "accuracy": s.values.accuracy,
                    "precision": s.values.precision,
                    "sensitivity": s.values.sensitivity,
                    "mean_tiou": s.values.mean_tiou,
                    "undefined": list(s.values.undefined),
                }
                for s in self.slices
            ],
            "run_summary": self.run_summary,
        }

    def render_route_table(self, threshold: float) -> str:
        """Per-route x per-limb metric table at the given threshold."""
        routes = list(self.routes)
        columns = [("route", r) for r in routes] + [("all", None)]
        header_groups = routes + ["both"]
        lines = [f"tIoU>{threshold:g}"]
        limb_names = ["overall", "hands", "feet"]
        head = ["metric".ljust(12)]
        for name in header_groups:
            for limbs in limb_names:
                head.append(f"{name}/{limbs}".rjust(16))
        lines.append(" ".join(head))
        for metric in ("accuracy", "sensitivity", "precision", "mean_tiou"):
            row = [metric.ljust(12)]
            for group, key in columns:
                for limbs in limb_names:
                    if group == "route":
                        s = self.slice(threshold, limbs, route=key)
                    else:
                        s = self.slice(threshold, limbs)
                    value = getattr(s.values, metric)
                    if metric == "mean_tiou":
                        row.append(f"{value:16.3f}")
                    else:
                        row.append(f"{value * 100:15.1f}%")
            lines.append(" ".join(row))
        return "\n".join(lines)

    def render_video_table(self) -> str:
        """Per-video overall accuracy at every threshold."""
        lines = ["per-video accuracy"]
        head = ["video".ljust(24), "route".ljust(10)]
        head += [f"tIoU>{t:g}".rjust(10) for t in self.thresholds]
        lines.append(" ".join(head))
        for video_id, route in self.videos:
            row = [video_id.ljust(24), route.ljust(10)]
            for t in self.thresholds:
                s = self.slice(t, "overall", video=video_id)
                row.append(f"{s.values.accuracy * 100:9.1f}%")
            lines.append(" ".join(row))
        return "\n".join(lines)

    def render_tables(self) -> str:
        parts = [self.render_route_table(t) for t in self.thresholds]
        parts.append(self.render_video_table())
        return "\n\n".join(parts)


_LIMB_SCOPES = ("overall", "hands", "feet")


def _limb_bucket(extremity) -> str:
    return "hands" if extremity.kind is LimbKind.HAND else "feet"


@dataclass
class _Tally:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tious: list[float] = field(default_factory=list)


def evaluate(
    videos: Iterable[VideoEval],
    thresholds: Sequence[float] = (0.0, 0.5),
    mode: MatchMode = MatchMode.LIMB_KIND,
    mean_tiou_over: str = "matched",
    include_wall: bool = False,
) -> EvalReport:
    """Match every video and aggregate metric slices per video, route, and overall.

    Wall ground-truth intervals (no spatial target exists for them) are
    excluded by default and counted in the report. TP pairs and FN entries
    are attributed to hands/feet by the ground-truth limb, FP entries by the
    predicted limb.
    """
    videos = list(videos)
    seen_ids = set()
    for v in videos:
        if v.video_id in seen_ids:
            raise DuplicateVideoId(v.video_id)
        seen_ids.add(v.video_id)

    wall_excluded = 0
    # tallies[(threshold, limbs, group, key)] -> _Tally
    tallies: dict[tuple, _Tally] = {}

    def tally(threshold, limbs, group, key) -> _Tally:
        k = (threshold, limbs, group, key)
        if k not in tallies:
            tallies[k] = _Tally()
        return tallies[k]

    for v in sorted(videos, key=lambda v: v.video_id):
        gt = list(v.gt)
        if not include_wall:
            kept = [g for g in gt if not isinstance(g.hold, Wall)]
            wall_excluded += len(gt) - len(kept)
            gt = kept
        for threshold in thresholds:
            result = match_intervals(gt, list(v.pred), threshold, mode)
            scopes = [("all", None), ("route", v.route), ("video", v.video_id)]
            for pair in result.pairs:
                buckets = ("overall", _limb_bucket(pair.gt.extremity))
                for group, key in scopes:
                    for limbs in buckets:
                        t = tally(threshold, limbs, group, key)
                        t.tp += 1
                        t.tious.append(pair.tiou)
            for g in result.unmatched_gt:
                for group, key in scopes:
                    for limbs in ("overall", _limb_bucket(g.extremity)):
                        tally(threshold, limbs, group, key).fn += 1
            for p in result.unmatched_pred:
                for group, key in scopes:
                    for limbs in ("overall", _limb_bucket(p.extremity)):
                        tally(threshold, limbs, group, key).fp += 1
            # Ensure empty slices exist for every scope of this video.
            for group, key in scopes:
                for limbs in _LIMB_SCOPES:
                    tally(threshold, limbs, group, key)

    slices = []
    for (threshold, limbs, group, key), t in sorted(
        tallies.items(), key=lambda kv: (kv[0][0], kv[0][2], str(kv[0][3]), kv[0][1])
    ):
        slices.append(
            MetricSlice(
                threshold=threshold,
                limbs=limbs,
                group=group,
                key=key,
                values=_values_from_counts(t.tp, t.fp, t.fn, t.tious, mean_tiou_over),
            )
        )

    return EvalReport(
        mode=mode,
        thresholds=tuple(thresholds),
        mean_tiou_over=mean_tiou_over,
        slices=tuple(slices),
        wall_gt_excluded=wall_excluded,
        videos=tuple(sorted((v.video_id, v.route) for v in videos)),
        run_summary=_summarize_run_stats(videos),
    )


def _summarize_run_stats(videos) -> dict | None:
    with_stats = [v for v in videos if v.run_stats is not None]
    if not with_stats:
        return None
    per_video = {}
    all_ms: list[float] = []
    for v in sorted(with_stats, key=lambda v: v.video_id):
        rs = v.run_stats
        per_video[v.video_id] = {
            "frames_processed": rs.frames_processed,
            "missing_detections": rs.missing_detections,
            "mean_inference_ms": rs.mean_inference_ms,
        }
        all_ms.extend(rs.inference_ms)
    summary: dict = {
        "videos": per_video,
        "total_missing_detections": sum(v.run_stats.missing_detections for v in with_stats),
    }
    if all_ms:
        mean_ms = sum(all_ms) / len(all_ms)
        summary["mean_seconds_per_frame"] = mean_ms / 1000.0
        summary["fps"] = 1000.0 / mean_ms
    return summary
