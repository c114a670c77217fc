"""Dataset statistics over usage annotations: durations, counts, occlusion."""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

from .annotations import LimbKind, UsageInterval


@dataclass(frozen=True)
class VideoAnnotations:
    """The usage annotations of one video plus what is needed for durations."""

    video_id: str
    route: str
    n_frames: int
    usages: tuple[UsageInterval, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "usages", tuple(self.usages))
        if self.n_frames <= 0:
            raise ValueError(f"n_frames must be positive, got {self.n_frames}")


@dataclass(frozen=True)
class CategoryValues:
    """A value broken down by limb class."""

    total: float
    hands: float
    feet: float


@dataclass(frozen=True)
class DurationStats:
    total_s: float
    mean_s: float
    std_s: float
    min_s: float
    max_s: float


@dataclass(frozen=True)
class GroupStats:
    """Statistics for one route (or the entire dataset)."""

    name: str
    n_videos: int
    video_duration: DurationStats
    usage_counts: CategoryValues
    avg_usage_duration_s: CategoryValues
    avg_occlusion_pct: CategoryValues


@dataclass(frozen=True)
class StatsReport:
    fps: float
    routes: tuple[GroupStats, ...]
    overall: GroupStats

    def route(self, name: str) -> GroupStats:
        for r in self.routes:
            if r.name == name:
                return r
        raise KeyError(f"no route {name!r}")

    def to_dict(self) -> dict:
        def group(g: GroupStats) -> dict:
            return {
                "name": g.name,
                "n_videos": g.n_videos,
                "video_duration_s": {
                    "total": g.video_duration.total_s,
                    "mean": g.video_duration.mean_s,
                    "std": g.video_duration.std_s,
                    "min": g.video_duration.min_s,
                    "max": g.video_duration.max_s,
                },
                "usage_counts": vars(g.usage_counts),
                "avg_usage_duration_s": vars(g.avg_usage_duration_s),
                "avg_occlusion_pct": vars(g.avg_occlusion_pct),
            }

        return {
            "fps": self.fps,
            "routes": [group(r) for r in self.routes],
            "overall": group(self.overall),
        }

    def render_tables(self) -> str:
        names = [r.name for r in self.routes]
        lines = ["video duration (s)"]
        head = ["".ljust(22)] + [n.rjust(12) for n in names]
        lines.append(" ".join(head))
        rows = [
            ("total", "total_s"),
            ("avg. per video", "mean_s"),
            ("standard deviation", "std_s"),
            ("shortest video", "min_s"),
            ("longest video", "max_s"),
        ]
        for label, attr in rows:
            row = [label.ljust(22)]
            row += [f"{getattr(r.video_duration, attr):12.2f}" for r in self.routes]
            lines.append(" ".join(row))

        lines.append("")
        lines.append("hold usage")
        head = ["".ljust(22)] + [n.rjust(12) for n in names] + ["entire".rjust(12)]
        lines.append(" ".join(head))
        groups = list(self.routes) + [self.overall]

        def block(title: str, getter, fmt: str) -> None:
            lines.append(title)
            for cat in ("total", "hands", "feet"):
                row = [f"  {cat}".ljust(22)]
                row += [fmt.format(getattr(getter(g), cat)) for g in groups]
                lines.append(" ".join(row))

        block("usage counts", lambda g: g.usage_counts, "{:12.0f}")
        block("avg. usage duration (s)", lambda g: g.avg_usage_duration_s, "{:12.2f}")
        block("avg. hold occlusion (%)", lambda g: g.avg_occlusion_pct, "{:12.2f}")
        return "\n".join(lines)


def _usage_seconds(iv: UsageInterval, fps: float, inclusive_spans: bool) -> float:
    frames = iv.duration_frames if inclusive_spans else iv.end - iv.start
    return frames / fps


def _occlusion_pct(iv: UsageInterval) -> float:
    return 100.0 * iv.occluded_frames / iv.duration_frames


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _group(
    name: str,
    videos: Sequence[VideoAnnotations],
    fps: float,
    inclusive_spans: bool,
    occlusion_weighting: str,
    stddev: str,
) -> GroupStats:
    durations = [v.n_frames / fps for v in videos]
    if len(durations) >= 2:
        std = statistics.pstdev(durations) if stddev == "population" else statistics.stdev(durations)
    else:
        std = 0.0
    duration_stats = DurationStats(
        total_s=sum(durations),
        mean_s=_mean(durations),
        std_s=std,
        min_s=min(durations) if durations else 0.0,
        max_s=max(durations) if durations else 0.0,
    )

    usages = [iv for v in videos for iv in v.usages]
    hands = [iv for iv in usages if iv.extremity.kind is LimbKind.HAND]
    feet = [iv for iv in usages if iv.extremity.kind is LimbKind.FOOT]

    counts = CategoryValues(len(usages), len(hands), len(feet))
    avg_duration = CategoryValues(
        _mean([_usage_seconds(iv, fps, inclusive_spans) for iv in usages]),
        _mean([_usage_seconds(iv, fps, inclusive_spans) for iv in hands]),
        _mean([_usage_seconds(iv, fps, inclusive_spans) for iv in feet]),
    )

    if occlusion_weighting == "per_usage":
        occlusion = CategoryValues(
            _mean([_occlusion_pct(iv) for iv in usages]),
            _mean([_occlusion_pct(iv) for iv in hands]),
            _mean([_occlusion_pct(iv) for iv in feet]),
        )
    elif occlusion_weighting == "frame_weighted":
        def pct(ivs):
            total = sum(iv.duration_frames for iv in ivs)
            occ = sum(iv.occluded_frames for iv in ivs)
            return 100.0 * occ / total if total else 0.0

        occlusion = CategoryValues(pct(usages), pct(hands), pct(feet))
    else:
        raise ValueError(
            f"occlusion_weighting must be 'per_usage' or 'frame_weighted', got {occlusion_weighting!r}"
        )

    return GroupStats(
        name=name,
        n_videos=len(videos),
        video_duration=duration_stats,
        usage_counts=counts,
        avg_usage_duration_s=avg_duration,
        avg_occlusion_pct=occlusion,
    )


def compute_stats(
    videos: Iterable[VideoAnnotations],
    fps: float,
    inclusive_spans: bool = True,
    occlusion_weighting: str = "per_usage",
    stddev: str = "population",
) -> StatsReport:
    """Recompute the dataset summary tables from annotation files.

    Usage durations count inclusive frame spans ((end - start + 1) / fps) and
    occlusion is the unweighted mean of per-usage occlusion percentages;
    both conventions can be toggled. Route order in the report is
    alphabetical, and the overall column pools every usage rather than
    averaging the route averages.
    """
    if fps <= 0:
        raise ValueError("fps must be positive")
    if stddev not in ("population", "sample"):
        raise ValueError(f"stddev must be 'population' or 'sample', got {stddev!r}")
    videos = sorted(videos, key=lambda v: v.video_id)
    by_route: dict[str, list[VideoAnnotations]] = {}
    for v in videos:
        by_route.setdefault(v.route, []).append(v)

    routes = tuple(
        _group(name, vs, fps, inclusive_spans, occlusion_weighting, stddev)
        for name, vs in sorted(by_route.items())
    )
    overall = _group("all", videos, fps, inclusive_spans, occlusion_weighting, stddev)
    return StatsReport(fps=fps, routes=routes, overall=overall)
