"""Temporal hold-usage detection from keypoint streams.

For every frame, each limb anchor gets an area of interest whose overlap with
the annotated hold boxes is tracked per (limb, hold) pair. An overlap run
must persist for at least ``persistence_seconds`` (default 0.5 s) before it
counts as usage; brief overlap gaps within ``memory_seconds`` resume the
earlier run instead of restarting the clock, which absorbs flickering pose
estimates higher up the wall. When keypoints go missing or fall below the
confidence threshold, the last known anchor position stands in for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .annotations import (
    Extremity,
    FrameRecord,
    KeypointStream,
    LimbKind,
    PersonPose,
    RouteTopo,
    UsageInterval,
)
from .geometry import (
    AABB,
    AoiConfig,
    Point2,
    SkeletonConvention,
    foot_aoi,
    get_convention,
    hand_aoi,
)


class OutOfOrderFrame(ValueError):
    """Frames must be fed to the detector with strictly increasing indices."""


class FpsMismatch(ValueError):
    """Stream and topo disagree about the frame rate."""


@dataclass(frozen=True)
class DetectorConfig:
    """Tunable knobs of the detection state machine.

    ``aoi`` and ``convention`` may be left unset; they are then resolved from
    the topo resolution (extents scaled by frame height) and the stream
    header, respectively.
    """

    persistence_seconds: float = 0.5
    memory_seconds: float = 1.0
    confidence_threshold: float = 0.3
    aoi: AoiConfig | None = None
    convention: SkeletonConvention | None = None
    footholds_only_for_feet: bool = False

    def __post_init__(self) -> None:
        if self.persistence_seconds < 0:
            raise ValueError("persistence_seconds must be >= 0")
        if self.memory_seconds < 0:
            raise ValueError("memory_seconds must be >= 0")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in [0, 1]")


def _seconds_to_frames(seconds: float, fps: float) -> int:
    # Smallest whole frame count covering the duration; the epsilon keeps
    # exact products like 0.1 * 30 from rounding up spuriously.
    return max(0, math.ceil(seconds * fps - 1e-9))


def persistence_frames(cfg: DetectorConfig, fps: float) -> int:
    """Minimum run length in frames: smallest n with n/fps >= persistence_seconds."""
    if fps <= 0:
        raise ValueError("fps must be positive")
    return _seconds_to_frames(cfg.persistence_seconds, fps)


def memory_frames(cfg: DetectorConfig, fps: float) -> int:
    """Longest overlap gap (in frames) that still resumes the previous run."""
    if fps <= 0:
        raise ValueError("fps must be positive")
    return _seconds_to_frames(cfg.memory_seconds, fps)


@dataclass(frozen=True)
class DetectionEvent:
    """A confirmed usage interval plus where it came from."""

    interval: UsageInterval
    anchor_name: str
    confirmed_at: int


@dataclass
class _Run:
    start: int
    last: int
    confirmed: bool
    confirmed_at: int | None
    anchor_name: str


@dataclass
class DetectionState:
    """Live bookkeeping for one video; single-writer, one instance per stream."""

    last_frame: int = -1
    runs: dict[tuple[Extremity, int], _Run] = field(default_factory=dict)
    last_anchor: dict[Extremity, tuple[Point2, int]] = field(default_factory=dict)


@dataclass(frozen=True)
class RunStats:
    """Per-stream processing summary: coverage, person counts, timing."""

    frames_processed: int
    missing_detections: int
    person_counts: tuple[int, ...] = ()
    inference_ms: tuple[float, ...] = ()

    @property
    def mean_inference_ms(self) -> float | None:
        if not self.inference_ms:
            return None
        return sum(self.inference_ms) / len(self.inference_ms)

    @property
    def inference_fps(self) -> float | None:
        mean = self.mean_inference_ms
        if not mean:
            return None
        return 1000.0 / mean

    def to_dict(self) -> dict:
        counts: dict[int, int] = {}
        for c in self.person_counts:
            counts[c] = counts.get(c, 0) + 1
        out: dict = {
            "frames_processed": self.frames_processed,
            "missing_detections": self.missing_detections,
            "person_count_histogram": {str(k): v for k, v in sorted(counts.items())},
        }
        if self.inference_ms:
            out["inference"] = {
                "frames_timed": len(self.inference_ms),
                "mean_ms": self.mean_inference_ms,
                "min_ms": min(self.inference_ms),
                "max_ms": max(self.inference_ms),
                "seconds_per_frame": self.mean_inference_ms / 1000.0,
                "fps": self.inference_fps,
            }
        return out


def select_climber(
    persons,
    topo: RouteTopo,
    confidence_threshold: float = 0.3,
    margin_fraction: float = 0.15,
) -> PersonPose | None:
    """Pick the person most likely to be the climber on this route.

    Counts confident keypoints inside the hold region (union of hold boxes
    expanded by the crop margin); ties fall to higher summed confidence, then
    to the lower person id. Returns None when nobody has a confident keypoint
    in the region.
    """
    if not persons:
        return None
    union = topo.union_bbox()
    margin = margin_fraction * union.width
    x0, y0 = union.min.x - margin, union.min.y - margin
    x1, y1 = union.max.x + margin, union.max.y + margin

    best: tuple[int, float, int] | None = None
    best_person = None
    for person in persons:
        count = 0
        total = 0.0
        for kp in person.keypoints.values():
            if kp.confidence >= confidence_threshold and x0 <= kp.x <= x1 and y0 <= kp.y <= y1:
                count += 1
                total += kp.confidence
        if count == 0:
            continue
        key = (count, total, -person.person_id)
        if best is None or key > best:
            best = key
            best_person = person
    return best_person


def _limb_aoi(extremity: Extremity, anchor: Point2, convention: SkeletonConvention, aoi: AoiConfig) -> AABB:
    if extremity.kind is LimbKind.HAND:
        return hand_aoi(anchor, aoi)
    return foot_aoi(anchor, convention.foot_anchor_kind, aoi)


def _flush(state: DetectionState, pair: tuple[Extremity, int], run: _Run) -> DetectionEvent | None:
    del state.runs[pair]
    if not run.confirmed:
        return None
    extremity, hold_id = pair
    return DetectionEvent(
        interval=UsageInterval(extremity, hold_id, run.start, run.last),
        anchor_name=run.anchor_name,
        confirmed_at=run.confirmed_at if run.confirmed_at is not None else run.last,
    )


def resolved_config(cfg: DetectorConfig, stream: KeypointStream, topo: RouteTopo) -> DetectorConfig:
    """Fill in aoi/convention defaults from the stream header and topo resolution."""
    convention = cfg.convention or get_convention(stream.convention)
    aoi = cfg.aoi or AoiConfig().scaled_for_height(topo.resolution[1])
    return replace(cfg, convention=convention, aoi=aoi)


def step(
    state: DetectionState,
    frame: FrameRecord,
    topo: RouteTopo,
    cfg: DetectorConfig,
) -> list[DetectionEvent]:
    """Advance the state machine by one frame; returns events that just closed.

    ``cfg.convention`` and ``cfg.aoi`` must be concrete here (see
    ``resolved_config``). Events are emitted only once an overlap run has both
    been confirmed and stayed gone past the memory window, so their end frame
    lies in the past.
    """
    if cfg.convention is None or cfg.aoi is None:
        raise ValueError("step() needs a resolved config; see resolved_config()")
    if frame.index <= state.last_frame:
        raise OutOfOrderFrame(f"frame {frame.index} after frame {state.last_frame}")
    state.last_frame = frame.index
    f = frame.index
    fps = topo.fps
    persist = persistence_frames(cfg, fps)
    memory = memory_frames(cfg, fps)
    convention = cfg.convention
    threshold = cfg.confidence_threshold

    climber = select_climber(frame.persons, topo, threshold)

    # Resolve one anchor per limb, falling back to the last known position.
    anchors: dict[Extremity, Point2] = {}
    for extremity in Extremity:
        name = convention.anchor_name(extremity)
        kp = climber.keypoints.get(name) if climber is not None else None
        if kp is not None and kp.confidence >= threshold:
            pt = Point2(kp.x, kp.y)
            state.last_anchor[extremity] = (pt, f)
            anchors[extremity] = pt
        elif extremity in state.last_anchor:
            anchors[extremity] = state.last_anchor[extremity][0]

    overlapping: set[tuple[Extremity, int]] = set()
    feet_only = cfg.footholds_only_for_feet
    for extremity, anchor in anchors.items():
        box = _limb_aoi(extremity, anchor, convention, cfg.aoi)
        ax0, ay0, ax1, ay1 = box.min.x, box.min.y, box.max.x, box.max.y
        is_foot = extremity.kind is LimbKind.FOOT
        for hold in topo.holds:
            if feet_only and is_foot and not hold.is_foothold:
                continue
            b = hold.bbox
            if (
                min(ax1, b.max.x) > max(ax0, b.min.x)
                and min(ay1, b.max.y) > max(ay0, b.min.y)
            ):
                overlapping.add((extremity, hold.id))

    events: list[DetectionEvent] = []

    # Canonical pair order keeps run bookkeeping and event emission
    # deterministic across processes (enum hashes are identity-based).
    for pair in sorted(overlapping, key=lambda p: (p[0].code, p[1])):
        run = state.runs.get(pair)
        if run is not None and f - run.last - 1 > memory:
            # Too old to resume: close it out and start fresh below.
            event = _flush(state, pair, run)
            if event is not None:
                events.append(event)
            run = None
        if run is None:
            run = _Run(
                start=f,
                last=f,
                confirmed=False,
                confirmed_at=None,
                anchor_name=convention.anchor_name(pair[0]),
            )
            state.runs[pair] = run
        else:
            run.last = f
        if not run.confirmed and run.last - run.start + 1 >= persist:
            run.confirmed = True
            run.confirmed_at = f

    # Runs that stopped overlapping expire once the memory window has passed.
    for pair in [p for p in state.runs if p not in overlapping]:
        run = state.runs[pair]
        if f - run.last > memory:
            event = _flush(state, pair, run)
            if event is not None:
                events.append(event)

    events.sort(key=_event_order)
    return events


def finish(state: DetectionState) -> list[DetectionEvent]:
    """Close every live run at the end of the stream."""
    events = []
    for pair in list(state.runs):
        event = _flush(state, pair, state.runs[pair])
        if event is not None:
            events.append(event)
    events.sort(key=_event_order)
    return events


def _event_order(e: DetectionEvent):
    iv = e.interval
    return (iv.start, iv.end, iv.extremity.code, iv.hold)


def detect(
    stream: KeypointStream,
    topo: RouteTopo,
    cfg: DetectorConfig = DetectorConfig(),
) -> tuple[list[DetectionEvent], RunStats]:
    """Run the whole stream through the state machine.

    Returns the detected events sorted by start frame together with the
    processing summary (frame coverage, missing detections, person counts,
    and inference timing when the stream carries it).
    """
    if abs(stream.fps - topo.fps) > 1e-9:
        raise FpsMismatch(f"stream fps {stream.fps} != topo fps {topo.fps}")
    cfg = resolved_config(cfg, stream, topo)
    state = DetectionState()
    events: list[DetectionEvent] = []
    person_counts: list[int] = []
    inference_ms: list[float] = []
    missing = 0
    for frame in stream.frames:
        events.extend(step(state, frame, topo, cfg))
        person_counts.append(len(frame.persons))
        if not frame.persons:
            missing += 1
        if frame.inference_ms is not None:
            inference_ms.append(frame.inference_ms)
    events.extend(finish(state))
    events.sort(key=_event_order)
    stats = RunStats(
        frames_processed=len(stream.frames),
        missing_detections=missing,
        person_counts=tuple(person_counts),
        inference_ms=tuple(inference_ms),
    )
    return events, stats


def events_to_intervals(events) -> list[UsageInterval]:
    """Strip provenance; handy for writing predictions in the usage.csv format."""
    return [e.interval for e in events]
