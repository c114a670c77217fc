"""Dataset file formats: usage annotations, route topos, and keypoint streams.

Three formats, all UTF-8 and versioned with ``format_version`` (currently 1):

* ``usage.csv`` -- one hold usage per row: ``ext,hold,start,end,occluded``.
  Frame spans are inclusive on both ends, occlusion ranges are ``a-b`` joined
  by ``;`` or the literal ``none``, and a ``w`` in the hold column marks a
  touch on the bare wall.
* topo -- a JSON document with the route's holds, homography reference
  points, resolution and frame rate for one video.
* keypoints -- JSON lines: a header object followed by one frame record per
  line, so long videos can be written and read incrementally.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .geometry import AABB, Point2

USAGE_HEADER = "ext,hold,start,end,occluded"
FORMAT_VERSION = 1


class AnnotationError(ValueError):
    """Base class for anything wrong with an annotation document."""


class ParseError(AnnotationError):
    """Syntax problem in a line-oriented file; carries 1-based line/column."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnknownExtremity(ParseError):
    pass


class MalformedRange(ParseError):
    pass


class StartAfterEnd(ParseError):
    pass


class SchemaError(AnnotationError):
    """Structured document does not match the expected schema."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class DuplicateHoldId(SchemaError):
    pass


class NonMonotonicFrames(SchemaError):
    pass


class Side(Enum):
    LEFT = "l"
    RIGHT = "r"


class LimbKind(Enum):
    HAND = "h"
    FOOT = "f"


class Extremity(Enum):
    """The four annotated limbs, keyed by their two-letter file codes."""

    LEFT_HAND = "lh"
    LEFT_FOOT = "lf"
    RIGHT_HAND = "rh"
    RIGHT_FOOT = "rf"

    @property
    def code(self) -> str:
        return self.value

    @property
    def side(self) -> Side:
        return Side(self.value[0])

    @property
    def kind(self) -> LimbKind:
        return LimbKind(self.value[1])

    @classmethod
    def from_code(cls, code: str) -> "Extremity":
        try:
            return cls(code)
        except ValueError:
            raise ValueError(f"unknown extremity code {code!r}") from None


@dataclass(frozen=True)
class Wall:
    """Placeholder target for wall touches recorded without a hold id."""

    def __repr__(self) -> str:
        return "WALL"


WALL = Wall()

HoldRef = "int | Wall"


@dataclass(frozen=True)
class UsageInterval:
    """One (extremity, hold) usage with inclusive start/end frames.

    ``occluded`` lists inclusive frame ranges in which the limb was mostly
    covered by other body parts; ranges are sorted, disjoint, and contained
    in [start, end].
    """

    extremity: Extremity
    hold: int | Wall
    start: int
    end: int
    occluded: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "occluded", tuple((int(a), int(b)) for a, b in self.occluded)
        )
        if not isinstance(self.hold, Wall) and self.hold < 0:
            raise ValueError(f"hold id must be non-negative, got {self.hold}")
        if not 0 <= self.start <= self.end:
            raise ValueError(f"need 0 <= start <= end, got [{self.start}, {self.end}]")
        prev_end = None
        for a, b in self.occluded:
            if a > b or a < self.start or b > self.end:
                raise ValueError(
                    f"occluded range [{a}, {b}] must lie inside [{self.start}, {self.end}]"
                )
            if prev_end is not None and a <= prev_end:
                raise ValueError("occluded ranges must be sorted and non-overlapping")
            prev_end = b

    @property
    def duration_frames(self) -> int:
        return self.end - self.start + 1

    def span(self) -> tuple[int, int]:
        """The interval as a half-open [start, end+1) frame span."""
        return self.start, self.end + 1

    @property
    def occluded_frames(self) -> int:
        return sum(b - a + 1 for a, b in self.occluded)


@dataclass(frozen=True)
class Hold:
    """An annotated hold: pixel bounding box plus the dedicated-foothold flag."""

    id: int
    bbox: AABB
    is_foothold: bool = False

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"hold id must be non-negative, got {self.id}")
        if self.bbox.area <= 0:
            raise ValueError(f"hold {self.id} bbox must have positive area")


@dataclass(frozen=True)
class RouteTopo:
    """All holds of one route as they appear in one specific video.

    Hold ids are route-local; (route_name, video_id, hold id) is the global
    key. ``reference_points`` holds the four image/wall calibration pairs
    when a homography calibration exists, otherwise it is empty.
    """

    route_name: str
    video_id: str
    fps: float
    resolution: tuple[int, int]
    holds: tuple[Hold, ...]
    reference_points: tuple[tuple[Point2, Point2], ...] = ()
    wall_units: str = "cm"

    def __post_init__(self) -> None:
        object.__setattr__(self, "holds", tuple(self.holds))
        object.__setattr__(self, "reference_points", tuple(self.reference_points))
        object.__setattr__(self, "fps", float(self.fps))
        object.__setattr__(
            self, "resolution", (int(self.resolution[0]), int(self.resolution[1]))
        )
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if not self.holds:
            raise ValueError("a route topo needs at least one hold")
        if self.resolution[0] <= 0 or self.resolution[1] <= 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if self.reference_points and len(self.reference_points) != 4:
            raise ValueError(
                f"calibration uses exactly 4 reference pairs, got {len(self.reference_points)}"
            )
        seen: set[int] = set()
        for h in self.holds:
            if h.id in seen:
                raise DuplicateHoldId(f"hold id {h.id} appears twice", path="holds")
            seen.add(h.id)

    def hold_by_id(self, hold_id: int) -> Hold:
        for h in self.holds:
            if h.id == hold_id:
                return h
        raise KeyError(f"no hold {hold_id} in route {self.route_name!r}")

    def union_bbox(self) -> AABB:
        """Smallest box containing every hold; the basis of the crop region."""
        return AABB(
            Point2(min(h.bbox.min.x for h in self.holds), min(h.bbox.min.y for h in self.holds)),
            Point2(max(h.bbox.max.x for h in self.holds), max(h.bbox.max.y for h in self.holds)),
        )

    def homography(self):
        """Estimate the image-to-wall homography from the reference points."""
        from .geometry import estimate_homography

        if not self.reference_points:
            raise ValueError(f"route topo {self.video_id!r} has no reference points")
        src = [img for img, _ in self.reference_points]
        dst = [wall for _, wall in self.reference_points]
        return estimate_homography(src, dst)


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    confidence: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "confidence", float(self.confidence))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("keypoint coordinates must be finite")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class PersonPose:
    person_id: int
    keypoints: Mapping[str, Keypoint] = field(default_factory=dict)


@dataclass(frozen=True)
class FrameRecord:
    """One video frame; an empty person list is a missing detection."""

    index: int
    persons: tuple[PersonPose, ...] = ()
    inference_ms: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "persons", tuple(self.persons))
        if self.inference_ms is not None:
            object.__setattr__(self, "inference_ms", float(self.inference_ms))
        ids = [p.person_id for p in self.persons]
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate person ids in frame", path=f"frames[{self.index}]")


@dataclass(frozen=True)
class KeypointStream:
    """Per-frame 2D keypoints for one video, in a pose-model-neutral schema."""

    video_id: str
    fps: float
    resolution: tuple[int, int]
    convention: str
    backend: str = ""
    frames: tuple[FrameRecord, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "fps", float(self.fps))
        object.__setattr__(
            self, "resolution", (int(self.resolution[0]), int(self.resolution[1]))
        )
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        prev = None
        for fr in self.frames:
            if prev is not None and fr.index <= prev:
                raise NonMonotonicFrames(
                    f"frame {fr.index} after frame {prev}", path="frames"
                )
            prev = fr.index

    @property
    def width(self) -> int:
        return self.resolution[0]

    @property
    def height(self) -> int:
        return self.resolution[1]


# ---------------------------------------------------------------------------
# usage.csv
# ---------------------------------------------------------------------------

_RANGE_RE = re.compile(r"^(\d+)-(\d+)$")


def _field_column(raw_line: str, field_index: int) -> int:
    # 1-based character offset where the field starts.
    col = 1
    for part in raw_line.split(",")[:field_index]:
        col += len(part) + 1
    return col


def parse_usage(text: str) -> list[UsageInterval]:
    """Parse a usage.csv document into usage intervals, in file order."""
    intervals: list[UsageInterval] = []
    saw_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = re.match(r"#\s*format_version\s*=\s*(\d+)$", line)
            if m and int(m.group(1)) != FORMAT_VERSION:
                raise ParseError(f"unsupported format_version {m.group(1)}", lineno)
            continue
        if not saw_header:
            if line != USAGE_HEADER:
                raise ParseError(f"expected header {USAGE_HEADER!r}, got {line!r}", lineno)
            saw_header = True
            continue
        fields = line.split(",")
        if len(fields) != 5:
            raise ParseError(f"expected 5 fields, got {len(fields)}", lineno)
        ext_s, hold_s, start_s, end_s, occ_s = (f.strip() for f in fields)

        try:
            extremity = Extremity.from_code(ext_s)
        except ValueError:
            raise UnknownExtremity(
                f"unknown extremity {ext_s!r}", lineno, _field_column(raw, 0)
            ) from None

        hold: int | Wall
        if hold_s == "w":
            hold = WALL
        elif hold_s.isdigit():
            hold = int(hold_s)
        else:
            raise ParseError(
                f"hold must be a non-negative integer or 'w', got {hold_s!r}",
                lineno,
                _field_column(raw, 1),
            )

        try:
            start = int(start_s)
            end = int(end_s)
        except ValueError:
            raise ParseError(
                f"start/end must be integers, got {start_s!r}/{end_s!r}",
                lineno,
                _field_column(raw, 2),
            ) from None
        if start < 0 or end < 0:
            raise ParseError("frame indices must be non-negative", lineno, _field_column(raw, 2))
        if start > end:
            raise StartAfterEnd(
                f"start {start} is after end {end}", lineno, _field_column(raw, 2)
            )

        occluded: list[tuple[int, int]] = []
        if occ_s != "none":
            col = _field_column(raw, 4)
            for part in occ_s.split(";"):
                m = _RANGE_RE.match(part.strip())
                if not m:
                    raise MalformedRange(f"bad occlusion range {part!r}", lineno, col)
                a, b = int(m.group(1)), int(m.group(2))
                if a > b:
                    raise MalformedRange(f"range {a}-{b} is reversed", lineno, col)
                if a < start or b > end:
                    raise MalformedRange(
                        f"range {a}-{b} lies outside [{start}, {end}]", lineno, col
                    )
                if occluded and a <= occluded[-1][1]:
                    raise MalformedRange(
                        f"range {a}-{b} overlaps or precedes the previous one", lineno, col
                    )
                occluded.append((a, b))

        intervals.append(UsageInterval(extremity, hold, start, end, tuple(occluded)))
    if not saw_header:
        raise ParseError(f"missing header {USAGE_HEADER!r}", max(1, text.count("\n") + 1))
    return intervals


def serialize_usage(intervals: Iterable[UsageInterval]) -> str:
    """Render usage intervals in the canonical usage.csv form."""
    lines = [f"# format_version={FORMAT_VERSION}", USAGE_HEADER]
    for iv in intervals:
        hold = "w" if isinstance(iv.hold, Wall) else str(iv.hold)
        occ = ";".join(f"{a}-{b}" for a, b in iv.occluded) or "none"
        lines.append(f"{iv.extremity.code},{hold},{iv.start},{iv.end},{occ}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# topo documents
# ---------------------------------------------------------------------------


def _want(obj, key: str, kind, path: str):
    if not isinstance(obj, dict):
        raise SchemaError(f"expected an object, got {type(obj).__name__}", path)
    if key not in obj:
        raise SchemaError("missing field", f"{path}.{key}")
    val = obj[key]
    if kind is float:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise SchemaError(f"expected a number, got {type(val).__name__}", f"{path}.{key}")
        return float(val)
    if not isinstance(val, kind) or (kind is int and isinstance(val, bool)):
        raise SchemaError(
            f"expected {kind.__name__}, got {type(val).__name__}", f"{path}.{key}"
        )
    return val


def _want_pair(val, path: str) -> tuple[float, float]:
    if not isinstance(val, list) or len(val) != 2:
        raise SchemaError("expected a [x, y] pair", path)
    for v in val:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise SchemaError("expected numeric coordinates", path)
    return float(val[0]), float(val[1])


def _check_version(doc: dict, path: str = "$") -> None:
    version = _want(doc, "format_version", int, path)
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {version}", f"{path}.format_version")


def parse_topo(text: str) -> RouteTopo:
    """Parse a topo JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    _check_version(doc)
    route_name = _want(doc, "route_name", str, "$")
    video_id = _want(doc, "video_id", str, "$")
    fps = _want(doc, "fps", float, "$")
    width, height = _want_pair(_want(doc, "resolution", list, "$"), "$.resolution")
    wall_units = doc.get("wall_units", "cm")
    if not isinstance(wall_units, str):
        raise SchemaError("expected str", "$.wall_units")

    refs = []
    for i, entry in enumerate(doc.get("reference_points", [])):
        path = f"$.reference_points[{i}]"
        img = _want_pair(_want(entry, "image", list, path), f"{path}.image")
        wall = _want_pair(_want(entry, "wall", list, path), f"{path}.wall")
        refs.append((Point2(*img), Point2(*wall)))

    holds = []
    for i, entry in enumerate(_want(doc, "holds", list, "$")):
        path = f"$.holds[{i}]"
        hold_id = _want(entry, "id", int, path)
        box = AABB(
            Point2(_want(entry, "min_x", float, path), _want(entry, "min_y", float, path)),
            Point2(_want(entry, "max_x", float, path), _want(entry, "max_y", float, path)),
        )
        holds.append(Hold(hold_id, box, _want(entry, "is_foothold", bool, path)))

    try:
        return RouteTopo(
            route_name=route_name,
            video_id=video_id,
            fps=fps,
            resolution=(int(width), int(height)),
            holds=tuple(holds),
            reference_points=tuple(refs),
            wall_units=wall_units,
        )
    except DuplicateHoldId:
        raise
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def serialize_topo(topo: RouteTopo) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "route_name": topo.route_name,
        "video_id": topo.video_id,
        "fps": topo.fps,
        "resolution": [topo.resolution[0], topo.resolution[1]],
        "wall_units": topo.wall_units,
        "reference_points": [
            {"image": [img.x, img.y], "wall": [wall.x, wall.y]}
            for img, wall in topo.reference_points
        ],
        "holds": [
            {
                "id": h.id,
                "min_x": h.bbox.min.x,
                "min_y": h.bbox.min.y,
                "max_x": h.bbox.max.x,
                "max_y": h.bbox.max.y,
                "is_foothold": h.is_foothold,
            }
            for h in topo.holds
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


# ---------------------------------------------------------------------------
# keypoint streams (JSON lines)
# ---------------------------------------------------------------------------


def _parse_stream_header(line: str) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON header: {exc}") from None
    _check_version(header)
    width, height = _want_pair(_want(header, "resolution", list, "$"), "$.resolution")
    backend = header.get("backend", "")
    if not isinstance(backend, str):
        raise SchemaError("expected str", "$.backend")
    return {
        "video_id": _want(header, "video_id", str, "$"),
        "fps": _want(header, "fps", float, "$"),
        "resolution": (int(width), int(height)),
        "convention": _want(header, "convention", str, "$"),
        "backend": backend,
    }


def _parse_frame_line(line: str, path: str) -> FrameRecord:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", path) from None
    index = _want(rec, "frame", int, path)
    persons = []
    for j, p in enumerate(_want(rec, "persons", list, path)):
        ppath = f"{path}.persons[{j}]"
        pid = _want(p, "id", int, ppath)
        kps = {}
        raw_kps = _want(p, "keypoints", dict, ppath)
        for name, triple in raw_kps.items():
            kpath = f"{ppath}.keypoints.{name}"
            if not isinstance(triple, list) or len(triple) != 3:
                raise SchemaError("expected [x, y, confidence]", kpath)
            for v in triple:
                if not isinstance(v, (int, float)) or isinstance(v, bool):
                    raise SchemaError("expected numeric values", kpath)
            try:
                kps[name] = Keypoint(*triple)
            except ValueError as exc:
                raise SchemaError(str(exc), kpath) from None
        persons.append(PersonPose(pid, kps))
    inference_ms = rec.get("inference_ms")
    if inference_ms is not None and (
        not isinstance(inference_ms, (int, float)) or isinstance(inference_ms, bool)
    ):
        raise SchemaError("expected a number", f"{path}.inference_ms")
    try:
        return FrameRecord(index, tuple(persons), inference_ms)
    except SchemaError as exc:
        raise SchemaError(str(exc), path) from None


def parse_keypoints(text: str) -> KeypointStream:
    """Parse a keypoint stream document (header line + one frame per line)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaError("empty document")
    header = _parse_stream_header(lines[0])
    frames: list[FrameRecord] = []
    prev_index = None
    for i, line in enumerate(lines[1:]):
        path = f"$.frames[{i}]"
        frame = _parse_frame_line(line, path)
        if prev_index is not None and frame.index <= prev_index:
            raise NonMonotonicFrames(
                f"frame {frame.index} follows frame {prev_index}", path=path
            )
        prev_index = frame.index
        frames.append(frame)
    return KeypointStream(frames=tuple(frames), **header)


def iter_keypoint_frames(path):
    """Incremental reader for long streams: yields the header dict, then one
    FrameRecord per line, without holding the whole document in memory."""
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise SchemaError("empty document")
        yield _parse_stream_header(header_line)
        prev = None
        count = 0
        for line in fh:
            if not line.strip():
                continue
            frame = _parse_frame_line(line, f"$.frames[{count}]")
            if prev is not None and frame.index <= prev:
                raise NonMonotonicFrames(f"frame {frame.index} follows frame {prev}")
            prev = frame.index
            count += 1
            yield frame


def _frame_to_json(fr: FrameRecord) -> str:
    rec: dict = {
        "frame": fr.index,
        "persons": [
            {
                "id": p.person_id,
                "keypoints": {
                    name: [kp.x, kp.y, kp.confidence]
                    for name, kp in sorted(p.keypoints.items())
                },
            }
            for p in sorted(fr.persons, key=lambda p: p.person_id)
        ],
    }
    if fr.inference_ms is not None:
        rec["inference_ms"] = fr.inference_ms
    return json.dumps(rec, separators=(",", ":"))


def serialize_keypoints(stream: KeypointStream) -> str:
    """Render a stream as canonical JSON lines (sorted keypoint names/person ids)."""
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "keypoint_stream",
        "video_id": stream.video_id,
        "fps": stream.fps,
        "resolution": [stream.resolution[0], stream.resolution[1]],
        "convention": stream.convention,
        "backend": stream.backend,
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    lines.extend(_frame_to_json(fr) for fr in stream.frames)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# path helpers
# ---------------------------------------------------------------------------


def read_usage(path) -> list[UsageInterval]:
    return parse_usage(Path(path).read_text(encoding="utf-8"))


def write_usage(path, intervals: Iterable[UsageInterval]) -> None:
    Path(path).write_text(serialize_usage(intervals), encoding="utf-8")


def read_topo(path) -> RouteTopo:
    return parse_topo(Path(path).read_text(encoding="utf-8"))


def write_topo(path, topo: RouteTopo) -> None:
    Path(path).write_text(serialize_topo(topo), encoding="utf-8")


def read_keypoints(path) -> KeypointStream:
    return parse_keypoints(Path(path).read_text(encoding="utf-8"))


def write_keypoints(path, stream: KeypointStream) -> None:
    Path(path).write_text(serialize_keypoints(stream), encoding="utf-8")
