"""Synthetic climbs with known ground truth, for testing detectors end to end.

A scenario scripts four independent limb anchors. During a scripted grip the
anchor sits exactly where its area of interest overlaps the target hold;
between grips it travels through a hold-free corridor left of the route, with
single-frame hops on and off the holds so that the first and last overlap
frames coincide exactly with the scripted interval. That makes the scripted
moves a frame-accurate oracle for the detector. Optional Gaussian jitter,
keypoint dropouts, and whole-frame detection gaps model pose-estimation
noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .annotations import (
    AnnotationError,
    Extremity,
    FrameRecord,
    Hold,
    Keypoint,
    KeypointStream,
    LimbKind,
    PersonPose,
    RouteTopo,
    SchemaError,
    UsageInterval,
    parse_topo,
    serialize_topo,
)
from .geometry import (
    AABB,
    AoiConfig,
    FootAnchorKind,
    Point2,
    SkeletonConvention,
    get_convention,
    overlaps,
)

FORMAT_VERSION = 1


class InfeasiblePlacement(ValueError):
    """The scenario cannot be realized with the guarantees the oracle makes."""


@dataclass(frozen=True)
class Move:
    """One scripted grip: a limb occupies a hold over an inclusive frame span."""

    extremity: Extremity
    hold_id: int
    start: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.start <= self.end:
            raise ValueError(f"need 0 <= start <= end, got [{self.start}, {self.end}]")


@dataclass(frozen=True)
class ScenarioSpec:
    """Full script for one synthetic climb."""

    topo: RouteTopo
    moves: tuple[Move, ...]
    n_frames: int
    noise_sigma: float = 0.0
    dropouts: tuple[tuple[Extremity, tuple[int, int]], ...] = ()
    empty_frames: tuple[tuple[int, int], ...] = ()
    seed: int = 0
    convention: str = "wrist_ankle"

    def __post_init__(self) -> None:
        object.__setattr__(self, "moves", tuple(self.moves))
        object.__setattr__(
            self,
            "dropouts",
            tuple((e, (int(a), int(b))) for e, (a, b) in self.dropouts),
        )
        object.__setattr__(
            self, "empty_frames", tuple((int(a), int(b)) for a, b in self.empty_frames)
        )
        if self.n_frames <= 0:
            raise ValueError("n_frames must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        by_limb: dict[Extremity, list[Move]] = {}
        for m in self.moves:
            if m.end >= self.n_frames:
                raise ValueError(f"move {m} extends past the last frame {self.n_frames - 1}")
            self.topo.hold_by_id(m.hold_id)
            by_limb.setdefault(m.extremity, []).append(m)
        for limb, moves in by_limb.items():
            moves = sorted(moves, key=lambda m: m.start)
            for a, b in zip(moves, moves[1:]):
                if b.start <= a.end:
                    raise ValueError(
                        f"{limb.code} occupies two holds at once: {a} overlaps {b}"
                    )


def _placement(
    hold: Hold, kind: LimbKind, foot_kind: FootAnchorKind, aoi: AoiConfig
) -> Point2:
    """Anchor position whose AOI is centered on the hold."""
    c = hold.bbox.center
    if kind is LimbKind.HAND:
        return c
    if foot_kind is FootAnchorKind.TOE:
        # Toe box spans [-half, +down]; shift so its middle sits on the hold.
        return Point2(c.x, c.y - (aoi.toe_down_extension - aoi.toe_half_extent) / 2.0)
    return Point2(c.x, c.y - aoi.ankle_down_offset - aoi.ankle_down_extension / 2.0)


def _limb_aoi(anchor: Point2, kind: LimbKind, conv: SkeletonConvention, aoi: AoiConfig) -> AABB:
    from .geometry import foot_aoi, hand_aoi

    if kind is LimbKind.HAND:
        return hand_aoi(anchor, aoi)
    return foot_aoi(anchor, conv.foot_anchor_kind, aoi)


def corridor_x(topo: RouteTopo, aoi: AoiConfig, clearance: float = 10.0) -> float:
    """An x position left of the route where no limb AOI can touch a hold."""
    leftmost = min(h.bbox.min.x for h in topo.holds)
    x = leftmost - aoi.max_half_width - clearance
    if x < 0:
        raise InfeasiblePlacement(
            f"no hold-free corridor: leftmost hold at x={leftmost:.1f} leaves "
            f"no room for an AOI of half-width {aoi.max_half_width:.1f}"
        )
    return x


def _ideal_trajectory(
    spec: ScenarioSpec, limb: Extremity, conv: SkeletonConvention, aoi: AoiConfig
) -> list[Point2]:
    """Noise-free per-frame anchor positions for one limb."""
    moves = sorted((m for m in spec.moves if m.extremity is limb), key=lambda m: m.start)
    x_free = corridor_x(spec.topo, aoi, clearance=10.0 + 3.0 * spec.noise_sigma)
    placements = [
        _placement(spec.topo.hold_by_id(m.hold_id), limb.kind, conv.foot_anchor_kind, aoi)
        for m in moves
    ]

    if not moves:
        mid = Point2(x_free, spec.topo.resolution[1] / 2.0)
        return [mid] * spec.n_frames

    positions: list[Point2] = [Point2(0, 0)] * spec.n_frames

    def fill_gap(first: int, last: int, y_from: float, y_to: float) -> None:
        # Travel inside the corridor from frame `first` to `last` inclusive.
        n = last - first + 1
        for k in range(n):
            t = k / max(1, n - 1) if n > 1 else 0.0
            positions[first + k] = Point2(x_free, y_from + t * (y_to - y_from))

    # Before the first move: rest in the corridor at the first grip's height.
    if moves[0].start > 0:
        fill_gap(0, moves[0].start - 1, placements[0].y, placements[0].y)
    for i, m in enumerate(moves):
        for f in range(m.start, m.end + 1):
            positions[f] = placements[i]
        nxt = moves[i + 1] if i + 1 < len(moves) else None
        gap_last = (nxt.start - 1) if nxt is not None else spec.n_frames - 1
        if gap_last >= m.end + 1:
            y_to = placements[i + 1].y if nxt is not None else placements[i].y
            fill_gap(m.end + 1, gap_last, placements[i].y, y_to)
    return positions


def _check_margins(spec: ScenarioSpec, conv: SkeletonConvention, aoi: AoiConfig) -> None:
    """Jitter up to 3 sigma must not break the overlap during a grip."""
    if spec.noise_sigma == 0:
        return
    for m in spec.moves:
        hold = spec.topo.hold_by_id(m.hold_id)
        anchor = _placement(hold, m.extremity.kind, conv.foot_anchor_kind, aoi)
        box = _limb_aoi(anchor, m.extremity.kind, conv, aoi)
        # Smallest displacement of the anchor that separates box from hold.
        margin_x = min(box.max.x - hold.bbox.min.x, hold.bbox.max.x - box.min.x)
        margin_y = min(box.max.y - hold.bbox.min.y, hold.bbox.max.y - box.min.y)
        margin = min(margin_x, margin_y)
        if 3.0 * spec.noise_sigma >= margin:
            raise InfeasiblePlacement(
                f"hold {m.hold_id} leaves only {margin:.1f} px of overlap margin, "
                f"not enough for jitter sigma {spec.noise_sigma}"
            )


def _validate_oracle(
    spec: ScenarioSpec,
    trajectories: dict[Extremity, list[Point2]],
    conv: SkeletonConvention,
    aoi: AoiConfig,
    persistence_seconds: float = 0.5,
    memory_seconds: float = 1.0,
) -> None:
    """The noise-free overlap pattern must reproduce the script exactly.

    Per (limb, hold) pair: every scripted frame must overlap, unscripted
    overlap runs must stay below the persistence threshold, unscripted
    contact must not fall within the memory window of a scripted interval of
    the same pair, and consecutive scripted intervals of one pair must sit
    further apart than the memory window. Any violation would make the
    detector's correct output differ from the script, so it is rejected.
    """
    fps = spec.topo.fps
    persist = max(1, math.ceil(persistence_seconds * fps - 1e-9))
    memory = math.ceil(memory_seconds * fps - 1e-9)

    scripted: dict[tuple[Extremity, int], list[Move]] = {}
    for m in spec.moves:
        scripted.setdefault((m.extremity, m.hold_id), []).append(m)

    # Noise-free overlap frames per (limb, hold).
    overlap_frames: dict[tuple[Extremity, int], list[int]] = {}
    for limb, positions in trajectories.items():
        for f, anchor in enumerate(positions):
            box = _limb_aoi(anchor, limb.kind, conv, aoi)
            for hold in spec.topo.holds:
                if overlaps(box, hold.bbox):
                    overlap_frames.setdefault((limb, hold.id), []).append(f)

    pairs = set(scripted) | set(overlap_frames)
    for pair in pairs:
        limb, hold_id = pair
        moves = sorted(scripted.get(pair, []), key=lambda m: m.start)
        in_script = set()
        for m in moves:
            in_script.update(range(m.start, m.end + 1))
        hit = set(overlap_frames.get(pair, []))

        missing = in_script - hit
        if missing:
            raise InfeasiblePlacement(
                f"{limb.code} fails to overlap hold {hold_id} at scripted frame {min(missing)}"
            )

        extra = sorted(hit - in_script)
        run_start = None
        prev = None
        for f in extra + [None]:
            if run_start is not None and (f is None or f != prev + 1):
                if prev - run_start + 1 >= persist:
                    raise InfeasiblePlacement(
                        f"{limb.code} lingers on unscripted hold {hold_id} "
                        f"around frames {run_start}-{prev}"
                    )
                run_start = None
            if f is not None and run_start is None:
                run_start = f
            prev = f
        for f in extra:
            for m in moves:
                if m.start - memory - 1 <= f <= m.end + memory + 1:
                    raise InfeasiblePlacement(
                        f"{limb.code} touches hold {hold_id} at frame {f}, inside the "
                        f"memory window of the scripted grip [{m.start}, {m.end}]"
                    )

        for a, b in zip(moves, moves[1:]):
            if b.start - a.end - 1 <= memory:
                raise InfeasiblePlacement(
                    f"{limb.code} revisits hold {hold_id} after only "
                    f"{b.start - a.end - 1} frames; the detector would merge the grips"
                )


def synthesize(
    spec: ScenarioSpec, validate: bool = True
) -> tuple[KeypointStream, list[UsageInterval]]:
    """Generate the keypoint stream and its ground-truth usage intervals.

    The truth equals the scripted moves verbatim. With ``validate`` (default)
    the noise-free trajectory is checked to be a frame-exact oracle; specs
    whose geometry cannot honor that raise InfeasiblePlacement.
    """
    conv = get_convention(spec.convention)
    aoi = AoiConfig().scaled_for_height(spec.topo.resolution[1])
    _check_margins(spec, conv, aoi)

    trajectories = {
        limb: _ideal_trajectory(spec, limb, conv, aoi) for limb in Extremity
    }
    if validate:
        _validate_oracle(spec, trajectories, conv, aoi)

    rng = np.random.default_rng(spec.seed)
    width, height = spec.topo.resolution
    dropped: dict[Extremity, set[int]] = {limb: set() for limb in Extremity}
    for limb, (a, b) in spec.dropouts:
        dropped[limb].update(range(a, b + 1))
    empty: set[int] = set()
    for a, b in spec.empty_frames:
        empty.update(range(a, b + 1))

    # A torso keypoint pinned inside the hold region keeps the synthetic
    # person selectable as the climber even when all four limbs are in
    # transit; real pose models always emit such central joints.
    torso = spec.topo.union_bbox().center

    frames = []
    limbs = sorted(Extremity, key=lambda e: e.code)
    for f in range(spec.n_frames):
        if f in empty:
            frames.append(FrameRecord(index=f, persons=()))
            continue
        keypoints = {"torso": Keypoint(torso.x, torso.y, 1.0)}
        for limb in limbs:
            if f in dropped[limb]:
                continue
            pos = trajectories[limb][f]
            x, y = pos.x, pos.y
            if spec.noise_sigma > 0:
                dx, dy = rng.normal(0.0, spec.noise_sigma, size=2)
                x, y = x + dx, y + dy
            x = min(max(x, 0.0), width - 1.0)
            y = min(max(y, 0.0), height - 1.0)
            keypoints[conv.anchor_name(limb)] = Keypoint(x, y, 1.0)
        frames.append(FrameRecord(index=f, persons=(PersonPose(0, keypoints),)))

    stream = KeypointStream(
        video_id=spec.topo.video_id,
        fps=spec.topo.fps,
        resolution=spec.topo.resolution,
        convention=spec.convention,
        backend="synthetic",
        frames=tuple(frames),
    )
    truth = [UsageInterval(m.extremity, m.hold_id, m.start, m.end) for m in spec.moves]
    return stream, truth


def random_scenario(
    seed: int,
    n_holds: int | None = None,
    n_frames: int | None = None,
    fps: float = 25.0,
    resolution: tuple[int, int] = (720, 1280),
    noise_sigma: float = 0.0,
    memory_seconds: float = 1.0,
) -> ScenarioSpec:
    """A feasible random scenario: sparse holds, a free left corridor, scripted
    grips long enough to confirm and spaced far enough apart not to merge."""
    rng = np.random.default_rng(seed)
    if n_holds is None:
        n_holds = int(rng.integers(4, 16))
    if n_frames is None:
        n_frames = int(rng.integers(400, 2001))

    width, height = resolution
    # Grid cells sized so neighboring holds can never share one AOI.
    xs = [200.0, 380.0, 560.0]
    ys = [100.0 + 150.0 * i for i in range(8)]
    cells = [(x, y) for x in xs for y in ys]
    picks = rng.choice(len(cells), size=min(n_holds, len(cells)), replace=False)
    holds = []
    for hold_id, idx in enumerate(sorted(int(i) for i in picks)):
        cx, cy = cells[idx]
        w = float(rng.uniform(24, 60))
        h = float(rng.uniform(24, 60))
        holds.append(
            Hold(
                hold_id,
                AABB(Point2(cx - w / 2, cy - h / 2), Point2(cx + w / 2, cy + h / 2)),
                is_foothold=bool(rng.integers(0, 2)),
            )
        )

    topo = RouteTopo(
        route_name="synthetic",
        video_id=f"sim-{seed:05d}",
        fps=fps,
        resolution=resolution,
        holds=tuple(holds),
    )

    memory = math.ceil(memory_seconds * fps - 1e-9)
    moves = []
    for limb in Extremity:
        t = int(rng.integers(0, 40))
        previous_hold = -1
        last_end_per_hold: dict[int, int] = {}
        while True:
            gap = int(rng.integers(2, 80))
            duration = int(rng.integers(15, 150))
            start = t + gap
            end = start + duration - 1
            if end >= n_frames - 2:
                break
            options = [
                h.id
                for h in holds
                if h.id != previous_hold
                and start - last_end_per_hold.get(h.id, -(10 ** 9)) - 1 > memory + 2
            ]
            if not options:
                t = end
                continue
            hold_id = int(options[int(rng.integers(0, len(options)))])
            moves.append(Move(limb, hold_id, start, end))
            last_end_per_hold[hold_id] = end
            previous_hold = hold_id
            t = end

    return ScenarioSpec(
        topo=topo,
        moves=tuple(moves),
        n_frames=n_frames,
        noise_sigma=noise_sigma,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------


def serialize_scenario(spec: ScenarioSpec) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "n_frames": spec.n_frames,
        "noise_sigma": spec.noise_sigma,
        "seed": spec.seed,
        "convention": spec.convention,
        "moves": [
            {"ext": m.extremity.code, "hold": m.hold_id, "start": m.start, "end": m.end}
            for m in spec.moves
        ],
        "dropouts": [
            {"ext": e.code, "from": a, "to": b} for e, (a, b) in spec.dropouts
        ],
        "empty_frames": [{"from": a, "to": b} for a, b in spec.empty_frames],
        "topo": json.loads(serialize_topo(spec.topo)),
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_scenario(text: str) -> ScenarioSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("expected an object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {doc.get('format_version')}")
    try:
        topo = parse_topo(json.dumps(doc["topo"]))
        moves = tuple(
            Move(Extremity.from_code(m["ext"]), int(m["hold"]), int(m["start"]), int(m["end"]))
            for m in doc.get("moves", [])
        )
        dropouts = tuple(
            (Extremity.from_code(d["ext"]), (int(d["from"]), int(d["to"])))
            for d in doc.get("dropouts", [])
        )
        empty = tuple(
            (int(e["from"]), int(e["to"])) for e in doc.get("empty_frames", [])
        )
        return ScenarioSpec(
            topo=topo,
            moves=moves,
            n_frames=int(doc["n_frames"]),
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
            dropouts=dropouts,
            empty_frames=empty,
            seed=int(doc.get("seed", 0)),
            convention=str(doc.get("convention", "wrist_ankle")),
        )
    except AnnotationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad scenario document: {exc}") from None
