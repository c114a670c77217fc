"""Video -> neutral keypoint stream extraction.

Each frame is cropped to the annotated hold region plus a margin for limbs
extended sideways, run through the pose backend, and mapped back to
full-frame coordinates. Frames with no detection are written as empty person
lists; interpolating through them is deliberately left to the downstream
detector, which owns that mitigation.
"""

from __future__ import annotations

import time
from pathlib import Path

from climbkit.annotations import (
    FrameRecord,
    Keypoint,
    KeypointStream,
    PersonPose,
    RouteTopo,
    write_keypoints,
)

from .backends import PoseBackend

DEFAULT_MARGIN_FRACTION = 0.15


class VideoDecodeError(RuntimeError):
    pass


class ResolutionMismatch(ValueError):
    pass


def crop_region(topo: RouteTopo, margin_fraction: float = DEFAULT_MARGIN_FRACTION) -> tuple[int, int, int, int]:
    """Integer (x0, y0, x1, y1) covering the holds plus the sideways margin,
    clamped to the frame."""
    union = topo.union_bbox()
    margin = margin_fraction * union.width
    width, height = topo.resolution
    x0 = max(0, int(union.min.x - margin))
    y0 = max(0, int(union.min.y - margin))
    x1 = min(width, int(union.max.x + margin) + 1)
    y1 = min(height, int(union.max.y + margin) + 1)
    return x0, y0, x1, y1


def extract(
    video_path,
    topo: RouteTopo,
    backend: PoseBackend,
    margin_fraction: float = DEFAULT_MARGIN_FRACTION,
) -> KeypointStream:
    """Run the backend over every frame and return the neutral stream."""
    import cv2

    path = Path(video_path)
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise VideoDecodeError(f"cannot open video: {path}")
    try:
        width = int(cap.get(cv2.CAP_PROP_FRAME_WIDTH))
        height = int(cap.get(cv2.CAP_PROP_FRAME_HEIGHT))
        if (width, height) != topo.resolution:
            raise ResolutionMismatch(
                f"video is {width}x{height} but topo says "
                f"{topo.resolution[0]}x{topo.resolution[1]}"
            )
        x0, y0, x1, y1 = crop_region(topo, margin_fraction)

        frames = []
        index = 0
        while True:
            ok, frame = cap.read()
            if not ok:
                break
            crop = frame[y0:y1, x0:x1]
            started = time.perf_counter()
            detections = backend.infer(crop)
            inference_ms = (time.perf_counter() - started) * 1000.0
            persons = []
            for raw in detections:
                kps = {
                    name: Keypoint(x + x0, y + y0, confidence)
                    for name, (x, y, confidence) in raw.keypoints.items()
                }
                persons.append(PersonPose(raw.person_id, kps))
            frames.append(FrameRecord(index, tuple(persons), inference_ms))
            index += 1
    finally:
        cap.release()

    return KeypointStream(
        video_id=topo.video_id,
        fps=topo.fps,
        resolution=topo.resolution,
        convention=backend.descriptor.convention,
        backend=backend.descriptor.name,
        frames=tuple(frames),
    )


def extract_to_file(
    video_path,
    topo: RouteTopo,
    backend: PoseBackend,
    out_path,
    margin_fraction: float = DEFAULT_MARGIN_FRACTION,
) -> KeypointStream:
    stream = extract(video_path, topo, backend, margin_fraction)
    write_keypoints(out_path, stream)
    return stream
