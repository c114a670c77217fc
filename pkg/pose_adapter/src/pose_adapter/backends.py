"""Pose-estimation backends behind one tiny interface.

A backend receives a cropped BGR frame and returns raw detections in crop
coordinates; everything else (crop bookkeeping, coordinate restoration,
timing, file output) lives in the adapter. Real model wrappers import their
packages lazily and raise BackendUnavailable when those are not installed,
so the adapter and its tests work without any model weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Protocol

import numpy as np


class BackendUnavailable(RuntimeError):
    """The backend's package or model files are not installed."""


@dataclass(frozen=True)
class BackendDescriptor:
    """What a backend is and which skeleton convention it emits."""

    name: str
    convention: str  # climbkit convention name, e.g. "wrist_ankle"
    variant: str = ""


@dataclass(frozen=True)
class RawPerson:
    """One detection in crop-local pixel coordinates."""

    person_id: int
    keypoints: Mapping[str, tuple[float, float, float]] = field(default_factory=dict)


class PoseBackend(Protocol):
    descriptor: BackendDescriptor

    def infer(self, frame_bgr: np.ndarray) -> list[RawPerson]:
        """Detect people in the (cropped) frame; empty list when none found."""
        ...


class BrightSpotBackend:
    """Test backend: reports the centroid of bright pixels as one keypoint.

    Used with synthetic videos of a rendered dot; lets the whole extraction
    path be exercised without any pose model.
    """

    def __init__(self, keypoint_name: str = "right_wrist", convention: str = "wrist_ankle",
                 threshold: int = 200):
        self.descriptor = BackendDescriptor("mock", convention, variant=keypoint_name)
        self.keypoint_name = keypoint_name
        self.threshold = threshold

    def infer(self, frame_bgr: np.ndarray) -> list[RawPerson]:
        gray = frame_bgr.max(axis=2)
        ys, xs = np.nonzero(gray >= self.threshold)
        if len(xs) == 0:
            return []
        kp = (float(xs.mean()), float(ys.mean()), 1.0)
        return [RawPerson(0, {self.keypoint_name: kp})]


# BlazePose landmark indices for the four limb anchors plus the hips the
# climber-selection heuristic keys on.
_MEDIAPIPE_LANDMARKS = {
    15: "left_wrist",
    16: "right_wrist",
    31: "left_toe",
    32: "right_toe",
    23: "left_hip",
    24: "right_hip",
}


class MediaPipeBackend:
    """MediaPipe pose landmarker; toe-aware feet."""

    def __init__(self, variant: str = "heavy"):
        try:
            import mediapipe as mp  # noqa: F401
        except ImportError as exc:
            raise BackendUnavailable(
                "mediapipe is not installed; `pip install mediapipe`"
            ) from exc
        import mediapipe as mp

        self.descriptor = BackendDescriptor("mediapipe", "wrist_toe", variant)
        complexity = {"lite": 0, "full": 1, "heavy": 2}.get(variant, 2)
        self._pose = mp.solutions.pose.Pose(
            static_image_mode=False, model_complexity=complexity
        )

    def infer(self, frame_bgr: np.ndarray) -> list[RawPerson]:
        import cv2

        h, w = frame_bgr.shape[:2]
        result = self._pose.process(cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2RGB))
        if result.pose_landmarks is None:
            return []
        kps = {}
        for idx, name in _MEDIAPIPE_LANDMARKS.items():
            lm = result.pose_landmarks.landmark[idx]
            kps[name] = (lm.x * w, lm.y * h, float(lm.visibility))
        return [RawPerson(0, kps)]


# COCO-17 indices; YOLO pose models stop at the ankles.
_COCO_KEYPOINTS = {
    9: "left_wrist",
    10: "right_wrist",
    15: "left_ankle",
    16: "right_ankle",
    11: "left_hip",
    12: "right_hip",
}


class UltralyticsPoseBackend:
    """YOLO pose models via ultralytics; ankle-only feet."""

    def __init__(self, variant: str = "yolov8x-pose.pt"):
        try:
            from ultralytics import YOLO
        except ImportError as exc:
            raise BackendUnavailable(
                "ultralytics is not installed; `pip install ultralytics`"
            ) from exc
        self.descriptor = BackendDescriptor("yolov8-pose", "wrist_ankle", variant)
        self._model = YOLO(variant)

    def infer(self, frame_bgr: np.ndarray) -> list[RawPerson]:
        results = self._model.predict(source=frame_bgr, verbose=False)
        if not results:
            return []
        r = results[0]
        if r.keypoints is None or r.keypoints.xy is None:
            return []
        xy = r.keypoints.xy.cpu().numpy()
        conf = r.keypoints.conf
        conf = conf.cpu().numpy() if conf is not None else np.ones(xy.shape[:2])
        persons = []
        for pid in range(xy.shape[0]):
            kps = {}
            for idx, name in _COCO_KEYPOINTS.items():
                x, y = xy[pid, idx]
                kps[name] = (float(x), float(y), float(min(max(conf[pid, idx], 0.0), 1.0)))
            persons.append(RawPerson(pid, kps))
        return persons


_FACTORIES = {
    "mock": lambda variant: BrightSpotBackend(**_mock_kwargs(variant)),
    "mediapipe": lambda variant: MediaPipeBackend(variant or "heavy"),
    "yolov8-pose": lambda variant: UltralyticsPoseBackend(variant or "yolov8x-pose.pt"),
}


def _mock_kwargs(variant: str) -> dict:
    if not variant:
        return {}
    kwargs = {"keypoint_name": variant}
    if variant.endswith("_toe"):
        kwargs["convention"] = "wrist_toe"
    return kwargs


def create_backend(name: str, variant: str = "") -> PoseBackend:
    try:
        factory = _FACTORIES[name]
    except KeyError:
        known = ", ".join(sorted(_FACTORIES))
        raise BackendUnavailable(f"unknown backend {name!r} (known: {known})") from None
    return factory(variant)
