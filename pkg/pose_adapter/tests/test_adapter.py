import math

import cv2
import numpy as np
import pytest

from climbkit.annotations import AABB, Hold, Point2, RouteTopo, read_keypoints
from climbkit.geometry import FootAnchorKind, get_convention

from pose_adapter.adapter import (
    ResolutionMismatch,
    VideoDecodeError,
    crop_region,
    extract,
    extract_to_file,
)
from pose_adapter.backends import BackendUnavailable, BrightSpotBackend, create_backend
from pose_adapter.cli import main

WIDTH, HEIGHT = 320, 240
FPS = 25.0


def make_topo(resolution=(WIDTH, HEIGHT)) -> RouteTopo:
    holds = (
        Hold(0, AABB(Point2(60, 60), Point2(90, 90))),
        Hold(1, AABB(Point2(200, 140), Point2(240, 180)), is_foothold=True),
    )
    return RouteTopo("synthetic", "dotclip", FPS, resolution, holds)


def write_dot_video(path, positions, hidden=()):
    """Render one white dot per frame at the given integer positions."""
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"), FPS, (WIDTH, HEIGHT))
    assert writer.isOpened()
    for i, (x, y) in enumerate(positions):
        frame = np.zeros((HEIGHT, WIDTH, 3), np.uint8)
        if i not in hidden:
            cv2.circle(frame, (x, y), 4, (255, 255, 255), -1)
        writer.write(frame)
    writer.release()


def dot_path(n):
    # Diagonal sweep that stays inside the crop region of make_topo().
    return [(80 + i, 80 + (i * 2) // 3) for i in range(n)]


@pytest.fixture(scope="module")
def dot_clip(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("clips")
    positions = dot_path(100)
    hidden = {40, 41, 42}
    video = tmp / "dot.avi"
    write_dot_video(video, positions, hidden)
    return video, positions, hidden


class TestCropRegion:
    def test_margin_and_clamping(self):
        topo = make_topo()
        x0, y0, x1, y1 = crop_region(topo, margin_fraction=0.15)
        # union is x 60..240, y 60..180; margin = 0.15 * 180 = 27
        assert (x0, y0) == (33, 33)
        assert (x1, y1) == (268, 208)
        full = crop_region(topo, margin_fraction=10.0)
        assert full == (0, 0, WIDTH, HEIGHT)


class TestExtract:
    def test_smoke_schema_conformance(self, dot_clip, tmp_path):
        video, positions, hidden = dot_clip
        stream = extract(video, make_topo(), BrightSpotBackend())
        assert len(stream.frames) == 100
        assert [fr.index for fr in stream.frames] == list(range(100))
        for fr in stream.frames:
            for person in fr.persons:
                for kp in person.keypoints.values():
                    assert 0 <= kp.x < WIDTH and 0 <= kp.y < HEIGHT

    def test_acceptance_mock_backend_round_trip(self, dot_clip, tmp_path):
        # criterion 10: parser-valid stream, <0.5 px coordinate round-trip,
        # inference_ms present on every frame
        video, positions, hidden = dot_clip
        out = tmp_path / "dotclip.keypoints.jsonl"
        stream = extract_to_file(video, make_topo(), BrightSpotBackend(), out)

        parsed = read_keypoints(out)
        assert parsed == stream

        assert all(fr.inference_ms is not None for fr in stream.frames)

        worst = 0.0
        for fr in stream.frames:
            if fr.index in hidden:
                assert fr.persons == ()
                continue
            assert len(fr.persons) == 1
            kp = fr.persons[0].keypoints["right_wrist"]
            x, y = positions[fr.index]
            worst = max(worst, math.hypot(kp.x - x, kp.y - y))
        assert worst < 0.5, f"worst coordinate error {worst:.3f} px"
        print(f"[PASS] criterion 10: mock-backend extraction round-trip "
              f"(worst error {worst:.3f} px)")

    def test_hidden_dot_frames_have_no_fabricated_keypoints(self, dot_clip):
        video, positions, hidden = dot_clip
        stream = extract(video, make_topo(), BrightSpotBackend())
        for i in hidden:
            assert stream.frames[i].persons == ()

    def test_toe_backend_tags_convention(self, dot_clip):
        video, *_ = dot_clip
        backend = create_backend("mock", "left_toe")
        stream = extract(video, make_topo(), backend)
        assert stream.convention == "wrist_toe"
        assert get_convention(stream.convention).foot_anchor_kind is FootAnchorKind.TOE

    def test_resolution_mismatch(self, dot_clip):
        video, *_ = dot_clip
        with pytest.raises(ResolutionMismatch):
            extract(video, make_topo(resolution=(720, 1280)), BrightSpotBackend())

    def test_video_decode_error(self, tmp_path):
        with pytest.raises(VideoDecodeError):
            extract(tmp_path / "missing.avi", make_topo(), BrightSpotBackend())


class TestBackends:
    def test_unknown_backend(self):
        with pytest.raises(BackendUnavailable):
            create_backend("imaginary")

    def test_mock_backend_empty_frame(self):
        frame = np.zeros((50, 50, 3), np.uint8)
        assert BrightSpotBackend().infer(frame) == []

    def test_real_backends_require_their_packages(self):
        # Neither model package ships with the test environment.
        for name in ("mediapipe", "yolov8-pose"):
            try:
                create_backend(name)
            except BackendUnavailable:
                pass


class TestCli:
    def test_extract_command(self, dot_clip, tmp_path, capsys):
        video, *_ = dot_clip
        topo_path = tmp_path / "topo.json"
        from climbkit.annotations import write_topo

        write_topo(topo_path, make_topo())
        out = tmp_path / "stream.jsonl"
        code = main([
            "extract", "--video", str(video), "--topo", str(topo_path),
            "--backend", "mock", "--out", str(out),
        ])
        assert code == 0
        parsed = read_keypoints(out)
        assert len(parsed.frames) == 100
        assert "3 without detections" in capsys.readouterr().out

    def test_missing_video_is_input_error(self, tmp_path):
        topo_path = tmp_path / "topo.json"
        from climbkit.annotations import write_topo

        write_topo(topo_path, make_topo())
        code = main([
            "extract", "--video", str(tmp_path / "none.avi"), "--topo", str(topo_path),
            "--backend", "mock", "--out", str(tmp_path / "s.jsonl"),
        ])
        assert code == 2

    def test_unknown_backend_exit(self, dot_clip, tmp_path):
        video, *_ = dot_clip
        topo_path = tmp_path / "topo.json"
        from climbkit.annotations import write_topo

        write_topo(topo_path, make_topo())
        code = main([
            "extract", "--video", str(video), "--topo", str(topo_path),
            "--backend", "imaginary", "--out", str(tmp_path / "s.jsonl"),
        ])
        assert code == 3
