"""`pose-adapter extract`: turn a climbing video into a keypoint stream file."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from climbkit.annotations import AnnotationError, read_topo

from .adapter import DEFAULT_MARGIN_FRACTION, ResolutionMismatch, VideoDecodeError, extract_to_file
from .backends import BackendUnavailable, create_backend


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pose-adapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="run a pose backend over a video")
    p.add_argument("--video", required=True)
    p.add_argument("--topo", required=True)
    p.add_argument("--backend", required=True, help="mock, mediapipe, or yolov8-pose")
    p.add_argument("--out", required=True, help="output keypoint stream (.jsonl)")
    p.add_argument("--variant", default="", help="backend model variant")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN_FRACTION,
                   help="crop margin as a fraction of the hold-region width")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        video = Path(args.video)
        topo_path = Path(args.topo)
        if not video.is_file():
            print(f"error: video not found: {video}", file=sys.stderr)
            return 2
        if not topo_path.is_file():
            print(f"error: topo not found: {topo_path}", file=sys.stderr)
            return 2
        topo = read_topo(topo_path)
        backend = create_backend(args.backend, args.variant)
        stream = extract_to_file(video, topo, backend, args.out, args.margin)
    except (AnnotationError, VideoDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ResolutionMismatch, BackendUnavailable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    missing = sum(1 for fr in stream.frames if not fr.persons)
    print(
        f"wrote {args.out}: {len(stream.frames)} frames, {missing} without detections, "
        f"convention {stream.convention}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
