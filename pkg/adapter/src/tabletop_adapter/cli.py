"""Command line for the detector adapter."""

from __future__ import annotations

import argparse
import sys

from .backends import AdapterError, HEAD_BACKENDS, OBJECT_BACKENDS, POSE_BACKENDS
from .export import AdapterConfig, export_session


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabletop-export",
        description="Run detector backends over a video and emit an engine session file.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="export one video to a session file")
    p.add_argument("--video", required=True, help="input video path")
    p.add_argument("--out", required=True, help="output session path, or - for stdout")
    p.add_argument("--pose-backend", default="marker", choices=sorted(POSE_BACKENDS))
    p.add_argument("--object-backend", default="hsv", choices=sorted(OBJECT_BACKENDS))
    p.add_argument("--head-backend", default="facial-geometry", choices=sorted(HEAD_BACKENDS))
    p.add_argument("--min-keypoint-conf", type=float, default=0.2)
    p.add_argument("--min-detection-conf", type=float, default=0.2)
    p.add_argument("--fps-override", type=float, default=None)
    p.add_argument("--session-id", default=None)
    p.add_argument("--action-label", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = AdapterConfig(
            video_path=args.video,
            out_path=args.out,
            pose_backend=args.pose_backend,
            object_backend=args.object_backend,
            head_backend=args.head_backend,
            min_keypoint_conf=args.min_keypoint_conf,
            min_detection_conf=args.min_detection_conf,
            fps_override=args.fps_override,
            session_id=args.session_id,
            action_label=args.action_label,
        )
        out_path, n_frames = export_session(cfg)
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if out_path != "-":
        print(f"wrote {n_frames} frames to {out_path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
