#!/usr/bin/env python3
"""Write manifest.json for a directory of frames extracted at a fixed rate.

Typical extraction (4 fps, plus a mono 16 kHz audio track):

    ffmpeg -i clip.mp4 -vf fps=4 frames/%05d.png
    ffmpeg -i clip.mp4 -vn -ac 1 -ar 16000 audio.wav
    tools/frames_to_manifest.py --dir . --fps 4 --video-id clip --audio audio.wav

Frame i gets timestamp i / fps. Use --duration when the clip runs past the
last frame (ffprobe -show_entries format=duration clip.mp4).
"""
import argparse
import json
import pathlib
import sys

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".ppm", ".bmp", ".webp"}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--dir", required=True, type=pathlib.Path, help="directory that will hold manifest.json")
    ap.add_argument("--frames", default="frames", help="frame subdirectory, relative to --dir")
    ap.add_argument("--fps", required=True, type=float)
    ap.add_argument("--video-id", required=True)
    ap.add_argument("--audio", help="audio file, relative to --dir")
    ap.add_argument("--duration", type=float)
    args = ap.parse_args()

    if args.fps <= 0:
        ap.error("--fps must be positive")
    frame_dir = args.dir / args.frames
    files = sorted(p for p in frame_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        print(f"no frames found in {frame_dir}", file=sys.stderr)
        return 1

    frames = [
        {"index": i, "timestamp_s": round(i / args.fps, 6), "file": str(p.relative_to(args.dir))}
        for i, p in enumerate(files)
    ]
    duration = args.duration if args.duration is not None else len(files) / args.fps
    manifest = {"video_id": args.video_id, "fps": args.fps, "duration_s": duration, "frames": frames}
    if args.audio:
        if not (args.dir / args.audio).exists():
            print(f"audio file missing: {args.dir / args.audio}", file=sys.stderr)
            return 1
        manifest["audio"] = args.audio

    (args.dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"{len(frames)} frames, {duration:.2f} s -> {args.dir / 'manifest.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
