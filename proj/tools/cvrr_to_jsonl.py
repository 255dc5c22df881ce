#!/usr/bin/env python3
"""Convert CVRR-ES style annotations to the dataset format read by `dive bench`.

Expects one directory per category, each holding a JSON annotation file with
a list of {"VideoID": ..., "Q": ..., "A": ...} records. Video ids are the file
stem of VideoID, so frames for "clip_12.mp4" belong in <videos>/clip_12/.
"""
import argparse
import json
import pathlib
import sys


def records(category_dir: pathlib.Path):
    for ann in sorted(category_dir.glob("*.json")):
        data = json.loads(ann.read_text())
        if isinstance(data, dict):
            data = next((v for v in data.values() if isinstance(v, list)), [])
        yield from data


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("root", type=pathlib.Path, help="benchmark root with one folder per category")
    ap.add_argument("-o", "--out", type=pathlib.Path, default=pathlib.Path("dataset.jsonl"))
    args = ap.parse_args()

    n = 0
    with args.out.open("w") as out:
        for category_dir in sorted(p for p in args.root.iterdir() if p.is_dir()):
            category = category_dir.name.replace("_", " ")
            for k, rec in enumerate(records(category_dir)):
                video = pathlib.PurePath(rec["VideoID"]).stem
                line = {
                    "item_id": f"{category_dir.name}-{k:04d}",
                    "video_id": video,
                    "question": rec["Q"].strip(),
                    "reference_answer": rec["A"].strip(),
                    "category": category,
                }
                out.write(json.dumps(line, ensure_ascii=False) + "\n")
                n += 1
    print(f"wrote {n} items to {args.out}", file=sys.stderr)
    return 0 if n else 1


if __name__ == "__main__":
    sys.exit(main())
