"""Extraction CLI.

    extract images  --config job.txt
    extract anchors --config job.txt

The config is flat key=value text with keys: image_dir, nouns_file,
templates_file, model_name, output_dir, batch_size.  Omitted keys take
their defaults (model_name defaults to the ViT-B/32 checkpoint; the
template pool defaults to the built-in seven prompts).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .jobs import ExtractionJob, extract_anchors, extract_images

_KEYS = {"image_dir", "nouns_file", "templates_file", "model_name", "output_dir", "batch_size"}


def load_job(path: str | Path) -> ExtractionJob:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such config file: {path}")
    values: dict = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = raw
    if "output_dir" not in values:
        raise ValueError(f"{path}: output_dir is required")
    return ExtractionJob(
        output_dir=Path(values["output_dir"]),
        image_dir=Path(values["image_dir"]) if "image_dir" in values else None,
        nouns_file=Path(values["nouns_file"]) if "nouns_file" in values else None,
        templates_file=Path(values["templates_file"]) if "templates_file" in values else None,
        model_name=values.get("model_name", ExtractionJob.model_name),
        batch_size=int(values.get("batch_size", ExtractionJob.batch_size)),
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="extract", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("images", "anchors"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
    args = parser.parse_args(argv)

    try:
        job = load_job(args.config)
        if args.command == "images":
            written = extract_images(job)
        else:
            written = extract_anchors(job)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"extract {args.command}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {written}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
