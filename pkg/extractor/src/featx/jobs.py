"""Extraction jobs: image folders and noun lists in, NTKF files out.

``extract_images`` encodes every decodable image under a directory (row
order = sorted file paths) and writes features plus an ordering manifest.
``extract_anchors`` encodes each noun under each prompt template into one
bank file per template plus a bank manifest, which is exactly what the
clustering engine's anchor loader consumes.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .encoders import DEFAULT_MODEL, Encoder, make_encoder
from .ntkf import write_matrix

# the default prompt pool; one affinity graph per template downstream
DEFAULT_TEMPLATES = [
    "itap of a {}",
    "a bad photo of the {}",
    "a origami {}",
    "a photo of the large {}",
    "a {} in a video game",
    "art of the {}",
    "a photo of the small {}",
]

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".gif", ".webp", ".tif", ".tiff"}


@dataclass
class ExtractionJob:
    output_dir: Path
    image_dir: Path | None = None
    nouns_file: Path | None = None
    templates_file: Path | None = None
    model_name: str = DEFAULT_MODEL
    batch_size: int = 64
    encoder: Encoder | None = field(default=None, repr=False)

    def get_encoder(self) -> Encoder:
        if self.encoder is None:
            self.encoder = make_encoder(self.model_name, self.batch_size)
        return self.encoder

    def templates(self) -> list[str]:
        if self.templates_file is None:
            return list(DEFAULT_TEMPLATES)
        lines = [l.strip() for l in Path(self.templates_file).read_text().splitlines()]
        templates = [l for l in lines if l]
        if not templates:
            raise ValueError(f"{self.templates_file}: no templates")
        for t in templates:
            if t.count("{}") != 1:
                raise ValueError(f"template {t!r} must contain exactly one {{}} placeholder")
        return templates

    def nouns(self) -> list[str]:
        if self.nouns_file is None:
            raise ValueError("anchor extraction needs a nouns_file")
        lines = [l.strip() for l in Path(self.nouns_file).read_text().splitlines()]
        nouns = [l for l in lines if l]
        if not nouns:
            raise ValueError(f"{self.nouns_file}: empty noun list")
        return nouns


def _decodable(path: Path) -> bool:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            img.verify()
        return True
    except (UnidentifiedImageError, OSError):
        return False


def extract_images(job: ExtractionJob) -> Path:
    """Encode a directory of images into features.ntkf + images.manifest.

    The manifest lists one image path per feature row, in row order;
    undecodable files are skipped with a warning and recorded as trailing
    ``# skipped:`` comment lines.
    """
    if job.image_dir is None:
        raise ValueError("image extraction needs an image_dir")
    image_dir = Path(job.image_dir)
    if not image_dir.is_dir():
        raise FileNotFoundError(f"no such image directory: {image_dir}")
    candidates = sorted(
        p for p in image_dir.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not candidates:
        raise ValueError(f"{image_dir}: no image files found")

    kept, skipped = [], []
    for path in candidates:
        if _decodable(path):
            kept.append(path)
        else:
            warnings.warn(f"skipping undecodable image {path}", stacklevel=2)
            skipped.append(path)
    if not kept:
        raise ValueError(f"{image_dir}: no decodable images")

    feats = job.get_encoder().encode_images(kept)

    out = Path(job.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(feats, out / "features.ntkf")
    lines = [f"{p.relative_to(image_dir)}\n" for p in kept]
    lines += [f"# skipped: {p.relative_to(image_dir)} (undecodable)\n" for p in skipped]
    _write_text_atomic(out / "images.manifest", "".join(lines))
    return out / "features.ntkf"


def extract_anchors(job: ExtractionJob) -> Path:
    """Encode each noun under each template into per-prompt bank files.

    Writes anchors_bank_<b>.ntkf per template plus anchors.manifest with
    one ``<template>\\t<file>`` line per bank — the engine-side loader's
    expected format.
    """
    nouns = job.nouns()
    templates = job.templates()
    encoder = job.get_encoder()

    out = Path(job.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_lines = []
    for b, template in enumerate(templates):
        prompts = [template.replace("{}", noun) for noun in nouns]
        bank = encoder.encode_texts(prompts)
        name = f"anchors_bank_{b:03d}.ntkf"
        write_matrix(bank, out / name)
        manifest_lines.append(f"{template}\t{name}\n")
    _write_text_atomic(out / "anchors.manifest", "".join(manifest_lines))
    return out / "anchors.manifest"


def _write_text_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
