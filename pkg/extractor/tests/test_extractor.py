"""Extraction jobs and the file contract with the clustering engine.

The contract tests load extractor output through the engine's validating
reader (``ntkclust.tensorio``), which is the whole point of the shared
NTKF format: two independent codecs, one byte layout.
"""

from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from ntkclust import load_anchor_bank, load_features
from featx import (
    DEFAULT_TEMPLATES,
    ExtractionJob,
    StubEncoder,
    extract_anchors,
    extract_images,
)


def make_images(root: Path, count: int = 3) -> Path:
    image_dir = root / "imgs"
    image_dir.mkdir()
    rng = np.random.default_rng(0)
    for i in range(count):
        pixels = rng.integers(0, 255, size=(8, 8, 3), dtype=np.uint8)
        Image.fromarray(pixels).save(image_dir / f"img_{i}.png")
    return image_dir


def stub_job(root: Path, **kwargs) -> ExtractionJob:
    return ExtractionJob(output_dir=root / "out", model_name="stub-32", **kwargs)


def test_extract_images_writes_features_and_manifest(tmp_path):
    image_dir = make_images(tmp_path, count=3)
    job = stub_job(tmp_path, image_dir=image_dir)
    path = extract_images(job)
    feats = load_features(path)  # engine-side validation: zero violations
    assert feats.shape == (3, 32)
    manifest = (tmp_path / "out" / "images.manifest").read_text().splitlines()
    assert manifest == ["img_0.png", "img_1.png", "img_2.png"]


def test_duplicate_images_give_identical_rows(tmp_path):
    image_dir = make_images(tmp_path, count=2)
    data = (image_dir / "img_0.png").read_bytes()
    (image_dir / "img_0_copy.png").write_bytes(data)
    job = stub_job(tmp_path, image_dir=image_dir)
    feats = load_features(extract_images(job))
    # sorted order: img_0, img_0_copy, img_1
    assert np.array_equal(feats[0], feats[1])
    assert not np.array_equal(feats[0], feats[2])


def test_undecodable_image_skipped_and_recorded(tmp_path):
    image_dir = make_images(tmp_path, count=2)
    (image_dir / "broken.png").write_bytes(b"not an image at all")
    job = stub_job(tmp_path, image_dir=image_dir)
    with pytest.warns(UserWarning, match="undecodable"):
        feats = load_features(extract_images(job))
    assert feats.shape[0] == 2
    manifest = (tmp_path / "out" / "images.manifest").read_text()
    assert "# skipped: broken.png" in manifest


def test_extract_anchors_default_templates(tmp_path):
    nouns = tmp_path / "nouns.txt"
    nouns.write_text("cat\ndog\nship\n")
    job = stub_job(tmp_path, nouns_file=nouns)
    manifest_path = extract_anchors(job)
    bank = load_anchor_bank(manifest_path)  # engine-side validation
    assert bank.n_prompts == len(DEFAULT_TEMPLATES) == 7
    assert bank.n_anchors == 3 and bank.dim == 32
    assert bank.prompt_labels == DEFAULT_TEMPLATES
    assert len(list((tmp_path / "out").glob("anchors_bank_*.ntkf"))) == 7


def test_extract_anchors_custom_template(tmp_path):
    nouns = tmp_path / "nouns.txt"
    nouns.write_text("cat\ndog\n")
    templates = tmp_path / "templates.txt"
    templates.write_text("a photo of a {}\n")
    job = stub_job(tmp_path, nouns_file=nouns, templates_file=templates)
    bank = load_anchor_bank(extract_anchors(job))
    assert bank.n_prompts == 1 and bank.n_anchors == 2
    norms = np.linalg.norm(bank.banks[0], axis=1)
    assert np.abs(norms - 1).max() <= 1e-4


def test_template_placeholder_validated(tmp_path):
    nouns = tmp_path / "nouns.txt"
    nouns.write_text("cat\ndog\n")
    templates = tmp_path / "templates.txt"
    templates.write_text("no placeholder here\n")
    job = stub_job(tmp_path, nouns_file=nouns, templates_file=templates)
    with pytest.raises(ValueError, match="placeholder"):
        extract_anchors(job)


def test_empty_noun_list_rejected(tmp_path):
    nouns = tmp_path / "nouns.txt"
    nouns.write_text("\n\n")
    job = stub_job(tmp_path, nouns_file=nouns)
    with pytest.raises(ValueError, match="empty noun list"):
        extract_anchors(job)


def test_stub_encoder_is_deterministic():
    enc = StubEncoder(dim=16)
    a = enc.encode_texts(["itap of a cat", "itap of a dog"])
    b = enc.encode_texts(["itap of a cat", "itap of a dog"])
    assert np.array_equal(a, b)
    assert np.abs(np.linalg.norm(a, axis=1) - 1).max() < 1e-12


def test_cli_round_trip(tmp_path):
    image_dir = make_images(tmp_path, count=4)
    nouns = tmp_path / "nouns.txt"
    nouns.write_text("cat\ndog\nship\n")
    cfg = tmp_path / "job.txt"
    cfg.write_text(
        f"image_dir={image_dir}\n"
        f"nouns_file={nouns}\n"
        f"model_name=stub-24\n"
        f"output_dir={tmp_path / 'out'}\n"
        "batch_size=2\n"
    )

    def run(*args):
        return subprocess.run(
            [sys.executable, "-m", "featx.cli", *args],
            capture_output=True,
            text=True,
        )

    images = run("images", "--config", str(cfg))
    assert images.returncode == 0, images.stderr
    anchors = run("anchors", "--config", str(cfg))
    assert anchors.returncode == 0, anchors.stderr

    feats = load_features(tmp_path / "out" / "features.ntkf")
    bank = load_anchor_bank(tmp_path / "out" / "anchors.manifest")
    assert feats.shape == (4, 24)
    assert bank.n_prompts == 7 and bank.dim == 24


def test_engine_consumes_extractor_output_end_to_end(tmp_path):
    # stub features are non-semantic, so only the plumbing is asserted:
    # the engine pipeline must run and emit labels on extractor output
    image_dir = make_images(tmp_path, count=12)
    nouns = tmp_path / "nouns.txt"
    nouns.write_text("cat\ndog\n")
    job = stub_job(tmp_path, image_dir=image_dir, nouns_file=nouns)
    extract_images(job)
    extract_anchors(job)

    from ntkclust import PipelineConfig, run_pipeline

    cfg = PipelineConfig(
        features=str(tmp_path / "out" / "features.ntkf"),
        anchors=str(tmp_path / "out" / "anchors.manifest"),
        k=2,
        q=3,
        method="ntk_rad",
        out=str(tmp_path / "cluster_out"),
    )
    result = run_pipeline(cfg)
    assert result.labels.shape == (12,)
    assert (tmp_path / "cluster_out" / "labels.txt").is_file()
