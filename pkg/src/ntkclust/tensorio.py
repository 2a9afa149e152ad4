"""Binary and text I/O for feature matrices, anchor banks, and labels.

Feature matrices travel in a fixed little-endian container ("NTKF"):

    bytes 0-3    magic ``b"NTKF"``
    byte  4      format version, currently 1
    bytes 5-8    reserved, must be zero
    bytes 9-16   row count M, unsigned 64-bit
    bytes 17-24  column count d, unsigned 64-bit
    remainder    M*d IEEE-754 float32 values, row-major

Payloads are 32-bit on disk; loaders promote to float64 so all in-memory
computation runs at full precision.  The loader validates instead of
repairing: rows are required to sit on the unit sphere to within
``NORM_TOL``, so a producer-side normalization bug surfaces as an error
here rather than as silent drift downstream.

Labels are a plain text sidecar, one non-negative integer per line, so
hand-made fixtures stay trivial to write.  An anchor bank is one NTKF
file per prompt plus a manifest listing ``<prompt label>\\t<file path>``
per line (paths resolved relative to the manifest).
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"NTKF"
VERSION = 1
NORM_TOL = 1e-4

_HEADER = struct.Struct("<4sB4xQQ")


class FormatError(ValueError):
    """File does not conform to the NTKF container layout."""


class ValidationError(ValueError):
    """In-memory data violates a declared invariant."""


def validate_features(feats: np.ndarray, *, name: str = "features") -> None:
    """Check the feature-matrix invariants, raising ValidationError on the first failure.

    A valid matrix is 2-D with M >= 2 rows, d >= 2 columns, finite entries,
    and every row unit-norm to within NORM_TOL.
    """
    if feats.ndim != 2:
        raise ValidationError(f"{name}: expected a 2-D matrix, got ndim={feats.ndim}")
    m, d = feats.shape
    if m < 2 or d < 2:
        raise ValidationError(f"{name}: need M >= 2 and d >= 2, got {m}x{d}")
    if not np.isfinite(feats).all():
        raise ValidationError(f"{name}: matrix contains non-finite values")
    norms = np.linalg.norm(feats, axis=1)
    off = np.abs(norms - 1.0)
    worst = int(np.argmax(off))
    if off[worst] > NORM_TOL:
        raise ValidationError(
            f"{name}: row {worst} has norm {norms[worst]:.6f}, "
            f"off unit by more than {NORM_TOL:g}"
        )


def write_matrix(mat: np.ndarray, path: str | Path) -> None:
    """Write any 2-D real matrix in NTKF layout (no unit-norm requirement).

    Used directly for embedding dumps; feature files go through
    save_features, which validates first.
    """
    mat = np.asarray(mat)
    if mat.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got ndim={mat.ndim}")
    m, d = mat.shape
    payload = np.ascontiguousarray(mat, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, m, d))
        fh.write(payload.tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    """Read an NTKF file into a float64 array, checking only the container layout."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such feature file: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, m, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if any(raw[5:9]):
        raise FormatError(f"{path}: reserved header bytes are not zero")
    expected = _HEADER.size + 4 * m * d
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload length mismatch (header says {m}x{d}, "
            f"file has {len(raw) - _HEADER.size} payload bytes, want {4 * m * d})"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return data.reshape(m, d).astype(np.float64)


def save_features(feats: np.ndarray, path: str | Path) -> None:
    """Validate and persist a feature matrix; payload is bit-exact under round-trip."""
    feats = np.asarray(feats, dtype=np.float64)
    validate_features(feats)
    write_matrix(feats, path)


def load_features(path: str | Path) -> np.ndarray:
    """Load and validate a feature matrix.

    Rows are *not* re-normalized: a row off the unit sphere by more than
    NORM_TOL is an error, by design.
    """
    feats = read_matrix(path)
    validate_features(feats, name=str(path))
    return feats


def load_labels(path: str | Path) -> np.ndarray:
    """Read a label file (one non-negative integer per line) as an int64 vector.

    The implied cluster count is max(labels) + 1 and must be at least 2.
    Blank lines are ignored; anything non-integer or negative is an error.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such label file: {path}")
    values: list[int] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.strip()
        if not text:
            continue
        try:
            value = int(text)
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: not an integer: {text!r}") from None
        if value < 0:
            raise ValidationError(f"{path}:{lineno}: negative label {value}")
        values.append(value)
    if not values:
        raise ValidationError(f"{path}: empty label file")
    labels = np.asarray(values, dtype=np.int64)
    if labels.max() + 1 < 2:
        raise ValidationError(f"{path}: labels imply a single cluster (K must be >= 2)")
    return labels


def save_labels(labels: np.ndarray, path: str | Path) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValidationError("labels must be a 1-D vector")
    if labels.size and labels.min() < 0:
        raise ValidationError("labels must be non-negative")
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels))


@dataclass
class AnchorBank:
    """B prompt-indexed anchor matrices, each N x d, plus the prompt strings.

    All banks share N and d; rows are unit-norm (same contract as image
    features).  This is the engine-side view of one extractor run.
    """

    banks: list[np.ndarray]
    prompt_labels: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.banks:
            raise ValidationError("anchor bank needs at least one prompt matrix")
        if not self.prompt_labels:
            self.prompt_labels = [f"prompt-{i}" for i in range(len(self.banks))]
        if len(self.prompt_labels) != len(self.banks):
            raise ValidationError("prompt label count does not match bank count")
        shape = self.banks[0].shape
        for i, bank in enumerate(self.banks):
            if bank.shape != shape:
                raise ValidationError(
                    f"anchor bank {i} has shape {bank.shape}, expected {shape}"
                )
            validate_features(bank, name=f"anchor bank {i}")

    @property
    def n_prompts(self) -> int:
        return len(self.banks)

    @property
    def n_anchors(self) -> int:
        return self.banks[0].shape[0]

    @property
    def dim(self) -> int:
        return self.banks[0].shape[1]


def load_anchor_bank(manifest_path: str | Path) -> AnchorBank:
    """Load an anchor bank from its manifest (``<prompt>\\t<ntkf path>`` per line)."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no such anchor manifest: {manifest_path}")
    banks: list[np.ndarray] = []
    labels: list[str] = []
    for lineno, line in enumerate(manifest_path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise FormatError(
                f"{manifest_path}:{lineno}: expected '<prompt>\\t<path>', got {line!r}"
            )
        prompt, rel = line.split("\t", 1)
        banks.append(load_features(manifest_path.parent / rel.strip()))
        labels.append(prompt)
    if not banks:
        raise FormatError(f"{manifest_path}: empty manifest")
    return AnchorBank(banks=banks, prompt_labels=labels)


def save_anchor_bank(bank: AnchorBank, manifest_path: str | Path) -> None:
    """Write one NTKF file per prompt next to the manifest, then the manifest itself."""
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, (mat, prompt) in enumerate(zip(bank.banks, bank.prompt_labels)):
        if "\t" in prompt or "\n" in prompt:
            warnings.warn(f"prompt {i} contains tab/newline; replacing with spaces")
            prompt = prompt.replace("\t", " ").replace("\n", " ")
        name = f"{manifest_path.stem}_bank_{i:03d}.ntkf"
        save_features(mat, manifest_path.parent / name)
        lines.append(f"{prompt}\t{name}\n")
    manifest_path.write_text("".join(lines))
