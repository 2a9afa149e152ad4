"""End-to-end pipeline: config schema, validation, and orchestration.

The config is a flat ``key=value`` text file; CLI flags carry exactly the
same names and override file values.  ``validate_config`` collects every
violation (each message starts with the offending key) before any compute
happens; ``run_pipeline`` then executes

    load features (+ anchors) -> per-prompt affinity graphs ->
    ensemble per method -> spectral clustering -> metrics (if labels)

and writes the artifacts (predicted labels, metric report, convergence
trace, optional affinity/embedding dumps, plus a copy of the resolved
config for provenance) into the output directory.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import tensorio
from .diffusion import (
    DiffusionConfig,
    EnsembleState,
    average_affinities,
    average_anchor_banks,
    ensemble_affinities,
    write_trace,
)
from .graph import SparseAffinity, build_affinity, dump_affinity
from .kernels import KERNEL_KINDS, KernelSpec
from .metrics import MetricReport, evaluate, nmi, zero_shot_assign
from .spectral import ClusterResult, KMeansConfig, kmeans, spectral_cluster

METHODS = (
    "ntk_rad",
    "ntk_single_prompt",
    "ntk_naive_avg",
    "ntk_pe",
    "kernel_sc",
    "kmeans_baseline",
    "zero_shot",
)

_ANCHOR_METHODS = ("ntk_rad", "ntk_single_prompt", "ntk_naive_avg", "ntk_pe", "zero_shot")
_DIFFUSED_METHODS = ("ntk_rad", "ntk_single_prompt", "ntk_pe")


class PipelineError(RuntimeError):
    """Pipeline failure, prefixed with the stage that raised it."""


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved pipeline settings; field names double as config/CLI keys."""

    features: str = ""
    anchors: str = ""
    labels: str = ""
    k: int = 2
    method: str = "ntk_rad"
    kernel: str = "rbf"
    tau: float = 0.04
    q: int = 30
    poly_degree: int = 3
    gamma: float = 0.0  # 0 means "1/d at evaluation time"
    coef0: float = 1.0
    mu: float = 0.1
    lam: float = 10.0
    max_outer: int = 50
    max_inner: int = 100
    inner_tol: float = 1e-7
    outer_tol: float = 1e-6
    pattern_restricted: bool = False
    n_init: int = 10
    max_iter: int = 300
    kmeans_tol: float = 1e-6
    row_normalize: bool = True
    dense_cutoff: int = 2048
    seed: int = 0
    out: str = ""
    dump_affinity: bool = False
    dump_embedding: bool = False

    def kernel_spec(self, kind: str | None = None) -> KernelSpec:
        return KernelSpec(
            kind=kind or self.kernel,
            tau=self.tau,
            poly_degree=self.poly_degree,
            poly_coef0=self.coef0,
            gamma=self.gamma if self.gamma > 0 else None,
            sigmoid_coef0=self.coef0,
        )

    def diffusion_config(self) -> DiffusionConfig:
        return DiffusionConfig(
            mu=self.mu,
            lam=self.lam,
            max_outer=self.max_outer,
            max_inner=self.max_inner,
            inner_tol=self.inner_tol,
            outer_tol=self.outer_tol,
            pattern_restricted=self.pattern_restricted,
        )

    def kmeans_config(self) -> KMeansConfig:
        return KMeansConfig(
            n_clusters=self.k,
            n_init=self.n_init,
            max_iter=self.max_iter,
            seed=self.seed,
            tol=self.kmeans_tol,
        )

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{'lambda' if f.name == 'lam' else f.name}={value}\n")
        return "".join(lines)


_FIELD_BY_KEY = {("lambda" if f.name == "lam" else f.name): f for f in fields(PipelineConfig)}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key: str, raw: str):
    f = _FIELD_BY_KEY[key]
    raw = raw.strip()
    if f.type == "bool":
        lowered = raw.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if f.type == "int":
        return int(raw)
    if f.type == "float":
        return float(raw)
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key=value`` lines (# comments allowed) into typed overrides."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{source}:{lineno}: expected key=value, got {stripped!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELD_BY_KEY:
            raise ValueError(f"{source}:{lineno}: unknown config key {key!r}")
        try:
            values[_FIELD_BY_KEY[key].name] = _coerce(key, raw)
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: {exc}") from None
    return values


def load_config(path: str | Path, overrides: dict | None = None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such config file: {path}")
    values = parse_config_text(path.read_text(), source=str(path))
    if overrides:
        values.update(overrides)
    return PipelineConfig(**values)


def _peek_ntkf_shape(path: Path) -> tuple[int, int] | None:
    # header-only read; full validation happens at load time
    try:
        with open(path, "rb") as fh:
            raw = fh.read(25)
        magic, _version, m, d = struct.unpack("<4sB4xQQ", raw)
        if magic != tensorio.MAGIC:
            return None
        return int(m), int(d)
    except (OSError, struct.error):
        return None


def validate_config(cfg: PipelineConfig) -> list[str]:
    """Collect every violation; an empty list means the config is runnable."""
    problems: list[str] = []
    if cfg.method not in METHODS:
        problems.append(f"method: unknown method {cfg.method!r}; choose from {METHODS}")
        return problems

    shape = None
    if not cfg.features:
        problems.append("features: path is required")
    elif not Path(cfg.features).is_file():
        problems.append(f"features: no such file {cfg.features!r}")
    else:
        shape = _peek_ntkf_shape(Path(cfg.features))
        if shape is None:
            problems.append(f"features: {cfg.features!r} is not an NTKF file")

    needs_anchors = cfg.method in _ANCHOR_METHODS
    if needs_anchors and not cfg.anchors:
        problems.append(f"anchors: required for method {cfg.method!r}")
    if cfg.anchors and not Path(cfg.anchors).is_file():
        problems.append(f"anchors: no such manifest {cfg.anchors!r}")

    if cfg.labels and not Path(cfg.labels).is_file():
        problems.append(f"labels: no such file {cfg.labels!r}")

    if cfg.k < 2:
        problems.append(f"k: need at least 2 clusters, got {cfg.k}")
    if cfg.q < 1:
        problems.append(f"q: must be >= 1, got {cfg.q}")
    if shape is not None:
        m = shape[0]
        if cfg.k > m:
            problems.append(f"k: {cfg.k} clusters exceed the {m} samples in the feature file")
        if cfg.q >= m:
            problems.append(f"q: must be < M={m}, got {cfg.q}")
    if not cfg.tau > 0:
        problems.append(f"tau: must be positive, got {cfg.tau}")
    if not cfg.mu > 0:
        problems.append(f"mu: must be positive, got {cfg.mu}")
    if not cfg.lam > 0:
        problems.append(f"lambda: must be positive, got {cfg.lam}")
    if cfg.kernel not in KERNEL_KINDS:
        problems.append(f"kernel: unknown kind {cfg.kernel!r}")
    elif cfg.method == "kernel_sc" and cfg.kernel == "ntk":
        problems.append("kernel: kernel_sc runs the classical zoo; use an ntk_* method instead")
    if cfg.n_init < 1:
        problems.append(f"n_init: must be >= 1, got {cfg.n_init}")
    if cfg.max_iter < 1:
        problems.append(f"max_iter: must be >= 1, got {cfg.max_iter}")
    if cfg.max_outer < 1 or cfg.max_inner < 1:
        problems.append("max_outer/max_inner: iteration caps must be >= 1")
    if not (cfg.inner_tol > 0 and cfg.outer_tol > 0 and cfg.kmeans_tol > 0):
        problems.append("inner_tol/outer_tol/kmeans_tol: tolerances must be positive")
    return problems


@dataclass
class PipelineResult:
    labels: np.ndarray
    report: MetricReport | None
    cluster: ClusterResult | None
    ensemble: EnsembleState | None
    output_dir: Path | None


def _stage(name: str):
    class _Stage:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineError):
                raise PipelineError(f"{name}: {exc}") from exc
            return False

    return _Stage()


def _build_prompt_graphs(
    feats: np.ndarray, bank: tensorio.AnchorBank, cfg: PipelineConfig
) -> list[SparseAffinity]:
    spec = cfg.kernel_spec("ntk")
    return [build_affinity(feats, spec, cfg.q, anchors=anchors) for anchors in bank.banks]


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Execute the configured method and write artifacts; see module docstring."""
    problems = validate_config(cfg)
    if problems:
        raise PipelineError("config: " + "; ".join(problems))

    with _stage("load-features"):
        feats = tensorio.load_features(cfg.features)

    bank = None
    if cfg.method in _ANCHOR_METHODS:
        with _stage("load-anchors"):
            bank = tensorio.load_anchor_bank(cfg.anchors)
            if bank.dim != feats.shape[1]:
                raise ValueError(
                    f"anchor dimension {bank.dim} does not match feature dimension {feats.shape[1]}"
                )
            if cfg.method == "zero_shot" and bank.n_anchors != cfg.k:
                raise ValueError(
                    f"zero_shot needs one anchor per class: bank has {bank.n_anchors}, k={cfg.k}"
                )

    truth = None
    if cfg.labels:
        with _stage("load-labels"):
            truth = tensorio.load_labels(cfg.labels)
            if truth.size != feats.shape[0]:
                raise ValueError(
                    f"label count {truth.size} does not match sample count {feats.shape[0]}"
                )

    ensemble: EnsembleState | None = None
    cluster: ClusterResult | None = None
    nmi_trace: list[float] | None = None
    graphs: list[SparseAffinity] = []

    if cfg.method == "kmeans_baseline":
        with _stage("kmeans"):
            labels = kmeans(feats, cfg.kmeans_config())
    elif cfg.method == "zero_shot":
        with _stage("zero-shot"):
            labels = zero_shot_assign(feats, bank.banks[0], cfg.tau)
    else:
        with _stage("build-affinity"):
            if cfg.method == "kernel_sc":
                graphs = [build_affinity(feats, cfg.kernel_spec(), cfg.q)]
            elif cfg.method == "ntk_pe":
                graphs = [
                    build_affinity(
                        feats, cfg.kernel_spec("ntk"), cfg.q, anchors=average_anchor_banks(bank)
                    )
                ]
            elif cfg.method == "ntk_single_prompt":
                first = tensorio.AnchorBank(
                    banks=[bank.banks[0]], prompt_labels=[bank.prompt_labels[0]]
                )
                graphs = _build_prompt_graphs(feats, first, cfg)
            else:  # ntk_rad, ntk_naive_avg
                graphs = _build_prompt_graphs(feats, bank, cfg)

        with _stage("ensemble"):
            if cfg.method == "kernel_sc":
                consensus = graphs[0].matrix
            elif cfg.method == "ntk_naive_avg":
                consensus = average_affinities(graphs)
            else:
                callback = None
                if truth is not None:
                    nmi_trace = []

                    def callback(_step, a_hat, _beta, _value):
                        snap = spectral_cluster(
                            np.maximum(a_hat, 0.0),
                            cfg.k,
                            kmeans_config=cfg.kmeans_config(),
                            row_normalize=cfg.row_normalize,
                            dense_cutoff=cfg.dense_cutoff,
                        )
                        nmi_trace.append(nmi(snap.labels, truth))

                ensemble = ensemble_affinities(
                    graphs, config=cfg.diffusion_config(), callback=callback
                )
                # diffusion can leave tiny negative values in pattern mode
                consensus = np.maximum(ensemble.a_hat, 0.0)

        with _stage("spectral-clustering"):
            cluster = spectral_cluster(
                consensus,
                cfg.k,
                kmeans_config=cfg.kmeans_config(),
                row_normalize=cfg.row_normalize,
                dense_cutoff=cfg.dense_cutoff,
            )
            labels = cluster.labels

    report = None
    if truth is not None:
        with _stage("metrics"):
            report = evaluate(labels, truth)

    out_dir = None
    if cfg.out:
        with _stage("write-artifacts"):
            out_dir = Path(cfg.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            tensorio.save_labels(labels, out_dir / "labels.txt")
            (out_dir / "config.resolved").write_text(cfg.to_text())
            if report is not None:
                report.write(out_dir / "metrics.txt", out_dir / "metrics.csv")
            if ensemble is not None:
                write_trace(out_dir / "trace.csv", ensemble, nmi_per_iteration=nmi_trace)
            if cfg.dump_affinity and graphs:
                for i, g in enumerate(graphs):
                    dump_affinity(g, out_dir / f"affinity_{i:03d}.txt")
            if cfg.dump_embedding and cluster is not None:
                tensorio.write_matrix(
                    cluster.embedding.vectors, out_dir / "embedding.ntkf"
                )

    return PipelineResult(
        labels=labels,
        report=report,
        cluster=cluster,
        ensemble=ensemble,
        output_dir=out_dir,
    )
