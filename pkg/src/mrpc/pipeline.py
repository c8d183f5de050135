"""End-to-end clustering runs and the repeated-run benchmark protocol.

The command line tool is a thin layer over this module: every run and
benchmark it performs can be reproduced by calling :func:`run_method` or
:func:`bench` directly.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import cluster, evaluation, kernel, rp
from .data import LabeledDataset
from .errors import ConfigError, InvalidSize, KindMismatch

PROJECTION_METHODS = ("kgrp", "korp", "kpca_rp")
BASELINE_METHODS = ("loge", "kernel_kmeans", "kpca", "intrinsic")
METHODS = PROJECTION_METHODS + BASELINE_METHODS
KERNEL_METHODS = PROJECTION_METHODS + ("kernel_kmeans", "kpca")

CSV_FIELDS = ["method", "seed_projection", "seed_kmeans", "ri", "cp", "f_measure",
              "nmi", "runtime_s", "n", "m", "p"]

_STREAM_PROJECTION = 0
_STREAM_KMEANS = 1


@dataclass(frozen=True)
class RunConfig:
    method: str
    m: int
    kernel: dict = field(default_factory=dict)
    p: int | None = None
    b: int = rp.DEFAULT_B
    t: int | None = None
    seed: int = 0
    restarts: int = 10
    repeats_projection: int = 10
    repeats_kmeans: int = 10

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}; got {self.method!r}")
        if not isinstance(self.kernel, dict):
            raise ConfigError("kernel must be an object with 'family' and optional 'beta'")
        unknown = set(self.kernel) - {"family", "beta"}
        if unknown:
            raise ConfigError(f"unknown kernel keys: {', '.join(sorted(unknown))}")
        if self.method in KERNEL_METHODS and "family" not in self.kernel:
            raise ConfigError(f"method {self.method} needs kernel.family")
        for name in ("m", "b", "restarts", "repeats_projection", "repeats_kmeans"):
            val = getattr(self, name)
            if not isinstance(val, int) or val < 1:
                raise ConfigError(f"{name} must be a positive integer, got {val!r}")
        for name in ("p", "t"):
            val = getattr(self, name)
            if val is not None and (not isinstance(val, int) or val < 1):
                raise ConfigError(f"{name} must be a positive integer, got {val!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        if not isinstance(obj, dict):
            raise ConfigError("run config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        missing = {"method", "m"} - set(obj)
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(sorted(missing))}")
        return cls(**obj)

    def to_dict(self) -> dict:
        return asdict(self)


def derive_seed(master: int, stream: int, *counters: int) -> int:
    """Child seed from a master seed, a stream id and repeat counters."""
    ss = np.random.SeedSequence([master, stream, *counters])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def kernel_spec(cfg: RunConfig, ds: LabeledDataset) -> kernel.KernelSpec:
    try:
        family = kernel.Family(cfg.kernel.get("family"))
    except ValueError:
        raise ConfigError(f"unknown kernel family {cfg.kernel.get('family')!r}") from None
    if family.kind is not ds.kind:
        raise KindMismatch(f"{family.value} kernel cannot be used on {ds.kind.value} data")
    beta = cfg.kernel.get("beta")
    if beta is None:
        beta = kernel.default_beta(family, ds.points)
    spec = kernel.KernelSpec(family, beta)
    kernel.check_admissible(spec, ds.points.shape[1])
    return spec


def landmark_count(cfg: RunConfig, n: int) -> int:
    p = cfg.p if cfg.p is not None else min(n, rp.DEFAULT_P)
    if p > n:
        raise InvalidSize(f"p={p} exceeds the dataset size n={n}")
    return p


def project(cfg: RunConfig, ds: LabeledDataset, spec: kernel.KernelSpec,
            seed: int) -> np.ndarray:
    """Landmark Gram, projector fit and embedding for one projection method."""
    p = landmark_count(cfg, len(ds))
    landmarks = rp.build_landmarks(spec, ds.points, p, seed)
    cross = kernel.gram(spec, ds.points, ds.points[landmarks.indices])
    if cfg.method == "kgrp":
        proj = rp.fit_kgrp(landmarks, cfg.b, cfg.t, seed=seed)
    elif cfg.method == "korp":
        proj = rp.fit_korp(landmarks)
    else:
        proj = rp.fit_kpca_rp(landmarks)
    return proj.embed(cross)


def _kmeans_cfg(cfg: RunConfig, seed: int) -> cluster.KmeansConfig:
    return cluster.KmeansConfig(m=cfg.m, restarts=cfg.restarts, seed=seed)


def run_baseline(cfg: RunConfig, ds: LabeledDataset, seed_kmeans: int,
                 spec: kernel.KernelSpec | None = None) -> cluster.ClusterResult:
    kcfg = _kmeans_cfg(cfg, seed_kmeans)
    if cfg.method == "loge":
        return cluster.kmeans(cluster.loge_embed(ds.points, ds.kind), kcfg)
    if cfg.method == "intrinsic":
        return cluster.intrinsic_kmeans(ds.points, ds.kind, kcfg)
    if spec is None:
        spec = kernel_spec(cfg, ds)
    full = kernel.gram(spec, ds.points)
    if cfg.method == "kernel_kmeans":
        return cluster.kernel_kmeans(full, kcfg)
    return cluster.kpca_kmeans(full, None, kcfg)


def run_method(cfg: RunConfig, ds: LabeledDataset, seed_projection: int | None = None,
               seed_kmeans: int | None = None) -> tuple[cluster.ClusterResult, evaluation.QualityReport]:
    """One full pipeline run, timed from Gram/feature computation to final labels."""
    if seed_projection is None:
        seed_projection = derive_seed(cfg.seed, _STREAM_PROJECTION, 0)
    if seed_kmeans is None:
        seed_kmeans = derive_seed(cfg.seed, _STREAM_KMEANS, 0, 0)
    # kernel parameters are settled before the clock starts
    spec = kernel_spec(cfg, ds) if cfg.method in KERNEL_METHODS else None
    start = time.perf_counter()
    if cfg.method in PROJECTION_METHODS:
        emb = project(cfg, ds, spec, seed_projection)
        res = cluster.kmeans(emb, _kmeans_cfg(cfg, seed_kmeans))
    else:
        res = run_baseline(cfg, ds, seed_kmeans, spec)
    elapsed = time.perf_counter() - start
    res.runtime_s = elapsed
    return res, evaluation.quality(res.labels, ds.labels, elapsed)


@dataclass
class BenchRecord:
    method: str
    seed_projection: int | None
    seed_kmeans: int
    ri: float
    cp: float
    f_measure: float
    nmi: float
    runtime_s: float
    n: int
    m: int
    p: int | None


def bench(cfg: RunConfig, ds: LabeledDataset) -> list[BenchRecord]:
    """Repeated runs: projections x K-means seeds, or K-means seeds alone for baselines."""
    n = len(ds)
    records = []
    if cfg.method in PROJECTION_METHODS:
        spec = kernel_spec(cfg, ds)
        p = landmark_count(cfg, n)
        for i in range(cfg.repeats_projection):
            seed_p = derive_seed(cfg.seed, _STREAM_PROJECTION, i)
            start = time.perf_counter()
            emb = project(cfg, ds, spec, seed_p)
            proj_time = time.perf_counter() - start
            for j in range(cfg.repeats_kmeans):
                seed_k = derive_seed(cfg.seed, _STREAM_KMEANS, i, j)
                res = cluster.kmeans(emb, _kmeans_cfg(cfg, seed_k))
                q = evaluation.quality(res.labels, ds.labels)
                records.append(BenchRecord(cfg.method, seed_p, seed_k, q.ri, q.cp, q.f_measure,
                                           q.nmi, proj_time + res.runtime_s, n, cfg.m, p))
    else:
        p = n if cfg.method in ("kernel_kmeans", "kpca") else None
        for j in range(cfg.repeats_kmeans):
            seed_k = derive_seed(cfg.seed, _STREAM_KMEANS, 0, j)
            res, q = run_method(cfg, ds, seed_kmeans=seed_k)
            records.append(BenchRecord(cfg.method, None, seed_k, q.ri, q.cp, q.f_measure,
                                       q.nmi, q.runtime_s, n, cfg.m, p))
    return records


def records_to_csv(records: list[BenchRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        row = asdict(rec)
        for key in ("ri", "cp", "f_measure", "nmi", "runtime_s"):
            row[key] = format(row[key], ".17g")
        row = {k: "" if v is None else v for k, v in row.items()}
        writer.writerow(row)
    return buf.getvalue()


def aggregate(records: list[BenchRecord]) -> dict:
    """Mean and standard deviation per metric plus the mean runtime."""
    out = {}
    for key in ("ri", "cp", "f_measure", "nmi"):
        vals = np.array([getattr(r, key) for r in records])
        out[key] = (float(vals.mean()), float(vals.std()))
    out["runtime_s"] = float(np.mean([r.runtime_s for r in records]))
    return out
