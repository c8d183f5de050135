"""Synthetic manifold datasets, small feature pipelines and file formats.

Dataset files are UTF-8 JSON lines. The first line is a header::

    {"format": "manifold-ds", "version": 1, "kind": "spd", "dim": [d], "n": 120}

(``"dim": [q, d]`` for Grassmann data) and each following line holds one
point as ``{"label": 0, "data": [...]}`` with the matrix in row-major order.
Floats are written with 17 significant digits so a save/load roundtrip is
exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import manifold
from .errors import (
    ConfigError,
    DimensionMismatch,
    ImageTooSmall,
    InvariantViolation,
    IoError,
    NonSymmetric,
    NotPositiveDefinite,
    SchemaError,
    ShapeMismatch,
    TooFewFrames,
)
from .kernel import GramMatrix, KernelSpec
from .manifold import Kind
from .rp import (
    KgrpProjector,
    KorpProjector,
    KpcaRpProjector,
    LandmarkSet,
    Projector,
)

FORMAT = "manifold-ds"
VERSION = 1


@dataclass
class LabeledDataset:
    kind: Kind
    points: np.ndarray  # (n, d, d) or (n, q, d)
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = manifold.as_kind(self.kind)
        self.points = np.asarray(self.points, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.points.ndim != 3:
            raise ShapeMismatch(f"points must be a stack of matrices, got {self.points.shape}")
        if len(self.points) != len(self.labels):
            raise ShapeMismatch(f"{len(self.points)} points but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> list[int]:
        if self.kind is Kind.SPD:
            return [self.points.shape[1]]
        return list(self.points.shape[1:])


def first_invalid(kind, points: np.ndarray) -> tuple[int, str] | None:
    """Index and reason of the first point breaking its type invariants."""
    kind = manifold.as_kind(kind)
    check = manifold.check_spd if kind is Kind.SPD else manifold.check_grassmann
    for i, pt in enumerate(points):
        try:
            check(pt)
        except (NonSymmetric, NotPositiveDefinite, DimensionMismatch) as exc:
            return i, str(exc)
    return None


# ---------------------------------------------------------------------------
# generators

@dataclass(frozen=True)
class SpdClusterParams:
    m: int
    per_cluster: int
    d: int
    center_spread: float = 1.0
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("m", "per_cluster", "d"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.center_spread < 0:
            raise ConfigError(f"center_spread must be >= 0, got {self.center_spread}")


@dataclass(frozen=True)
class GrassmannClusterParams:
    m: int
    per_cluster: int
    q: int
    d: int
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("m", "per_cluster", "q", "d"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.d > self.q:
            raise ConfigError(f"d={self.d} must not exceed q={self.q}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


def _sym_gauss(rng: np.random.Generator, d: int) -> np.ndarray:
    g = rng.standard_normal((d, d))
    return 0.5 * (g + g.T)


def gen_spd_clusters(params: SpdClusterParams) -> LabeledDataset:
    """Clusters of SPD matrices scattered by tangent-space Gaussian noise."""
    rng = np.random.default_rng(params.seed)
    d = params.d
    centers = [manifold.sym_expm(params.center_spread * _sym_gauss(rng, d))
               for _ in range(params.m)]
    points, labels = [], []
    with np.errstate(over="ignore", invalid="ignore"):
        for k, c in enumerate(centers):
            half = manifold.spd_power(c, 0.5)
            for _ in range(params.per_cluster):
                # noise is drawn in normal coordinates at c, so sigma is measured by the metric
                v = half @ (params.noise_sigma * _sym_gauss(rng, d)) @ half
                v = 0.5 * (v + v.T)
                try:
                    pt = manifold.exp_map(c, v, Kind.SPD)
                except np.linalg.LinAlgError:
                    pt = np.full((d, d), np.nan)
                points.append(pt)
                labels.append(k)
    overflow = [i for i, pt in enumerate(points) if not np.isfinite(pt).all()]
    bad = (overflow[0], "overflow") if overflow else first_invalid(Kind.SPD, points)
    if bad is not None:
        raise NotPositiveDefinite(f"generated point {bad[0]} is not SPD ({bad[1]}); "
                                  "lower noise_sigma or center_spread")
    meta = {"generator": "gen_spd_clusters", **{k: str(v) for k, v in vars(params).items()}}
    return LabeledDataset(Kind.SPD, np.stack(points), np.array(labels), meta)


def orthonormalize(a: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def gen_grassmann_clusters(params: GrassmannClusterParams) -> LabeledDataset:
    """Clusters of subspaces around random centre bases."""
    rng = np.random.default_rng(params.seed)
    q, d = params.q, params.d
    centers = [orthonormalize(rng.standard_normal((q, d))) for _ in range(params.m)]
    points, labels = [], []
    for k, c in enumerate(centers):
        for _ in range(params.per_cluster):
            pert = c + params.noise_sigma * rng.standard_normal((q, d))
            points.append(orthonormalize(pert))
            labels.append(k)
    meta = {"generator": "gen_grassmann_clusters",
            **{k: str(v) for k, v in vars(params).items()}}
    return LabeledDataset(Kind.GRASSMANN, np.stack(points), np.array(labels), meta)


# ---------------------------------------------------------------------------
# feature pipelines

def _central_diffs(img: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    pad = [(0, 0), (0, 0)]
    pad[axis] = (1, 1)
    ext = np.pad(img, pad, mode="edge")
    n = img.shape[axis]
    ahead = np.take(ext, np.arange(2, n + 2), axis=axis)
    behind = np.take(ext, np.arange(0, n), axis=axis)
    return 0.5 * (ahead - behind), ahead - 2.0 * img + behind


def pixel_features(image) -> np.ndarray:
    """Per-pixel ``[I, |I_x|, |I_y|, |I_xx|, |I_yy|]`` as an (h*w, 5) array.

    x runs along columns and y along rows. Derivatives are central
    differences with replicated borders.
    """
    img = np.asarray(image, dtype=float)
    dx, dxx = _central_diffs(img, axis=1)
    dy, dyy = _central_diffs(img, axis=0)
    feats = np.stack([img, np.abs(dx), np.abs(dy), np.abs(dxx), np.abs(dyy)], axis=-1)
    return feats.reshape(-1, 5)


def covariance_descriptor(image) -> np.ndarray:
    """5 x 5 region covariance of intensity and derivative magnitudes."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or min(img.shape) < 3:
        raise ImageTooSmall(f"image must be at least 3 x 3, got shape {img.shape}")
    cov = np.cov(pixel_features(img), rowvar=False)
    cov = 0.5 * (cov + cov.T)
    return cov + manifold.SPD_MIN_EIG * np.eye(5)


def image_set_to_grassmann(frames: Sequence, d: int) -> np.ndarray:
    """Orthonormal basis of the leading d-dim subspace spanned by the frames."""
    frames = [np.asarray(f, dtype=float) for f in frames]
    if d < 1 or len(frames) < d:
        raise TooFewFrames(f"need at least d={d} frames, got {len(frames)}")
    shape = frames[0].shape
    for f in frames[1:]:
        if f.shape != shape:
            raise ShapeMismatch(f"frame shape {f.shape} differs from {shape}")
    cols = np.stack([f.ravel() for f in frames], axis=1)
    u, _, _ = np.linalg.svd(cols, full_matrices=False)
    return u[:, :d]


# ---------------------------------------------------------------------------
# dataset files

def _fmt(values) -> str:
    return ", ".join(format(float(v), ".17g") for v in np.ravel(values))


def save_dataset(ds: LabeledDataset, path) -> None:
    header = {"format": FORMAT, "version": VERSION, "kind": ds.kind.value,
              "dim": ds.dim, "n": len(ds)}
    if ds.meta:
        header["meta"] = {str(k): str(v) for k, v in ds.meta.items()}
    lines = [json.dumps(header, sort_keys=False)]
    for label, pt in zip(ds.labels, ds.points):
        lines.append(f'{{"label": {int(label)}, "data": [{_fmt(pt)}]}}')
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _parse_header(line: str) -> tuple[Kind, tuple[int, ...], int, dict]:
    try:
        head = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"header is not valid JSON ({exc.msg})", line=1) from None
    if not isinstance(head, dict) or head.get("format") != FORMAT:
        raise SchemaError(f"header must declare format {FORMAT!r}", line=1)
    if head.get("version") != VERSION:
        raise SchemaError(f"unsupported version {head.get('version')!r}", line=1)
    try:
        kind = Kind(head.get("kind"))
    except ValueError:
        raise SchemaError(f"unknown kind {head.get('kind')!r}", line=1) from None
    dim = head.get("dim")
    want = 1 if kind is Kind.SPD else 2
    if (not isinstance(dim, list) or len(dim) != want
            or not all(isinstance(v, int) and v >= 1 for v in dim)):
        raise SchemaError(f"dim must be a list of {want} positive integers", line=1)
    n = head.get("n")
    if not isinstance(n, int) or n < 0:
        raise SchemaError("n must be a non-negative integer", line=1)
    shape = (dim[0], dim[0]) if kind is Kind.SPD else (dim[0], dim[1])
    meta = head.get("meta", {})
    return kind, shape, n, meta if isinstance(meta, dict) else {}


def load_dataset(path) -> LabeledDataset:
    """Read and validate a dataset file written by :func:`save_dataset`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise SchemaError("file is empty", line=1)
    kind, shape, n, meta = _parse_header(lines[0])
    body = [ln for ln in lines[1:]]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != n:
        raise SchemaError(f"header announces {n} records, found {len(body)}",
                          line=len(body) + 2)
    size = shape[0] * shape[1]
    points = np.empty((n,) + shape)
    labels = np.empty(n, dtype=np.int64)
    for i, line in enumerate(body):
        lineno = i + 2
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON ({exc.msg})", line=lineno) from None
        if not isinstance(rec, dict) or set(rec) != {"label", "data"}:
            raise SchemaError("record must have exactly the keys 'label' and 'data'", line=lineno)
        label, data = rec["label"], rec["data"]
        if not isinstance(label, int) or isinstance(label, bool):
            raise SchemaError("label must be an integer", line=lineno)
        if (not isinstance(data, list) or len(data) != size
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in data)):
            raise SchemaError(f"data must be a list of {size} numbers", line=lineno)
        points[i] = np.asarray(data, dtype=float).reshape(shape)
        labels[i] = label
    bad = first_invalid(kind, points)
    if bad is not None:
        raise InvariantViolation(bad[1], index=bad[0])
    return LabeledDataset(kind, points, labels, dict(meta))


# ---------------------------------------------------------------------------
# projector files

def projector_to_dict(proj: Projector) -> dict:
    out = {
        "spec": proj.spec.to_dict(),
        "landmarks": [int(i) for i in proj.landmarks.indices],
        "gram_s": proj.landmarks.gram_s.values.tolist(),
    }
    if isinstance(proj, KgrpProjector):
        out.update(variant="kgrp", t=proj.t, coef=proj.coef.tolist())
    elif isinstance(proj, KorpProjector):
        out.update(variant="korp", rinv=proj.rinv.tolist())
    elif isinstance(proj, KpcaRpProjector):
        out.update(variant="kpca_rp", alpha=proj.alpha.tolist(),
                   eigvals=proj.eigvals.tolist(), col_means=proj.col_means.tolist(),
                   grand_mean=proj.grand_mean)
    else:
        raise TypeError(f"unknown projector type {type(proj).__name__}")
    return out


def projector_from_dict(obj: dict) -> Projector:
    try:
        spec = KernelSpec.from_dict(obj["spec"])
        landmarks = LandmarkSet(np.asarray(obj["landmarks"], dtype=np.int64),
                                GramMatrix(np.asarray(obj["gram_s"], dtype=float), spec))
        variant = obj["variant"]
        if variant == "kgrp":
            return KgrpProjector(landmarks, np.asarray(obj["coef"], dtype=float), int(obj["t"]))
        if variant == "korp":
            return KorpProjector(landmarks, np.asarray(obj["rinv"], dtype=float))
        if variant == "kpca_rp":
            return KpcaRpProjector(landmarks, np.asarray(obj["alpha"], dtype=float),
                                   np.asarray(obj["eigvals"], dtype=float),
                                   np.asarray(obj["col_means"], dtype=float),
                                   float(obj["grand_mean"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed projector: {exc}") from None
    raise SchemaError(f"unknown projector variant {variant!r}")


def save_projector(proj: Projector, path) -> None:
    try:
        Path(path).write_text(json.dumps(projector_to_dict(proj)), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_projector(path) -> Projector:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON ({exc.msg})", line=exc.lineno) from None
    return projector_from_dict(obj)
