"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The lines are printed in pytest's terminal summary (and directly when this
file is run as a script).
"""

import itertools
import math
import sys
import time

import numpy as np
import pytest
import scipy.linalg as sla

import conftest
from conftest import random_basis, random_spd, random_spd_stack
from mrpc import cluster, data, evaluation as ev, kernel, manifold, pipeline, rp
from mrpc.kernel import KernelSpec


def report(number, title, ok, detail, elapsed, limit):
    ok = ok and elapsed < limit
    line = (f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail} "
            f"({elapsed:.2f}s, limit {limit:g}s)")
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# -- 1 ------------------------------------------------------------------------

def test_c1_korp_exactness():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(20):
        p = int(rng.integers(5, 61))
        pts = random_spd_stack(rng, p, 3)
        spec = KernelSpec("gaussian_led", kernel.default_beta("gaussian_led", pts))
        lm = rp.LandmarkSet(np.arange(p), kernel.gram(spec, pts))
        emb = rp.fit_korp(lm).embed(lm.gram_s)
        worst = max(worst, np.abs(emb @ emb.T - lm.gram_s.values).max())
    report(1, "KORP landmark Gram reproduction", worst <= 1e-8,
           f"max |XX^T - K_S| = {worst:.2e} (tol 1e-8, 20 sets)",
           time.perf_counter() - start, 5)


# -- 2 ------------------------------------------------------------------------

def test_c2_kpca_gram_reproduction():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    worst, dims_ok = 0.0, True
    for _ in range(20):
        p = int(rng.integers(5, 61))
        pts = random_spd_stack(rng, p, 3)
        spec = KernelSpec("gaussian_led", kernel.default_beta("gaussian_led", pts))
        lm = rp.LandmarkSet(np.arange(p), kernel.gram(spec, pts))
        proj = rp.fit_kpca_rp(lm)
        emb = proj.embed(lm.gram_s)
        worst = max(worst, np.abs(emb @ emb.T - rp.double_centre(lm.gram_s.values)).max())
        dims_ok &= proj.dim <= p - 1
    report(2, "KPCA-RP centred Gram reproduction", worst <= 1e-8 and dims_ok,
           f"max error {worst:.2e} (tol 1e-8), dim <= p-1: {dims_ok}",
           time.perf_counter() - start, 5)


# -- 3 ------------------------------------------------------------------------

def _distortion(spec, pts, proj, lm):
    emb = proj.embed(kernel.gram(spec, pts, pts[lm.indices]))
    K = kernel.gram(spec, pts).values
    d = np.diag(K)
    rkhs = np.sqrt(np.maximum(d[:, None] + d[None] - 2 * K, 0.0))
    projected = np.linalg.norm(emb[:, None] - emb[None], axis=-1)
    iu = np.triu_indices(len(pts), 1)
    rel = np.abs(projected[iu] - rkhs[iu]) / rkhs[iu]
    return float(np.median(rel)), float((projected[iu] - rkhs[iu]).max())


def test_c3_jl_distortion():
    start = time.perf_counter()
    ds = data.gen_spd_clusters(data.SpdClusterParams(m=4, per_cluster=50, d=3,
                                                     noise_sigma=0.3, seed=3))
    spec = KernelSpec("gaussian_led", kernel.default_beta("gaussian_led", ds.points))
    lm = rp.build_landmarks(spec, ds.points, 100, seed=0)
    korp = _distortion(spec, ds.points, rp.fit_korp(lm), lm)
    kpca = _distortion(spec, ds.points, rp.fit_kpca_rp(lm), lm)
    kgrp = _distortion(spec, ds.points, rp.fit_kgrp(lm, b=300, seed=1), lm)
    ok = (korp[0] <= 0.25 and kpca[0] <= 0.25 and korp[1] <= 1e-6 and kpca[1] <= 1e-6
          and kgrp[0] <= 0.35)
    detail = (f"median distortion KORP {korp[0]:.4f}, KPCA-RP {kpca[0]:.4f} (<= 0.25), "
              f"KGRP {kgrp[0]:.4f} (<= 0.35); max expansion KORP {korp[1]:.1e}, "
              f"KPCA-RP {kpca[1]:.1e} (<= 1e-6)")
    report(3, "JL distortion", ok, detail, time.perf_counter() - start, 30)


# -- 4 ------------------------------------------------------------------------

def _mean_quality(ds, method, family):
    cps, ris = [], []
    for seed in range(10):
        cfg = pipeline.RunConfig(method=method, m=3, kernel={"family": family}, seed=seed)
        _, q = pipeline.run_method(cfg, ds)
        cps.append(q.cp)
        ris.append(q.ri)
    return float(np.mean(cps)), float(np.mean(ris))


def test_c4_quality_parity():
    start = time.perf_counter()
    settings = [
        ("spd", "gaussian_led", data.gen_spd_clusters(
            data.SpdClusterParams(m=3, per_cluster=60, d=3, noise_sigma=0.3, seed=0))),
        ("grassmann", "projection", data.gen_grassmann_clusters(
            data.GrassmannClusterParams(m=3, per_cluster=60, q=10, d=2, noise_sigma=0.2, seed=0))),
    ]
    ok, parts = True, []
    for name, family, ds in settings:
        ref_cp, ref_ri = _mean_quality(ds, "kernel_kmeans", family)
        ok &= 0.9 <= ref_cp <= 1.0
        gaps = []
        for method in pipeline.PROJECTION_METHODS:
            cp, ri = _mean_quality(ds, method, family)
            gap = max(abs(cp - ref_cp), abs(ri - ref_ri))
            ok &= gap <= 0.05
            gaps.append(f"{method} {gap:.3f}")
        parts.append(f"{name}: kernel_kmeans purity {ref_cp:.3f}, max gap " + ", ".join(gaps))
    report(4, "quality parity with kernel K-means", ok, "; ".join(parts) + " (tol 0.05)",
           time.perf_counter() - start, 120)


# -- 5 ------------------------------------------------------------------------

def _median_runtime(method, ds, reps=3):
    cfg = pipeline.RunConfig(method=method, m=4, kernel={"family": "gaussian_led"}, p=60)
    return float(np.median([pipeline.run_method(cfg, ds)[1].runtime_s for _ in range(reps)]))


def test_c5_speed_scaling():
    start = time.perf_counter()
    times = {}
    for n in (500, 1000, 2000):
        ds = data.gen_spd_clusters(data.SpdClusterParams(m=4, per_cluster=n // 4, d=3,
                                                         noise_sigma=0.5, seed=0))
        times[n] = (_median_runtime("korp", ds), _median_runtime("kernel_kmeans", ds))
    korp_growth = times[2000][0] / times[500][0]
    kkm_growth = times[2000][1] / times[500][1]
    speedup = times[2000][1] / times[2000][0]
    ok = korp_growth <= 6 and kkm_growth >= 10 and speedup >= 3
    detail = (f"KORP growth {korp_growth:.2f} (<= 6), kernel_kmeans growth {kkm_growth:.2f} "
              f"(>= 10), speedup at n=2000 {speedup:.2f} (>= 3)")
    report(5, "speed scaling", ok, detail, time.perf_counter() - start, 600)


# -- 6 ------------------------------------------------------------------------

def _partitions(n, max_blocks=3):
    """Every partition of n points into at most max_blocks labelled-canonically blocks."""
    out = []
    for labels in itertools.product(range(max_blocks), repeat=n):
        seen = -1
        for v in labels:
            if v > seen + 1:
                break
            seen = max(seen, v)
        else:
            out.append(labels)
    return out


def _pair_oracle(parts, n):
    """Brute force: co-membership of every point pair, then pair agreement counts."""
    pairs = list(itertools.combinations(range(n), 2))
    co = np.array([[lab[i] == lab[j] for i, j in pairs] for lab in parts], dtype=np.int64)
    tp = co @ co.T
    same_p = co.sum(axis=1)[:, None]
    same_t = co.sum(axis=1)[None, :]
    fp, fn = same_p - tp, same_t - tp
    tn = len(pairs) - tp - fp - fn
    return tp, fp, fn, tn


def _nmi_oracle(pred, truth):
    n = len(pred)
    h_p = -sum(c / n * math.log(c / n) for c in np.unique(pred, return_counts=True)[1])
    h_t = -sum(c / n * math.log(c / n) for c in np.unique(truth, return_counts=True)[1])
    mi = 0.0
    for a in set(pred.tolist()):
        for b in set(truth.tolist()):
            nab = int(np.sum((pred == a) & (truth == b)))
            if nab:
                mi += nab / n * math.log(n * nab / (np.sum(pred == a) * np.sum(truth == b)))
    if h_p == 0 and h_t == 0:
        return 1.0
    if h_p == 0 or h_t == 0:
        return 0.0
    return mi / math.sqrt(h_p * h_t)


def test_c6_metric_oracles():
    start = time.perf_counter()
    worst_pair, checked = 0.0, 0
    for n in range(2, 9):
        parts = _partitions(n)
        tp, fp, fn, tn = _pair_oracle(parts, n)
        ri_oracle = (tp + tn) / (tp + fp + fn + tn)
        with np.errstate(invalid="ignore", divide="ignore"):
            f_oracle = np.where(tp == 0, 0.0, 2 * tp / (2 * tp + fp + fn))
        arrays = [np.array(lab) for lab in parts]
        ri = np.array([[ev.rand_index(a, b) for b in arrays] for a in arrays])
        f = np.array([[ev.f_measure(a, b) for b in arrays] for a in arrays])
        worst_pair = max(worst_pair, np.abs(ri - ri_oracle).max(), np.abs(f - f_oracle).max())
        checked += len(parts) ** 2
    rng = np.random.default_rng(6)
    worst_nmi = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        pred = rng.integers(0, int(rng.integers(1, 6)), n)
        truth = rng.integers(0, int(rng.integers(1, 6)), n)
        worst_nmi = max(worst_nmi, abs(ev.nmi(pred, truth) - _nmi_oracle(pred, truth)))
    truth, pred = [0, 0, 1, 1], [0, 1, 1, 1]
    worked = (ev.rand_index(pred, truth), ev.purity(pred, truth), ev.f_measure(pred, truth))
    worked_ok = np.allclose(worked, (0.5, 0.75, 0.4), atol=1e-12)
    ok = worst_pair <= 1e-12 and worst_nmi <= 1e-10 and worked_ok
    detail = (f"{checked} labeling pairs, max RI/F error {worst_pair:.1e}; "
              f"NMI max error {worst_nmi:.1e} (tol 1e-10); worked example "
              f"RI {worked[0]:.2f} CP {worked[1]:.2f} F {worked[2]:.2f}")
    report(6, "metric oracles", ok, detail, time.perf_counter() - start, 30)


# -- 7 ------------------------------------------------------------------------

def test_c7_geometry():
    start = time.perf_counter()
    rng = np.random.default_rng(707)
    rt = 0.0
    for _ in range(50):
        X, Y = random_spd(rng, 4), random_spd(rng, 4)
        rt = max(rt, np.abs(manifold.exp_map(X, manifold.log_map(X, Y, "spd"), "spd") - Y).max())
        A, B = random_basis(rng, 7, 3), random_basis(rng, 7, 3)
        back = manifold.exp_map(A, manifold.log_map(A, B, "grassmann"), "grassmann")
        rt = max(rt, manifold.grassmann_distance(back, B))
    mid = 0.0
    for _ in range(20):
        X, Y = random_spd(rng, 3), random_spd(rng, 3)
        h = sla.sqrtm(X).real
        ih = np.linalg.inv(h)
        closed = h @ sla.sqrtm(ih @ Y @ ih).real @ h
        mid = max(mid, np.abs(manifold.karcher_mean([X, Y], "spd").point - closed).max())
    psd = np.inf
    for beta in (0.5, 1.0, 1.5):
        for _ in range(5):
            K = kernel.gram(KernelSpec("gaussian_stein", beta), random_spd_stack(rng, 20, 4))
            psd = min(psd, np.linalg.eigvalsh(K.values)[0])
    ok = rt <= 1e-6 and mid <= 1e-6 and psd >= -1e-8
    detail = (f"roundtrip error {rt:.1e}, Karcher midpoint error {mid:.1e} (tol 1e-6); "
              f"Stein Gram min eigenvalue {psd:.2e} (>= -1e-8)")
    report(7, "geometry suite", ok, detail, time.perf_counter() - start, 10)


# -- 8 ------------------------------------------------------------------------

def test_c8_intrinsic_cap(monkeypatch):
    start = time.perf_counter()
    ds = data.gen_spd_clusters(data.SpdClusterParams(m=3, per_cluster=10, d=2,
                                                     noise_sigma=0.3, seed=8))
    cfg = cluster.KmeansConfig(m=3, max_iter=300, restarts=2, seed=1)
    honest = cluster.intrinsic_kmeans(ds.points, "spd", cfg)

    noise = np.random.default_rng(88)
    calls = {"n": 0}

    def restless(kind, centres, stack):
        # fresh random distances every sweep, growing so the objective never settles
        calls["n"] += 1
        return noise.random((len(stack), len(centres))) + calls["n"]

    monkeypatch.setattr(cluster, "_geodesic_distances", restless)
    capped = cluster.intrinsic_kmeans(ds.points, "spd", cfg)
    ok = (honest.iterations <= 100 and capped.iterations == 100 and not capped.converged
          and len(capped.trace) == 100)
    detail = (f"natural run {honest.iterations} iterations (converged={honest.converged}); "
              f"forced run {capped.iterations} iterations, converged={capped.converged}")
    report(8, "intrinsic K-means iteration cap", ok, detail, time.perf_counter() - start, 60)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
