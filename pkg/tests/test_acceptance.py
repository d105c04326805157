"""Acceptance criteria 1-10, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear in the terminal
summary) or directly with ``python tests/test_acceptance.py``. Criterion 9
needs ``AEPCA_MNIST_IMAGES`` pointing at an MNIST IDX image file with at least
10000 images, falling back to data/mnist10k-images-idx3-ubyte.gz (built by
scripts/fetch_mnist.py), and is skipped when neither exists.
"""

import functools
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from aepca.analysis import estimate_variances, nestedness_check, oracle_pca, principal_angles, recover_loading_vectors
from aepca.analysis import covariance_report, transform
from aepca.autoencoder import AutoencoderParams, TrainConfig, gradients, loss, train
from aepca.cli import main as cli_main
from aepca.dataio import read_idx_images, read_pgm, write_pgm_grid
from aepca.dataio import random_orthogonal
from aepca.experiments import MNIST_CONFIG, PLANTED_STDS, planted_dataset, recovery_metrics
from aepca.matrix import RandomSource
from aepca.spectral import pseudoinverse, sym_eigen, thin_svd

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # pragma: no cover - script mode without the tests dir on the path
    ACCEPTANCE_LINES = []

MNIST_ENV = "AEPCA_MNIST_IMAGES"
MNIST_SUBSET = 10000
MNIST_DEFAULT = Path(__file__).resolve().parent.parent / "data" / "mnist10k-images-idx3-ubyte.gz"


def record(k: int, ok: bool, detail: str) -> str:
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return line


def fmt(values) -> str:
    return "[" + ", ".join(f"{v:.3g}" for v in np.atleast_1d(values)) + "]"


@functools.lru_cache(maxsize=None)
def planted_run(mean_norm: float = 0.0, m: int = 5):
    _, data = planted_dataset(seed=0, count=2000, mean_norm=mean_norm)
    started = time.perf_counter()
    params, report = train(data, m, TrainConfig())
    metrics = recovery_metrics(data, params)
    return data, params, report, metrics, time.perf_counter() - started


def criterion_1():
    started = time.perf_counter()
    worst = 0.0
    ok = True
    for seed in range(10):
        rs = RandomSource(1000 + seed)
        gen = np.random.Generator(np.random.PCG64(seed))
        n = int(gen.integers(2, 9))
        m = int(gen.integers(1, min(3, n - 1) + 1))
        b = int(gen.integers(1, 6))
        wd = (0.0, 0.1)[seed % 2]
        p = AutoencoderParams(rs.normal((m, n)), rs.normal(m), rs.normal((n, m)), rs.normal(n))
        y = rs.normal((n, b))
        g = gradients(p, y, wd)
        for name, value in p.items():
            for index in np.ndindex(value.shape):
                plus, minus = p.copy(), p.copy()
                getattr(plus, name)[index] += 1e-5
                getattr(minus, name)[index] -= 1e-5
                fd = (loss(plus, y, wd) - loss(minus, y, wd)) / 2e-5
                err = abs(getattr(g, name)[index] - fd)
                worst = max(worst, err / max(abs(fd), 1e-300))
                ok &= err <= max(1e-6 * abs(fd), 1e-8)
    elapsed = time.perf_counter() - started
    ok &= elapsed < 10
    return ok, f"10 instances, worst relative error {worst:.2e}, {elapsed:.1f}s"


def criterion_2():
    started = time.perf_counter()
    gen = np.random.Generator(np.random.PCG64(2024))
    shapes = [(200, 50)] + [(int(gen.integers(1, 201)), int(gen.integers(1, 51))) for _ in range(24)]
    worst = dict(recon=0.0, orth=0.0, eig=0.0, mp=0.0)
    for k, (rows, cols) in enumerate(shapes):
        rs = RandomSource(k)
        a = rs.normal((rows, cols))
        s = thin_svd(a)
        r = min(rows, cols)
        worst["recon"] = max(worst["recon"], np.linalg.norm(s.reconstruct() - a) / np.linalg.norm(a))
        worst["orth"] = max(worst["orth"], np.linalg.norm(s.u.T @ s.u - np.eye(r)), np.linalg.norm(s.v.T @ s.v - np.eye(r)))
        q = random_orthogonal(cols, rs)
        lam = np.sort(rs.normal(cols) * 10)[::-1]
        e = sym_eigen(q @ np.diag(lam) @ q.T)
        worst["eig"] = max(worst["eig"], np.max(np.abs(e.values - lam)) / np.max(np.abs(lam)))
        pinv = pseudoinverse(a)
        worst["mp"] = max(
            worst["mp"],
            np.linalg.norm(a @ pinv @ a - a) / np.linalg.norm(a),
            np.linalg.norm(pinv @ a @ pinv - pinv) / np.linalg.norm(pinv),
            np.linalg.norm((a @ pinv).T - a @ pinv),
            np.linalg.norm((pinv @ a).T - pinv @ a),
        )
    elapsed = time.perf_counter() - started
    ok = worst["recon"] <= 1e-9 and worst["orth"] <= 1e-10 and worst["eig"] <= 1e-9 and worst["mp"] <= 1e-9
    ok &= elapsed < 30
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    return ok, f"25 matrices up to 200x50: {detail}, {elapsed:.1f}s"


def _recovery_clauses(metrics, elapsed):
    angle_ok = metrics.max_angle_deg < 2.0
    var_ok = bool(np.all(np.abs(metrics.variance_rel_err) < 0.05))
    cross_ok = metrics.cross_source_max_angle_deg < 1.0
    ok = angle_ok and var_ok and cross_ok and elapsed < 120
    detail = (
        f"max principal angle {metrics.max_angle_deg:.3f} deg ({'ok' if angle_ok else 'bad'}); "
        f"variance rel. errors {fmt(metrics.variance_rel_err)} ({'ok' if var_ok else 'bad'}); "
        f"W1-vs-W2 {metrics.cross_source_max_angle_deg:.3f} deg ({'ok' if cross_ok else 'bad'}); "
        f"per-column angles {fmt(metrics.column_angles_deg)} deg [info]; {elapsed:.1f}s"
    )
    return ok, detail


def criterion_3():
    _, _, _, metrics, elapsed = planted_run()
    return _recovery_clauses(metrics, elapsed)


def _decorrelation_clauses(metrics):
    ok = metrics.offdiag_ratio < 0.05 and metrics.descending_ok and metrics.raw_offdiag_ratio > 0.2
    return ok, (
        f"offdiag_ratio {metrics.offdiag_ratio:.4f} (<0.05), descending_ok {metrics.descending_ok}, "
        f"raw-W2 offdiag_ratio {metrics.raw_offdiag_ratio:.3f} (>0.2)"
    )


def criterion_4():
    return _decorrelation_clauses(planted_run()[3])


def criterion_5():
    gap = planted_run()[3].eckart_young_gap
    return gap < 0.01, f"(recon - bound)/bound = {gap:.2e}"


def criterion_6():
    res = planted_run()[3].pseudoinverse_residual
    return res < 0.01, f"|W1 - pinv(W2)|/|W1| = {res:.4f}"


def criterion_7():
    data, params, report, metrics, elapsed = planted_run(mean_norm=10.0)
    mean_norm = float(np.linalg.norm(data.observations.mean(axis=1)))
    ok3, d3 = _recovery_clauses(metrics, elapsed)
    ok4, d4 = _decorrelation_clauses(metrics)
    ok5 = metrics.eckart_young_gap < 0.01
    bias_norm = float(np.linalg.norm(params.b2))
    ok = ok3 and ok4 and ok5 and mean_norm > 9.0
    return ok, (
        f"data mean norm {mean_norm:.2f}, |b2| {bias_norm:.2f}, uncentered input; "
        f"(3) {'ok' if ok3 else 'bad'}: {d3}; (4) {'ok' if ok4 else 'bad'}: {d4}; "
        f"(5) {'ok' if ok5 else 'bad'}: gap {metrics.eckart_young_gap:.2e}"
    )


def criterion_8():
    data, params, _, metrics8, _ = planted_run(m=8)
    oracle4 = oracle_pca(data, 4)
    angles = principal_angles(metrics8.model.loading_vectors[:, :4], oracle4.loading_vectors)
    worst = nestedness_check(metrics8.model, oracle4)
    return worst < 2.0, f"principal angles of first 4 of m=8 vs oracle m=4: {fmt(angles)} deg (max {worst:.2f}, <2)"


def criterion_9(out_dir=None):
    path = os.environ.get(MNIST_ENV) or (str(MNIST_DEFAULT) if MNIST_DEFAULT.exists() else None)
    if not path:
        return None, f"skipped: set {MNIST_ENV} or run scripts/fetch_mnist.py"
    if read_idx_images(path, limit=1).count < 1:
        return None, "skipped: empty IDX file"
    started = time.perf_counter()
    data = read_idx_images(path, limit=MNIST_SUBSET)
    if data.count < MNIST_SUBSET:
        return None, f"skipped: {path} holds {data.count} < {MNIST_SUBSET} images"
    params, report = train(data, 16, MNIST_CONFIG)
    model = estimate_variances(recover_loading_vectors(params, "w2"), data)
    _, ratio, descending = covariance_report(transform(model, data))
    oracle = oracle_pca(data, 16)
    angle = float(np.max(principal_angles(model.loading_vectors, oracle.loading_vectors)))
    out = Path(out_dir or os.environ.get("AEPCA_OUTPUT_ROOT") or tempfile.mkdtemp(prefix="aepca-mnist-"))
    out.mkdir(parents=True, exist_ok=True)
    write_pgm_grid(oracle.loading_vectors, data.image_shape, 4, out / "mnist_oracle.pgm")
    write_pgm_grid(model.loading_vectors, data.image_shape, 4, out / "mnist_recovered.pgm")
    grids_ok = all(read_pgm(out / f"mnist_{k}.pgm").shape == (112, 112) for k in ("oracle", "recovered"))
    elapsed = time.perf_counter() - started
    ok = bool(np.isfinite(report.final_loss)) and ratio < 0.1 and descending and angle < 5.0 and grids_ok
    ok &= elapsed < 15 * 60
    return ok, (
        f"{data.count} images, m=16, {MNIST_CONFIG.epochs} epochs: offdiag_ratio {ratio:.4f} (<0.1), "
        f"descending_ok {descending}, subspace angle {angle:.3f} deg (<5), PGM grids in {out}, {elapsed:.0f}s"
    )


def criterion_10():
    stds = ",".join(str(s) for s in PLANTED_STDS)
    with tempfile.TemporaryDirectory() as tmp:
        roots = []
        for tag in ("first", "second"):
            root = Path(tmp) / tag
            steps = [
                ["synth", "--n", "20", "--count", "2000", "--stds", stds, "--seed", "0", "--out", str(root / "syn")],
                ["train", "--data", str(root / "syn" / "data.pcae"), "--m", "5", "--seed", "0", "--out", str(root / "run")],
                ["recover", "--data", str(root / "syn" / "data.pcae"), "--params", str(root / "run" / "params"),
                 "--out", str(root / "rec")],
            ]
            for argv in steps:
                if cli_main(argv) != 0:
                    return False, f"pipeline step failed: {' '.join(argv[:1])}"
            roots.append(root)
        files = sorted(p.relative_to(roots[0]) for p in roots[0].rglob("*.pcae"))
        diffs = [str(f) for f in files if (roots[0] / f).read_bytes() != (roots[1] / f).read_bytes()]
        # the CLI run must also agree bit for bit with the in-process run of criterion 3
        lib_params = planted_run()[1]
        same_as_lib = (roots[0] / "run" / "params" / "w2.pcae").read_bytes()[24:] == lib_params.w2.astype("<f8").tobytes()
    ok = not diffs and len(files) >= 9 and same_as_lib
    return ok, f"{len(files)} weight/model files compared, {len(diffs)} differ {diffs if diffs else ''}".rstrip()


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 11)}


@pytest.mark.parametrize("k", range(1, 11))
def test_acceptance_criterion(k):
    ok, detail = CRITERIA[k]()
    if ok is None:
        line = f"CRITERION {k}: SKIP  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        pytest.skip(detail)
    record(k, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for k, fn in CRITERIA.items():
        ok, detail = fn()
        if ok is None:
            print(f"CRITERION {k}: SKIP  {detail}")
        else:
            record(k, ok, detail)
            failed += not ok
    sys.exit(1 if failed else 0)
