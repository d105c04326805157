"""MNIST 784 -> 16: oracle vs recovered loading vectors, rendered as PGM grids.

    python scripts/mnist_experiment.py --images train-images-idx3-ubyte --limit 10000 --out runs/mnist

Writes oracle.pgm, recovered.pgm, raw_w2.pgm and a key=value summary.txt.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from aepca.analysis import covariance_report, estimate_variances, oracle_pca, principal_angles
from aepca.analysis import raw_weight_scores, recover_loading_vectors, transform
from aepca.autoencoder import TrainConfig, train
from aepca.cli import write_manifest
from aepca.dataio import read_idx_images, write_pgm_grid
from aepca.experiments import MNIST_CONFIG, column_angles


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--images", required=True, help="IDX3 image file, optionally gzipped")
    ap.add_argument("--limit", type=int, default=10000)
    ap.add_argument("--m", type=int, default=16)
    ap.add_argument("--epochs", type=int, default=MNIST_CONFIG.epochs)
    ap.add_argument("--lr", type=float, default=MNIST_CONFIG.learning_rate)
    ap.add_argument("--wd", type=float, default=MNIST_CONFIG.weight_decay)
    ap.add_argument("--batch-size", type=int, default=MNIST_CONFIG.batch_size)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/mnist")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    data = read_idx_images(args.images, limit=args.limit)
    cfg = TrainConfig(learning_rate=args.lr, weight_decay=args.wd, batch_size=args.batch_size,
                      epochs=args.epochs, seed=args.seed)
    params, report = train(data, args.m, cfg)
    train_secs = time.perf_counter() - started
    model = estimate_variances(recover_loading_vectors(params, "w2"), data)
    _, ratio, descending = covariance_report(transform(model, data))
    _, raw_ratio, _ = covariance_report(raw_weight_scores(params, data))
    oracle = oracle_pca(data, args.m)
    angles = principal_angles(model.loading_vectors, oracle.loading_vectors)

    grid = int(np.ceil(np.sqrt(args.m)))
    write_pgm_grid(oracle.loading_vectors, data.image_shape, grid, out / "oracle.pgm")
    write_pgm_grid(model.loading_vectors, data.image_shape, grid, out / "recovered.pgm")
    write_pgm_grid(params.w2, data.image_shape, grid, out / "raw_w2.pgm")
    summary = {
        "images": data.count,
        **{f"config_{k}": v for k, v in cfg.as_dict().items()},
        "initial_loss": report.initial_loss,
        "final_loss": report.final_loss,
        "loss_ratio": report.initial_loss / report.final_loss,
        "offdiag_ratio": ratio,
        "descending_ok": descending,
        "raw_w2_offdiag_ratio": raw_ratio,
        "max_principal_angle_deg": float(np.max(angles)),
        "column_angles_deg": column_angles(model.loading_vectors, oracle.loading_vectors),
        "variance_ratio": model.variances / oracle.variances,
        "train_seconds": train_secs,
        "total_seconds": time.perf_counter() - started,
    }
    write_manifest(out / "summary.txt", summary)
    print((out / "summary.txt").read_text(), end="")


if __name__ == "__main__":
    main()
