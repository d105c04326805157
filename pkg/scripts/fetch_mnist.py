"""Build a 10000-image MNIST IDX file from the `mnist` npm package (cazala/mnist 1.1.0).

That package ships 10000 real MNIST digits as pixel/255 floats rounded to three
decimals, grouped by class. Pixels are restored with round(v * 255) and classes
are interleaved so any prefix is roughly balanced.

    python scripts/fetch_mnist.py --out data/mnist10k-images-idx3-ubyte.gz
    AEPCA_MNIST_IMAGES=data/mnist10k-images-idx3-ubyte.gz pytest tests/test_acceptance.py
"""

import argparse
import gzip
import json
import subprocess
import tarfile
import tempfile
from pathlib import Path

import numpy as np

from aepca.dataio import write_idx_images


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data/mnist10k-images-idx3-ubyte.gz")
    ap.add_argument("--tarball", help="already downloaded mnist-1.1.0.tgz; skips npm pack")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        tarball = args.tarball
        if tarball is None:
            name = subprocess.run(["npm", "pack", "mnist@1.1.0", "--pack-destination", tmp], check=True,
                                  capture_output=True, text=True).stdout.split()[-1]
            tarball = str(Path(tmp) / name)
        parts = []
        with tarfile.open(tarball) as tar:
            for digit in range(10):
                raw = json.load(tar.extractfile(f"package/src/digits/{digit}.json"))["data"]
                parts.append(np.rint(np.asarray(raw) * 255).astype(np.uint8).reshape(-1, 28, 28))
    longest = max(len(p) for p in parts)
    images = np.stack([p[i] for i in range(longest) for p in parts if i < len(p)])

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix == ".gz":
        raw_path = out.with_suffix("")
        write_idx_images(images, raw_path)
        out.write_bytes(gzip.compress(raw_path.read_bytes(), mtime=0))
        raw_path.unlink()
    else:
        write_idx_images(images, out)
    print(f"{out}: {images.shape[0]} images {images.shape[1]}x{images.shape[2]}")


if __name__ == "__main__":
    main()
