#!/usr/bin/env python3
"""Build a desk-scale MNIST subset in IDX format.

Full MNIST downloads are often unavailable in offline build environments, so
this script pulls the 10,000 grayscale digits bundled with the npm `mnist`
package (via `npm pack`, which goes through the configured registry) and
writes a class-stratified 5,000-image training split plus a disjoint test
split using the standard IDX file names.

    python3 scripts/fetch_mnist_subset.py --out data/mnist
"""
import argparse
import json
import pathlib
import struct
import subprocess
import tarfile
import tempfile

import numpy as np


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/mnist")
    ap.add_argument("--train-per-class", type=int, default=500)
    ap.add_argument("--seed", type=int, default=1234)
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(["npm", "pack", "mnist@1.1.0", "--silent"], cwd=tmp, check=True,
                       stdout=subprocess.DEVNULL)
        with tarfile.open(pathlib.Path(tmp) / "mnist-1.1.0.tgz") as tar:
            tar.extractall(tmp)
        xs, ys = [], []
        for digit in range(10):
            path = pathlib.Path(tmp) / "package" / "src" / "digits" / f"{digit}.json"
            flat = np.array(json.loads(path.read_text())["data"], dtype=np.float64)
            imgs = flat.reshape(-1, 784)
            xs.append(np.rint(imgs * 255.0).clip(0, 255))
            ys.append(np.full(len(imgs), digit))
    x = np.concatenate(xs)
    y = np.concatenate(ys)

    rng = np.random.default_rng(args.seed)
    train_idx = []
    for digit in range(10):
        idx = np.flatnonzero(y == digit)
        train_idx.extend(rng.choice(idx, size=args.train_per_class, replace=False))
    train_idx = np.array(sorted(train_idx))
    test_mask = np.ones(len(y), dtype=bool)
    test_mask[train_idx] = False
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(np.flatnonzero(test_mask))

    write_idx_images(out / "train-images-idx3-ubyte", x[train_idx])
    write_idx_labels(out / "train-labels-idx1-ubyte", y[train_idx])
    write_idx_images(out / "t10k-images-idx3-ubyte", x[test_idx])
    write_idx_labels(out / "t10k-labels-idx1-ubyte", y[test_idx])
    print(f"wrote {len(train_idx)} train / {len(test_idx)} test images to {out}")


if __name__ == "__main__":
    main()
