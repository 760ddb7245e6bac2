"""Convert the 10k-digit MNIST subset shipped in the npm ``mnist`` package to IDX.

Usage::

    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python tools/make_mnist10k.py package/src/digits src/risota/datasets

The npm package stores each digit class as a flat JSON list of pixel
intensities already divided by 255 and rounded to three decimals. The
rounding is coarser than 1/255, so ``round(v * 255)`` recovers the byte.
A fixed stratified permutation splits the 10,000 images 8000/2000.
"""
import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np


def write_idx(path, array):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x0800 | array.ndim
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", n) for n in array.shape)
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
        fh.write(header)
        fh.write(array.tobytes())


def main(src, dst):
    src, dst = Path(src), Path(dst)
    rng = np.random.default_rng(20230511)
    train_x, train_y, test_x, test_y = [], [], [], []
    for digit in range(10):
        flat = np.asarray(json.loads((src / f"{digit}.json").read_text())["data"])
        images = np.rint(flat.reshape(-1, 784) * 255).astype(np.uint8)
        order = rng.permutation(len(images))
        n_test = len(images) // 5
        test_x.append(images[order[:n_test]])
        train_x.append(images[order[n_test:]])
        test_y.append(np.full(n_test, digit, np.uint8))
        train_y.append(np.full(len(images) - n_test, digit, np.uint8))
    for name, xs, ys in (("train", train_x, train_y), ("t10k", test_x, test_y)):
        x, y = np.concatenate(xs), np.concatenate(ys)
        perm = rng.permutation(len(y))
        write_idx(dst / f"{name}-images-idx3-ubyte.gz", x[perm].reshape(-1, 28, 28))
        write_idx(dst / f"{name}-labels-idx1-ubyte.gz", y[perm])
        print(name, x.shape, np.bincount(y))


if __name__ == "__main__":
    main(*sys.argv[1:3])
