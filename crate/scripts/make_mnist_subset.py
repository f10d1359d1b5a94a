#!/usr/bin/env python3
"""Build the small MNIST subset bundled under data/mnist-subset/.

The sandbox that produced this repository could not reach the usual MNIST
mirrors, so the subset is assembled from real MNIST digits shipped inside two
packages:

  * mlxtend (PyPI): data/mnist_5k.csv.gz, 5000 training images, 500 per class.
  * mnist (npm):    src/digits/<d>.json, 10000 training images scaled to [0,1].

The npm set contains the mlxtend images, so the test split takes only npm
digits that do not appear in the mlxtend set (first 100 per class).

Usage:
    pip download --no-deps mlxtend -d /tmp/pk/mlxtend
    (cd /tmp/pk && npm pack mnist && tar xzf mnist-*.tgz)
    python3 scripts/make_mnist_subset.py /tmp/pk data/mnist-subset
"""
import glob
import gzip
import hashlib
import json
import os
import struct
import sys
import zipfile

TEST_PER_CLASS = 100


def write_idx(path, images, labels):
    with gzip.GzipFile(path + "-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with gzip.GzipFile(path + "-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main(src, dst):
    wheel = glob.glob(os.path.join(src, "mlxtend", "*.whl"))[0]
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    train = []
    for line in gzip.decompress(raw).decode().splitlines():
        vals = [int(float(v)) for v in line.split(",")]
        train.append((vals[:-1], vals[-1]))
    seen = {hashlib.md5(bytes(x)).hexdigest() for x, _ in train}

    per_class = []
    for digit in range(10):
        with open(os.path.join(src, "package", "src", "digits", f"{digit}.json")) as f:
            data = json.load(f)["data"]
        kept = []
        for k in range(len(data) // 784):
            px = [int(round(v * 255)) for v in data[k * 784:(k + 1) * 784]]
            if hashlib.md5(bytes(px)).hexdigest() in seen:
                continue
            kept.append((px, digit))
            if len(kept) == TEST_PER_CLASS:
                break
        per_class.append(kept)
    # interleave classes so that any prefix is balanced
    test = [per_class[d][k] for k in range(TEST_PER_CLASS) for d in range(10)]

    os.makedirs(dst, exist_ok=True)
    write_idx(os.path.join(dst, "train"), [x for x, _ in train], [y for _, y in train])
    write_idx(os.path.join(dst, "t10k"), [x for x, _ in test], [y for _, y in test])
    print(f"train={len(train)} test={len(test)}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
