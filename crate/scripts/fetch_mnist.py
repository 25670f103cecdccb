#!/usr/bin/env python3
"""Build IDX-format MNIST files from the 10000-digit subset shipped in the
`mnist` npm package (MIT licensed).

Writes data/mnist/train-images-idx3-ubyte.gz and train-labels-idx1-ubyte.gz.
Digits are shuffled with a fixed seed so every class appears early in the file.
"""
import gzip
import io
import json
import random
import struct
import sys
import tarfile
import urllib.request
from pathlib import Path

URL = "https://registry.npmjs.org/mnist/-/mnist-1.1.0.tgz"


def main() -> int:
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "data/mnist")
    out.mkdir(parents=True, exist_ok=True)
    with urllib.request.urlopen(URL) as resp:
        blob = resp.read()
    records = []
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar:
        for digit in range(10):
            member = tar.extractfile(f"package/src/digits/{digit}.json")
            flat = json.load(member)["data"]
            assert len(flat) % 784 == 0
            for i in range(0, len(flat), 784):
                px = bytes(min(255, max(0, round(v * 255))) for v in flat[i : i + 784])
                records.append((digit, px))
    random.Random(0).shuffle(records)
    n = len(records)
    with gzip.GzipFile(out / "train-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 2051, n, 28, 28))
        for _, px in records:
            f.write(px)
    with gzip.GzipFile(out / "train-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 2049, n))
        f.write(bytes(d for d, _ in records))
    print(f"wrote {n} records to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
