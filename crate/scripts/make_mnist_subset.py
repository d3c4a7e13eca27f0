"""Builds data/mnist-subset from the digit JSON files of the `mnist` npm package.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/make_mnist_subset.py package/src/digits data/mnist-subset
"""

import gzip
import json
import random
import struct
import sys
from pathlib import Path

TRAIN = 8000
SEED = 20180101


def main(src: Path, dst: Path) -> None:
    samples = []
    for label in range(10):
        flat = json.loads((src / f"{label}.json").read_text())["data"]
        for i in range(len(flat) // 784):
            pixels = bytes(round(255 * v) for v in flat[i * 784 : (i + 1) * 784])
            samples.append((pixels, label))
    random.Random(SEED).shuffle(samples)
    dst.mkdir(parents=True, exist_ok=True)
    for prefix, part in (("train", samples[:TRAIN]), ("t10k", samples[TRAIN:])):
        images = struct.pack(">IIII", 0x803, len(part), 28, 28) + b"".join(p for p, _ in part)
        labels = struct.pack(">II", 0x801, len(part)) + bytes(l for _, l in part)
        for name, blob in ((f"{prefix}-images-idx3-ubyte.gz", images), (f"{prefix}-labels-idx1-ubyte.gz", labels)):
            with gzip.GzipFile(dst / name, "wb", mtime=0) as f:
                f.write(blob)
        print(prefix, len(part))


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
