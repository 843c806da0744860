#!/usr/bin/env python3
"""Writes the scikit-learn 8x8 digits set as IDX files (fixed 80/20 split)."""
import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits


def write_pair(images, labels, stem):
    with open(f"{stem}-images.idx", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 8, 8))
        f.write(images.astype(np.uint8).tobytes())
    with open(f"{stem}-labels.idx", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
    out.mkdir(parents=True, exist_ok=True)
    digits = load_digits()
    pixels = np.clip(np.rint(digits.images.reshape(len(digits.images), -1) * 255.0 / 16.0), 0, 255)
    order = np.random.default_rng(0).permutation(len(pixels))
    cut = int(0.8 * len(order))
    write_pair(pixels[order[:cut]], digits.target[order[:cut]], out / "digits-train")
    write_pair(pixels[order[cut:]], digits.target[order[cut:]], out / "digits-test")


if __name__ == "__main__":
    main()
