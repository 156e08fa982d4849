#!/usr/bin/env python3
"""Write a small synthetic PPM dataset plus manifest for pipeline dry runs."""

import argparse
import os

import numpy as np

from deepclass import dataset as D


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--per-class", type=int, default=2)
    parser.add_argument("--size", type=int, default=128)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    samples = []
    for cls in D.CLASS_NAMES:
        for k in range(args.per_class):
            img = rng.random((3, args.size, args.size)).astype(np.float32)
            path = os.path.join(args.out, f"{cls}_{k}.ppm")
            with open(path, "wb") as f:
                f.write(D.encode_ppm(img))
            samples.append(D.Sample(f"{cls}_{k}", path, D.CLASS_INDEX[cls]))
    manifest = os.path.join(args.out, "manifest.tsv")
    with open(manifest, "w") as f:
        f.write(D.DatasetManifest(samples).to_tsv())
    print(manifest)


if __name__ == "__main__":
    main()
