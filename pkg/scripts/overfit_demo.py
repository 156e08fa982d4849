#!/usr/bin/env python3
"""Train the full network on the 14-image color-separable set.

Sanity experiment: a working pipeline must drive training accuracy to 1.0
within a few dozen epochs.  Prints the per-epoch history CSV to stdout.
"""

import argparse

from deepclass import network, trainer
from deepclass.synthetic import color_separable_set


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--lr", type=float, default=0.01)
    parser.add_argument("--momentum", type=float, default=0.0)
    parser.add_argument("--batch", type=int, default=4)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    images, labels = color_separable_set()
    net = network.build_deepclass(args.seed)
    cfg = trainer.TrainConfig(learning_rate=args.lr, momentum=args.momentum,
                              batch_size=args.batch, epochs=args.epochs,
                              seed=args.seed)
    _, history = trainer.fit(net, images, labels, images, labels, cfg)
    print(history.to_csv(), end="")


if __name__ == "__main__":
    main()
