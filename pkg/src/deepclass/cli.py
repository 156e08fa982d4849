"""Command-line entry point for the full pipeline.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 training divergence.
"""

import argparse
import os
import sys

from . import augment as A
from . import dataset as D
from . import gradcheck as G
from . import metrics as M
from . import network as N
from . import trainer as TR
from .network import CLASS_NAMES

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3


def _parse_targets(spec: str) -> dict:
    """Merge `CLS=count` overrides into the default augmentation targets."""
    targets = dict(A.DEFAULT_TARGETS)
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        cls, _, value = item.partition("=")
        if cls not in targets or not value.isdigit():
            raise ValueError(f"bad target override {item!r}")
        targets[cls] = int(value)
    return targets


def _read_manifest(path: str, split: str = "") -> D.DatasetManifest:
    if not os.path.exists(path):
        raise FileNotFoundError(f"manifest not found: {path}")
    with open(path) as f:
        return D.DatasetManifest.from_tsv(f.read(), split=split)


def cmd_augment(args) -> int:
    manifest = _read_manifest(args.manifest)
    targets = _parse_targets(args.targets) if args.targets else None
    plan = A.plan_augmentation(manifest.class_census(), targets)
    rows = A.run_augmentation(manifest, plan, args.out)
    totals = {cls: 0 for cls in CLASS_NAMES}
    for row in rows:
        totals[row[4]] += 1
    for cls in CLASS_NAMES:
        print(f"{cls}: {totals[cls]}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = TR.TrainConfig(learning_rate=args.lr, momentum=args.momentum,
                         batch_size=args.batch, epochs=args.epochs,
                         seed=args.seed, checkpoint_every=args.checkpoint_every)
    train_manifest = _read_manifest(args.train_manifest, "train")
    eval_manifest = _read_manifest(args.eval_manifest, "eval")
    train_images, train_labels = D.load_dataset(train_manifest)
    eval_images, eval_labels = D.load_dataset(eval_manifest)
    os.makedirs(args.checkpoint_dir, exist_ok=True)
    net = N.build_deepclass(cfg.seed)
    try:
        net, history = TR.fit(net, train_images, train_labels,
                              eval_images, eval_labels, cfg, args.checkpoint_dir)
    except TR.TrainingDiverged as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    with open(os.path.join(args.checkpoint_dir, "history.csv"), "w") as f:
        f.write(history.to_csv())
    N.save_checkpoint(net, os.path.join(args.checkpoint_dir, "final.dcls"))
    if history.records:
        last = history.records[-1]
        print(f"epoch {last.epoch}: train_loss {last.train_loss:.6f} "
              f"train_acc {last.train_acc:.6f} eval_acc {last.eval_acc:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    net = N.load_checkpoint(args.checkpoint)
    manifest = _read_manifest(args.manifest, "eval")
    images, labels = D.load_dataset(manifest)
    preds, accuracy = TR.evaluate(net, images, labels)
    cm = M.confusion_matrix(labels, preds)
    report = M.render_report(cm) + f"\naccuracy: {accuracy:.6f}\n"
    sys.stdout.write(report)
    if args.out:
        with open(args.out, "w") as f:
            f.write(report)
    return EXIT_OK


def cmd_verify_metrics(args) -> int:
    report = M.verify_reference_table()
    failures = [cell for cell in report if not cell[4]]
    for cls, metric, got, want, ok in report:
        if not ok:
            print(f"FAIL {cls} {metric}: computed {got}, published {want}")
    passed = len(report) - len(failures)
    print(f"{passed}/{len(report)} PASS")
    return EXIT_OK if not failures else EXIT_VERIFY_FAIL


def cmd_gradcheck(args) -> int:
    results = G.run_suite(args.seed)
    worst_over = False
    for op, err in results.items():
        status = "ok" if err < G.TOLERANCE else "FAIL"
        print(f"{op}: max relative error {err:.3e} [{status}]")
        worst_over |= err >= G.TOLERANCE
    return EXIT_VERIFY_FAIL if worst_over else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepclass",
                                     description="Skin-lesion CNN pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="expand a dataset by rotation/flip")
    p.add_argument("--manifest", required=True, help="source dataset manifest TSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--targets", default="",
                   help="per-class overrides, e.g. M=100,N=200")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train the classifier")
    p.add_argument("--train-manifest", required=True)
    p.add_argument("--eval-manifest", required=True)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--checkpoint-dir", required=True)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint and print the report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify-metrics",
                       help="recompute the published metric table from its counts")
    p.set_defaults(func=cmd_verify_metrics)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "train" and args.lr <= 0:
        parser.error(f"--lr must be positive, got {args.lr}")
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, OSError,
            N.CheckpointFormatError, D.ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
