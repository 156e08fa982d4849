"""Mini-batch SGD with momentum: seeded shuffling, epoch history, checkpoints."""

import os
from dataclasses import dataclass, field

import numpy as np

from . import network as N
from . import tensor_ops as T
from .seeding import substream


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, batch, loss):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 30
    seed: int = 42
    checkpoint_every: int = 0  # 0 disables periodic saves

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch size and epochs must be positive")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    eval_acc: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,train_acc,eval_acc"]
        for r in self.records:
            lines.append(f"{r.epoch},{r.train_loss:.6f},{r.train_acc:.6f},{r.eval_acc:.6f}")
        return "\n".join(lines) + "\n"


def sgd_step(param, grad, velocity, lr, momentum):
    """velocity' = momentum*velocity + grad; param' = param - lr*velocity'."""
    if not (param.shape == grad.shape == velocity.shape):
        raise T.DimensionError(
            f"sgd shapes disagree: {param.shape}, {grad.shape}, {velocity.shape}")
    velocity = (momentum * velocity + grad).astype(param.dtype)
    return (param - lr * velocity).astype(param.dtype), velocity


def evaluate(net, images: np.ndarray, labels: np.ndarray, batch_size: int = 32):
    """Predicted class per sample (dataset order) and overall accuracy."""
    if len(images) == 0:
        raise ValueError("dataset is empty")
    preds = []
    for start in range(0, len(images), batch_size):
        _, argmax = N.predict(net, images[start:start + batch_size])
        preds.extend(int(k) for k in argmax)
    preds = np.array(preds)
    return preds, float(np.mean(preds == labels))


def fit(net, train_images, train_labels, eval_images, eval_labels,
        cfg: TrainConfig, checkpoint_dir=None):
    """Train in place; returns (net, TrainHistory)."""
    n = len(train_images)
    if n == 0 or len(eval_images) == 0:
        raise ValueError("datasets must be non-empty")
    onehot = np.eye(net.spec.class_count, dtype=np.float32)[train_labels]
    velocity = {name: np.zeros_like(p) for name, p in net.parameters.items()}
    history = TrainHistory()
    for epoch in range(1, cfg.epochs + 1):
        order = substream(cfg.seed, "shuffle", epoch).permutation(n)
        loss_sum = 0.0
        correct = 0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            batch, target = train_images[idx], onehot[idx]
            logits = N.forward(net, batch, train_mode=True)
            loss, probs, d_logits = T.softmax_xent(logits, target)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, bi, loss)
            loss_sum += loss * len(idx)
            correct += int(np.sum(np.argmax(probs, axis=1) == train_labels[idx]))
            grads = N.backward(net, d_logits)
            for name in net.parameters:
                net.parameters[name], velocity[name] = sgd_step(
                    net.parameters[name], grads[name], velocity[name],
                    cfg.learning_rate, cfg.momentum)
        _, eval_acc = evaluate(net, eval_images, eval_labels, cfg.batch_size)
        history.records.append(EpochRecord(epoch, loss_sum / n, correct / n, eval_acc))
        if checkpoint_dir and cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            N.save_checkpoint(net, os.path.join(checkpoint_dir, f"epoch{epoch:04d}.dcls"))
    return net, history
