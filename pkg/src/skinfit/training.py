"""Adam training loop for the trajectory classifier.

Training is bit-deterministic: parameter initialization and per-epoch
shuffling both draw from one counter-based generator keyed on the seed, and
minibatches are processed in a fixed order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cnn


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 4096
    epochs: int = 20
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 1 <= self.epochs <= 100:
            raise ValueError("epochs must lie in [1, 100]")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.adam_eps <= 0.0:
            raise ValueError("adam_eps must be positive")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    binary_accuracy: float


TRAIN_LOG_HEADER = "epoch,loss,binary_accuracy"


def train(inputs: np.ndarray, labels: np.ndarray,
          config: TrainConfig | None = None) -> tuple[cnn.CnnModel, list[EpochStats]]:
    """Fit the classifier with minibatch Adam on binary cross-entropy.

    inputs : (M, L) trajectories, all the same length
    labels : (M, b_max) 0/1 bone-influence flags

    Returns the trained model and per-epoch (loss, binary accuracy) stats,
    both averaged over the epoch's minibatches.
    """
    config = config or TrainConfig()
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"inputs must be (examples, length), got shape {x.shape}")
    if y.ndim != 2 or y.shape[0] != x.shape[0]:
        raise ValueError(f"labels must be (examples, b_max), got shape {y.shape}")
    if x.shape[0] < 1:
        raise ValueError("need at least one training example")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")

    m = x.shape[0]
    gen = np.random.Generator(np.random.Philox(config.seed))
    model = cnn.init_model_from(gen, b_max=y.shape[1], input_len=x.shape[1])

    moment1 = [np.zeros_like(p) for p in model.params()]
    moment2 = [np.zeros_like(p) for p in model.params()]
    step = 0
    history: list[EpochStats] = []
    for epoch in range(1, config.epochs + 1):
        perm = gen.permutation(m)
        loss_sum = 0.0
        matches = 0.0
        for start in range(0, m, config.batch_size):
            idx = perm[start:start + config.batch_size]
            probs, cache = cnn.forward_cached(model, x[idx])
            grads = cnn.backward_from_cache(model, cache, y[idx])
            loss_sum += cnn.bce_loss(y[idx], probs) * idx.size
            matches += cnn.binary_accuracy(y[idx], probs) * idx.size

            step += 1
            bias1 = 1.0 - config.adam_beta1 ** step
            bias2 = 1.0 - config.adam_beta2 ** step
            for param, grad, m1, m2 in zip(model.params(), grads.params(), moment1, moment2):
                m1 *= config.adam_beta1
                m1 += (1.0 - config.adam_beta1) * grad
                m2 *= config.adam_beta2
                m2 += (1.0 - config.adam_beta2) * grad * grad
                param -= config.learning_rate * (m1 / bias1) / (np.sqrt(m2 / bias2) + config.adam_eps)
        history.append(EpochStats(epoch, loss_sum / m, matches / m))
    return model, history


def training_log_rows(history: list[EpochStats]) -> list[str]:
    rows = [TRAIN_LOG_HEADER]
    rows += [f"{s.epoch},{s.loss:.17g},{s.binary_accuracy:.17g}" for s in history]
    return rows
