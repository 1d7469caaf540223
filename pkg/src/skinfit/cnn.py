"""Multi-label trajectory classifier built from scratch.

Architecture: two valid 1-D convolutions (8 filters each, kernel 2, ReLU),
global max pooling over positions, and a dense layer with elementwise sigmoid
outputs, one probability per candidate bone. Forward and backward passes are
plain numpy; the backward pass is the exact gradient of the binary
cross-entropy loss composed with the forward pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formats import FLOAT_FMT, FormatError, atomic_write_text

FILTERS = 8
KERNEL = 2
DEFAULT_B_MAX = 32

PARAM_FIELDS = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "dense_w", "dense_b")


@dataclass
class CnnModel:
    """Parameters of the trajectory classifier.

    conv1_w : (8, 1, 2)      filters x input channels x kernel
    conv1_b : (8,)
    conv2_w : (8, 8, 2)
    conv2_b : (8,)
    dense_w : (b_max, 8)
    dense_b : (b_max,)
    """

    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    dense_w: np.ndarray
    dense_b: np.ndarray
    b_max: int
    input_len: int

    def __post_init__(self):
        for name in PARAM_FIELDS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.conv1_w.shape != (FILTERS, 1, KERNEL):
            raise ValueError(f"conv1_w must be {(FILTERS, 1, KERNEL)}, got {self.conv1_w.shape}")
        if self.conv2_w.shape != (FILTERS, FILTERS, KERNEL):
            raise ValueError(f"conv2_w must be {(FILTERS, FILTERS, KERNEL)}, got {self.conv2_w.shape}")
        if self.conv1_b.shape != (FILTERS,) or self.conv2_b.shape != (FILTERS,):
            raise ValueError("conv biases must have one entry per filter")
        if self.dense_w.shape != (self.b_max, FILTERS) or self.dense_b.shape != (self.b_max,):
            raise ValueError(f"dense layer must map {FILTERS} -> {self.b_max}")
        for name in PARAM_FIELDS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")
        if self.input_len < KERNEL + 1:
            raise ValueError(f"input_len must be >= {KERNEL + 1}")

    def params(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in PARAM_FIELDS]

    def copy(self) -> "CnnModel":
        return CnnModel(*(p.copy() for p in self.params()),
                        b_max=self.b_max, input_len=self.input_len)


@dataclass
class CnnGradients:
    """Loss gradients, one array per model parameter array."""

    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    dense_w: np.ndarray
    dense_b: np.ndarray

    def params(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in PARAM_FIELDS]


def init_model(b_max: int, input_len: int, seed: int = 0) -> CnnModel:
    """Deterministic initialization: uniform +-1/sqrt(fan_in) per layer, drawn
    from a counter-based generator keyed on `seed`."""
    gen = np.random.Generator(np.random.Philox(seed))
    return init_model_from(gen, b_max, input_len)


def init_model_from(gen: np.random.Generator, b_max: int, input_len: int) -> CnnModel:
    if b_max < 1:
        raise ValueError("b_max must be >= 1")
    lim1 = 1.0 / np.sqrt(1 * KERNEL)
    lim2 = 1.0 / np.sqrt(FILTERS * KERNEL)
    lim3 = 1.0 / np.sqrt(FILTERS)
    return CnnModel(
        conv1_w=gen.uniform(-lim1, lim1, size=(FILTERS, 1, KERNEL)),
        conv1_b=gen.uniform(-lim1, lim1, size=FILTERS),
        conv2_w=gen.uniform(-lim2, lim2, size=(FILTERS, FILTERS, KERNEL)),
        conv2_b=gen.uniform(-lim2, lim2, size=FILTERS),
        dense_w=gen.uniform(-lim3, lim3, size=(b_max, FILTERS)),
        dense_b=gen.uniform(-lim3, lim3, size=b_max),
        b_max=b_max,
        input_len=input_len,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _conv_valid(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    # x: (M, L, C), w: (F, C, 2) -> (M, L-1, F)
    return x[:, :-1, :] @ w[:, :, 0].T + x[:, 1:, :] @ w[:, :, 1].T + b


def forward_cached(model: CnnModel, inputs: np.ndarray) -> tuple[np.ndarray, dict]:
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError(f"inputs must be (length,) or (batch, length), got shape {x.shape}")
    if x.shape[1] < KERNEL + 1:
        raise ValueError(
            f"input length {x.shape[1]} too short: two kernel-{KERNEL} convolutions "
            f"need at least {KERNEL + 1} samples")
    h = x[:, :, None]  # (M, L, 1)
    z1 = _conv_valid(h, model.conv1_w, model.conv1_b)     # (M, L-1, 8)
    a1 = np.maximum(z1, 0.0)
    z2 = _conv_valid(a1, model.conv2_w, model.conv2_b)    # (M, L-2, 8)
    a2 = np.maximum(z2, 0.0)
    arg = np.argmax(a2, axis=1)                           # first index on ties
    pooled = np.take_along_axis(a2, arg[:, None, :], axis=1)[:, 0, :]  # (M, 8)
    z3 = pooled @ model.dense_w.T + model.dense_b         # (M, b_max)
    probs = _sigmoid(z3)
    cache = {"x": h, "z1": z1, "a1": a1, "z2": z2, "arg": arg,
             "pooled": pooled, "probs": probs, "single": single}
    return (probs[0] if single else probs), cache


def forward(model: CnnModel, inputs: np.ndarray) -> np.ndarray:
    """Per-bone influence probabilities for one trajectory or a batch of them."""
    probs, _ = forward_cached(model, inputs)
    return probs


def bce_loss(y, y_pred) -> float:
    """Mean binary cross-entropy; predictions clamped to [1e-12, 1 - 1e-12]."""
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(y_pred, dtype=np.float64)
    if y.shape != p.shape:
        raise ValueError(f"label shape {y.shape} != prediction shape {p.shape}")
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return float(-np.mean((1.0 - y) * np.log(1.0 - p) + y * np.log(p)))


def binary_accuracy(y, y_pred) -> float:
    """Fraction of entries where thresholding the prediction at 0.5 matches the label."""
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(y_pred, dtype=np.float64)
    if y.shape != p.shape:
        raise ValueError(f"label shape {y.shape} != prediction shape {p.shape}")
    return float(np.mean((p >= 0.5) == (y == 1.0)))


def backward_from_cache(model: CnnModel, cache: dict, labels: np.ndarray) -> CnnGradients:
    y = np.asarray(labels, dtype=np.float64)
    if cache["single"]:
        y = y[None, :]
    probs = cache["probs"]
    if y.shape != probs.shape:
        raise ValueError(f"label shape {y.shape} != prediction shape {probs.shape}")
    m = probs.shape[0]

    # Combined sigmoid + binary cross-entropy: dL/dz3 = (p - y) / (b_max * batch).
    dz3 = (probs - y) / (model.b_max * m)
    d_dense_w = dz3.T @ cache["pooled"]
    d_dense_b = dz3.sum(axis=0)
    dpooled = dz3 @ model.dense_w                          # (M, 8)

    # Max pooling routes the gradient to the (first) argmax position.
    da2 = np.zeros_like(cache["z2"])
    np.put_along_axis(da2, cache["arg"][:, None, :], dpooled[:, None, :], axis=1)
    dz2 = da2 * (cache["z2"] > 0.0)

    a1 = cache["a1"]
    d_conv2_w = np.empty_like(model.conv2_w)
    d_conv2_w[:, :, 0] = np.einsum("mtf,mtc->fc", dz2, a1[:, :-1, :])
    d_conv2_w[:, :, 1] = np.einsum("mtf,mtc->fc", dz2, a1[:, 1:, :])
    d_conv2_b = dz2.sum(axis=(0, 1))
    da1 = np.zeros_like(a1)
    da1[:, :-1, :] += dz2 @ model.conv2_w[:, :, 0]
    da1[:, 1:, :] += dz2 @ model.conv2_w[:, :, 1]
    dz1 = da1 * (cache["z1"] > 0.0)

    x = cache["x"]
    d_conv1_w = np.empty_like(model.conv1_w)
    d_conv1_w[:, :, 0] = np.einsum("mtf,mtc->fc", dz1, x[:, :-1, :])
    d_conv1_w[:, :, 1] = np.einsum("mtf,mtc->fc", dz1, x[:, 1:, :])
    d_conv1_b = dz1.sum(axis=(0, 1))

    return CnnGradients(d_conv1_w, d_conv1_b, d_conv2_w, d_conv2_b, d_dense_w, d_dense_b)


def backward(model: CnnModel, inputs: np.ndarray, labels: np.ndarray) -> CnnGradients:
    """Exact gradient of bce_loss(labels, forward(model, inputs)).

    For a batch the gradient is that of the mean per-example loss.
    """
    _, cache = forward_cached(model, inputs)
    return backward_from_cache(model, cache, labels)


def save_checkpoint(path, model: CnnModel) -> None:
    """Text checkpoint: `CNN <b_max> <input_len>` then one line per parameter array."""
    lines = [f"CNN {model.b_max} {model.input_len}"]
    for arr in model.params():
        lines.append(" ".join(FLOAT_FMT % v for v in arr.reshape(-1)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_checkpoint(path) -> CnnModel:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty checkpoint")
    header = lines[0].split()
    if len(header) != 3 or header[0] != "CNN":
        raise FormatError(f"{path}: expected 'CNN <b_max> <input_len>' header")
    try:
        b_max, input_len = int(header[1]), int(header[2])
    except ValueError as exc:
        raise FormatError(f"{path}: bad header numbers") from exc
    shapes = [(FILTERS, 1, KERNEL), (FILTERS,), (FILTERS, FILTERS, KERNEL), (FILTERS,),
              (b_max, FILTERS), (b_max,)]
    body = [line for line in lines[1:] if line.strip()]
    if len(body) != len(shapes):
        raise FormatError(f"{path}: expected {len(shapes)} parameter lines, got {len(body)}")
    arrays = []
    for line, shape in zip(body, shapes):
        values = np.array([float(t) for t in line.split()])
        if values.size != int(np.prod(shape)):
            raise FormatError(
                f"{path}: parameter line has {values.size} values, expected {int(np.prod(shape))}")
        arrays.append(values.reshape(shape))
    try:
        return CnnModel(*arrays, b_max=b_max, input_len=input_len)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
