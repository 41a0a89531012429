"""Build-and-train step for one parameter assignment.

The classifier is a two-hidden-layer softmax MLP whose widths, per-layer
activation functions, and dropout flag all come from the request:

    params = [n1, n2, act1, act2, dropout]
    activations: 0=sigmoid 1=relu 2=linear 3=tanh
    dropout: 1 adds p=0.25 inverted dropout after each hidden layer
             (training only)

Training runs minibatch SGD on cross-entropy and stops early once the
validation accuracy has not improved for ``early_stop_c`` consecutive
epochs; the returned accuracy is the best validation accuracy seen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATION_NAMES = ("sigmoid", "relu", "linear", "tanh")

DEFAULT_MAX_EPOCHS = 20
BATCH_SIZE = 128
LEARNING_RATE = 0.1
DROPOUT_P = 0.25


@dataclass(frozen=True)
class NetParams:
    n1: int
    n2: int
    act1: int
    act2: int
    dropout: bool

    @classmethod
    def from_request(cls, values) -> "NetParams":
        if not isinstance(values, (list, tuple)) or len(values) != 5:
            raise ValueError(f"params must be 5 values [n1, n2, act1, act2, dropout], got {values!r}")
        ints = []
        for v in values:
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValueError(f"params must be integers, got {v!r}")
            ints.append(v)
        n1, n2, a1, a2, drop = ints
        if n1 < 1 or n2 < 1:
            raise ValueError(f"layer widths must be >= 1, got {n1}, {n2}")
        if not (0 <= a1 <= 3 and 0 <= a2 <= 3):
            raise ValueError(f"activation indices must be in 0..3, got {a1}, {a2}")
        if drop not in (0, 1):
            raise ValueError(f"dropout flag must be 0 or 1, got {drop}")
        return cls(n1, n2, a1, a2, bool(drop))


def _act(x: np.ndarray, kind: int) -> np.ndarray:
    if kind == 0:
        return 1.0 / (1.0 + np.exp(-x))
    if kind == 1:
        return np.maximum(x, 0.0)
    if kind == 2:
        return x
    return np.tanh(x)


def _act_deriv(a: np.ndarray, kind: int) -> np.ndarray:
    # In terms of the activation value a.
    if kind == 0:
        return a * (1.0 - a)
    if kind == 1:
        return (a > 0).astype(a.dtype)
    if kind == 2:
        return np.ones_like(a)
    return 1.0 - a * a


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class TrainResult:
    accuracy: float    # best validation accuracy seen
    epochs: int        # epochs actually run
    best_epoch: int    # 1-based epoch that produced the best accuracy


def train_and_score(params: NetParams, dataset: dict[str, np.ndarray],
                    early_stop_c: int, seed: int,
                    max_epochs: int = DEFAULT_MAX_EPOCHS) -> TrainResult:
    rng = np.random.default_rng(seed)
    x_train = dataset["x_train"].astype(np.float64)
    y_train = dataset["y_train"]
    x_val = dataset["x_val"].astype(np.float64)
    y_val = dataset["y_val"]
    n_in = x_train.shape[1]
    n_out = int(y_train.max()) + 1
    dims = (n_in, params.n1, params.n2, n_out)
    acts = (params.act1, params.act2)

    weights = [rng.uniform(-b, b, size=(dims[l], dims[l + 1]))
               for l, b in ((l, np.sqrt(6.0 / (dims[l] + dims[l + 1]))) for l in range(3))]
    biases = [np.zeros(dims[l + 1]) for l in range(3)]
    onehot = np.eye(n_out)[y_train]

    def val_accuracy() -> float:
        a = x_val
        for l in range(2):
            a = _act(a @ weights[l] + biases[l], acts[l])
        logits = a @ weights[2] + biases[2]
        return float((logits.argmax(axis=1) == y_val).mean())

    best_acc = 0.0
    best_epoch = 0
    epoch = 0
    while epoch < max_epochs:
        epoch += 1
        order = rng.permutation(len(x_train))
        for start in range(0, len(order), BATCH_SIZE):
            idx = order[start:start + BATCH_SIZE]
            xb, yb = x_train[idx], onehot[idx]
            # forward, keeping pre-dropout activations and masks for backward
            pre, post, masks = [], [], []
            a = xb
            for l in range(2):
                h = _act(a @ weights[l] + biases[l], acts[l])
                if params.dropout:
                    mask = (rng.random(h.shape) >= DROPOUT_P) / (1.0 - DROPOUT_P)
                    a = h * mask
                else:
                    mask = None
                    a = h
                pre.append(h)
                post.append(a)
                masks.append(mask)
            probs = _softmax(a @ weights[2] + biases[2])
            # backward (cross-entropy through softmax)
            delta = (probs - yb) / len(idx)
            grads_w = [None, None, post[1].T @ delta]
            grads_b = [None, None, delta.sum(axis=0)]
            for l in (1, 0):
                upstream = delta @ weights[l + 1].T
                if masks[l] is not None:
                    upstream = upstream * masks[l]
                delta = upstream * _act_deriv(pre[l], acts[l])
                inbound = xb if l == 0 else post[l - 1]
                grads_w[l] = inbound.T @ delta
                grads_b[l] = delta.sum(axis=0)
            for l in range(3):
                weights[l] -= LEARNING_RATE * grads_w[l]
                biases[l] -= LEARNING_RATE * grads_b[l]
        acc = val_accuracy()
        if acc > best_acc:
            best_acc, best_epoch = acc, epoch
        if epoch - best_epoch >= early_stop_c:
            break
    return TrainResult(accuracy=best_acc, epochs=epoch, best_epoch=best_epoch)
