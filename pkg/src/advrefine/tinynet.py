"""Minimal dense networks with hand-written reverse-mode gradients.

Just enough substrate for the two proposal generators and the judge
network: affine layers, leaky-relu hidden activations, a tanh or sigmoid
output, plain SGD.  Networks are immutable values; ``sgd_step`` returns a
new one.  Forward passes record everything backward needs on a tape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TANH = "tanh"
SIGMOID = "sigmoid"

OUTPUT_ACTIVATIONS = (TANH, SIGMOID)

DEFAULT_LEAKY_SLOPE = 0.2


class NonFiniteGradientError(ValueError):
    """A gradient contains NaN or inf; the update is rejected."""


@dataclass(frozen=True)
class DenseNet:
    """Fully-connected net: weights[l] has shape (dims[l+1], dims[l]).

    Construction takes ownership of the arrays and marks them read-only;
    pass copies if you need to keep mutating yours.
    """

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    hidden_alpha: float
    output_activation: str
    seed: int

    def __post_init__(self) -> None:
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_dims[l + 1], self.layer_dims[l])
            if w.shape != want:
                raise ValueError(f"layer {l}: weight shape {w.shape}, expected {want}")
            if b.shape != (self.layer_dims[l + 1],):
                raise ValueError(f"layer {l}: bias length {b.shape[0]}, expected {self.layer_dims[l + 1]}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {l}: non-finite parameters")
            w.flags.writeable = False
            b.flags.writeable = False

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass
class GradientTape:
    """Forward-pass cache plus, after ``backward``, the filled gradients."""

    inputs: list[np.ndarray]        # inputs[l]: activation entering layer l
    preacts: list[np.ndarray]       # preacts[l]: affine output of layer l
    output: np.ndarray
    weight_grads: list[np.ndarray] | None = None
    bias_grads: list[np.ndarray] | None = None
    input_grad: np.ndarray | None = None


def init(layer_dims, hidden_alpha: float = DEFAULT_LEAKY_SLOPE,
         output_activation: str = TANH, seed: int = 0) -> DenseNet:
    """Fresh net: weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero."""
    layer_dims = tuple(int(d) for d in layer_dims)
    if len(layer_dims) < 2:
        raise ValueError("need at least an input and an output dimension")
    if any(d <= 0 for d in layer_dims):
        raise ValueError(f"non-positive layer dimension in {layer_dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims, layer_dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DenseNet(layer_dims, tuple(weights), tuple(biases),
                    float(hidden_alpha), output_activation, int(seed))


def _leaky(x: np.ndarray, alpha: float) -> np.ndarray:
    return np.where(x > 0, x, alpha * x)


def _leaky_deriv(x: np.ndarray, alpha: float) -> np.ndarray:
    return np.where(x > 0, 1.0, alpha)


def _out_act(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == TANH:
        return np.tanh(x)
    return 1.0 / (1.0 + np.exp(-x))


def _out_act_deriv(y: np.ndarray, kind: str) -> np.ndarray:
    # Both derivatives are cheapest in terms of the activation value itself.
    if kind == TANH:
        return 1.0 - y * y
    return y * (1.0 - y)


def forward(net: DenseNet, x) -> tuple[np.ndarray, GradientTape]:
    """Run the net on one input vector; returns (output, tape)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.in_dim,):
        raise ValueError(f"input shape {x.shape}, expected ({net.in_dim},)")
    if not np.isfinite(x).all():
        raise ValueError("non-finite input")
    inputs, preacts = [], []
    a = x
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(a)
        z = w @ a + b
        preacts.append(z)
        a = _out_act(z, net.output_activation) if l == last else _leaky(z, net.hidden_alpha)
    return a, GradientTape(inputs, preacts, a)


def backward(net: DenseNet, tape: GradientTape, output_grad) -> GradientTape:
    """Fill the tape with d(loss)/d(param) given d(loss)/d(output).

    Also sets ``tape.input_grad``, the gradient with respect to the network
    input, so a downstream net's backward pass can chain into an upstream
    one.
    """
    g = np.asarray(output_grad, dtype=float)
    if g.shape != tape.output.shape:
        raise ValueError(f"output_grad shape {g.shape}, expected {tape.output.shape}")
    last = len(net.weights) - 1
    delta = g * _out_act_deriv(tape.output, net.output_activation)
    weight_grads: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    bias_grads: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    for l in range(last, -1, -1):
        weight_grads[l] = np.outer(delta, tape.inputs[l])
        bias_grads[l] = delta
        upstream = net.weights[l].T @ delta
        if l > 0:
            delta = upstream * _leaky_deriv(tape.preacts[l - 1], net.hidden_alpha)
        else:
            tape.input_grad = upstream
    tape.weight_grads = weight_grads
    tape.bias_grads = bias_grads
    return tape


def accumulate(tapes: list[GradientTape], scale: float = 1.0) -> GradientTape:
    """Sum filled tapes into one gradient set, scaled; inputs are not kept."""
    if not tapes:
        raise ValueError("no tapes to accumulate")
    first = tapes[0]
    if first.weight_grads is None:
        raise ValueError("tapes must be filled by backward() first")
    out = GradientTape(inputs=[], preacts=[], output=first.output)
    out.weight_grads = [scale * sum(t.weight_grads[l] for t in tapes)
                        for l in range(len(first.weight_grads))]
    out.bias_grads = [scale * sum(t.bias_grads[l] for t in tapes)
                      for l in range(len(first.bias_grads))]
    return out


def sgd_step(net: DenseNet, tape: GradientTape, learning_rate: float) -> DenseNet:
    """One plain SGD step: p <- p - lr * grad(p).  Returns the updated net.

    lr = 0 is allowed and is the identity.
    """
    if learning_rate < 0:
        raise ValueError("learning_rate must be non-negative")
    if tape.weight_grads is None or tape.bias_grads is None:
        raise ValueError("tape has no gradients; call backward() first")
    for l, (dw, db) in enumerate(zip(tape.weight_grads, tape.bias_grads)):
        if not (np.isfinite(dw).all() and np.isfinite(db).all()):
            raise NonFiniteGradientError(f"layer {l}: non-finite gradient")
    weights = tuple(w - learning_rate * dw for w, dw in zip(net.weights, tape.weight_grads))
    biases = tuple(b - learning_rate * db for b, db in zip(net.biases, tape.bias_grads))
    return DenseNet(net.layer_dims, weights, biases,
                    net.hidden_alpha, net.output_activation, net.seed)


def nets_equal(a: DenseNet, b: DenseNet) -> bool:
    """Bit-level equality of parameters and structure."""
    return (a.layer_dims == b.layer_dims
            and a.output_activation == b.output_activation
            and a.hidden_alpha == b.hidden_alpha
            and all(np.array_equal(wa, wb) for wa, wb in zip(a.weights, b.weights))
            and all(np.array_equal(ba, bb) for ba, bb in zip(a.biases, b.biases)))


# ---------------------------------------------------------------------------
# Checkpoint format: plain text, one header block then per-layer blocks of
# row-major weights and the bias vector.  Floats are written with repr-level
# precision so a load reproduces the net bit for bit.
# ---------------------------------------------------------------------------

_MAGIC = "advrefine-densenet v1"


def save_net(net: DenseNet, path) -> None:
    lines = [
        _MAGIC,
        "layer_dims: " + " ".join(str(d) for d in net.layer_dims),
        f"hidden_alpha: {net.hidden_alpha!r}",
        f"output_activation: {net.output_activation}",
        f"seed: {net.seed}",
    ]
    for w, b in zip(net.weights, net.biases):
        for row in w:
            lines.append("w " + " ".join(repr(v) for v in row.tolist()))
        lines.append("b " + " ".join(repr(v) for v in b.tolist()))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_net(path) -> DenseNet:
    with open(path, encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"{path}: not a {_MAGIC} checkpoint")
    header = dict(ln.split(": ", 1) for ln in lines[1:5])
    layer_dims = tuple(int(d) for d in header["layer_dims"].split())
    alpha = float(header["hidden_alpha"])
    out_act = header["output_activation"]
    seed = int(header["seed"])
    values = iter(lines[5:])
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims, layer_dims[1:]):
        rows = []
        for _ in range(fan_out):
            tag, _, payload = next(values).partition(" ")
            if tag != "w":
                raise ValueError(f"{path}: malformed weight row")
            rows.append([float(v) for v in payload.split()])
        weights.append(np.array(rows))
        tag, _, payload = next(values).partition(" ")
        if tag != "b":
            raise ValueError(f"{path}: malformed bias row")
        biases.append(np.array([float(v) for v in payload.split()]))
    return DenseNet(layer_dims, tuple(weights), tuple(biases), alpha, out_act, seed)
