"""Shared test oracles, kept independent of the code paths they check."""

from __future__ import annotations

from typing import Callable

import numpy as np

from advrefine import tinynet
from advrefine.tinynet import DenseNet


def clone_with(net: DenseNet, weights, biases) -> DenseNet:
    return DenseNet(net.layer_dims, tuple(np.array(w) for w in weights),
                    tuple(np.array(b) for b in biases),
                    net.hidden_alpha, net.output_activation, net.seed)


def central_diff_param_grads(net: DenseNet, loss: Callable[[DenseNet], float],
                             h: float = 1e-5) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Central finite differences of a scalar loss over every weight and bias.

    Never calls backward(); rebuilds perturbed nets and re-evaluates the
    loss, so it is a fully independent gradient oracle.
    """
    w_grads, b_grads = [], []
    for l in range(len(net.weights)):
        wg = np.zeros_like(net.weights[l])
        for idx in np.ndindex(net.weights[l].shape):
            ws = [w.copy() for w in net.weights]
            ws[l][idx] += h
            up = loss(clone_with(net, ws, net.biases))
            ws[l][idx] -= 2 * h
            down = loss(clone_with(net, ws, net.biases))
            wg[idx] = (up - down) / (2 * h)
        w_grads.append(wg)
        bg = np.zeros_like(net.biases[l])
        for idx in np.ndindex(net.biases[l].shape):
            bs = [b.copy() for b in net.biases]
            bs[l][idx] += h
            up = loss(clone_with(net, net.weights, bs))
            bs[l][idx] -= 2 * h
            down = loss(clone_with(net, net.weights, bs))
            bg[idx] = (up - down) / (2 * h)
        b_grads.append(bg)
    return w_grads, b_grads


def central_diff_input_grad(f: Callable[[np.ndarray], float], x: np.ndarray,
                            h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of a vector input."""
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xp[i] += h
        up = f(xp)
        xp[i] -= 2 * h
        down = f(xp)
        g[i] = (up - down) / (2 * h)
    return g


def dot_loss(x: np.ndarray, r: np.ndarray) -> Callable[[DenseNet], float]:
    """loss(net) = r . net(x): simple scalar probe with gradient r at the output."""

    def loss(net: DenseNet) -> float:
        y, _ = tinynet.forward(net, x)
        return float(r @ y)

    return loss


def zero_net(layer_dims, output_activation: str, alpha: float = 0.2) -> DenseNet:
    """All-zero weights and biases: constant output, no gradient flow inward."""
    dims = tuple(layer_dims)
    weights = tuple(np.zeros((dims[l + 1], dims[l])) for l in range(len(dims) - 1))
    biases = tuple(np.zeros(dims[l + 1]) for l in range(len(dims) - 1))
    return DenseNet(dims, weights, biases, alpha, output_activation, seed=0)
