"""The two proposal generators, the judge network, and their update rules.

Both generators map Gaussian noise through a tanh-output dense net, so every
proposal lands in (-1, 1)^P.  The judge (a sigmoid-output net over the same
raw space) is trained to tell the currently-better generator's proposals
from the worse one's; its input gradient is then chained into the worse
generator, which descends on ``mean log(1 - D(G_b(z)))``.

The judge always sees raw tanh-space vectors, never decoded assignments:
raw space is scale-normalized, which keeps its training well conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tinynet
from .tinynet import DenseNet, forward, backward, accumulate, sgd_step

LOG_EPS = 1e-12

DEFAULT_NOISE_DIM = 32
DEFAULT_GEN_HIDDEN = (64, 64)
DEFAULT_DISC_HIDDEN = (64, 32)

# Largest float below 1: tanh can saturate to exactly 1.0 in float64, which
# would fall outside the open interval the rescaler demands.
_OPEN_ONE = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class Generator:
    net: DenseNet
    id: int  # 1 or 2

    @property
    def out_dim(self) -> int:
        return self.net.out_dim


@dataclass(frozen=True)
class Discriminator:
    net: DenseNet


@dataclass(frozen=True)
class NoiseBatch:
    """m i.i.d. standard-normal vectors, reproducible from the seed."""

    m: int
    samples: np.ndarray  # shape (m, noise_dim)
    seed: int

    def __post_init__(self) -> None:
        self.samples.flags.writeable = False


def noise_batch(m: int, noise_dim: int, seed: int) -> NoiseBatch:
    if m < 1:
        raise ValueError("batch size must be >= 1")
    samples = np.random.default_rng(seed).standard_normal((m, noise_dim))
    return NoiseBatch(m, samples, int(seed))


def new_generator(gen_id: int, out_dim: int, seed: int,
                  noise_dim: int = DEFAULT_NOISE_DIM,
                  hidden: tuple[int, ...] = DEFAULT_GEN_HIDDEN,
                  leaky_slope: float = tinynet.DEFAULT_LEAKY_SLOPE) -> Generator:
    net = tinynet.init((noise_dim, *hidden, out_dim),
                       hidden_alpha=leaky_slope,
                       output_activation=tinynet.TANH, seed=seed)
    return Generator(net, gen_id)


def new_discriminator(in_dim: int, seed: int,
                      hidden: tuple[int, ...] = DEFAULT_DISC_HIDDEN,
                      leaky_slope: float = tinynet.DEFAULT_LEAKY_SLOPE) -> Discriminator:
    net = tinynet.init((in_dim, *hidden, 1),
                       hidden_alpha=leaky_slope,
                       output_activation=tinynet.SIGMOID, seed=seed)
    return Discriminator(net)


def generate(g: Generator, noise: NoiseBatch) -> list[np.ndarray]:
    """Forward every noise sample through the generator.

    Outputs are clipped to the open interval (-1, 1) at float resolution;
    tanh itself can round to exactly +-1.0 once the net saturates.
    """
    if noise.samples.shape[1] != g.net.in_dim:
        raise ValueError(f"noise dim {noise.samples.shape[1]} != generator input dim {g.net.in_dim}")
    return [generate_one(g, z) for z in noise.samples]


def generate_one(g: Generator, z: np.ndarray) -> np.ndarray:
    """Single forward pass, clipped into the open interval like generate()."""
    y, _ = forward(g.net, z)
    return np.clip(y, -_OPEN_ONE, _OPEN_ONE)


def _score(d: Discriminator, x: np.ndarray) -> float:
    y, _ = forward(d.net, x)
    return float(y[0])


def scores(d: Discriminator, batch: list[np.ndarray]) -> np.ndarray:
    return np.array([_score(d, x) for x in batch])


def discriminator_objective(d: Discriminator, better_batch: list[np.ndarray],
                            worse_batch: list[np.ndarray]) -> float:
    """mean log D(better) + mean log(1 - D(worse)), logs clamped at 1e-12."""
    p_a = scores(d, better_batch)
    p_b = scores(d, worse_batch)
    return float(np.mean(np.log(np.maximum(p_a, LOG_EPS)))
                 + np.mean(np.log(np.maximum(1.0 - p_b, LOG_EPS))))


def worse_objective(g_b: Generator, d: Discriminator, noise: NoiseBatch) -> float:
    """mean log(1 - D(G_b(z))), the quantity the worse generator descends."""
    p = scores(d, generate(g_b, noise))
    return float(np.mean(np.log(np.maximum(1.0 - p, LOG_EPS))))


def discriminator_update(d: Discriminator, better_batch: list[np.ndarray],
                         worse_batch: list[np.ndarray], lr: float) -> Discriminator:
    """One SGD step pushing D(better) toward 1 and D(worse) toward 0.

    Ascent on ``mean log D(better) + mean log(1 - D(worse))`` implemented as
    descent on its negation.  Generator parameters are never touched.
    """
    if len(better_batch) != len(worse_batch):
        raise ValueError("better and worse batches must have equal length")
    m = len(better_batch)
    tapes = []
    for x in better_batch:
        y, tape = forward(d.net, x)
        p = max(float(y[0]), LOG_EPS)
        # d/dy of -log(y)/m; the sigmoid derivative in backward() keeps the
        # product finite even when y has saturated.
        tapes.append(backward(d.net, tape, np.array([-1.0 / (m * p)])))
    for x in worse_batch:
        y, tape = forward(d.net, x)
        q = max(1.0 - float(y[0]), LOG_EPS)
        tapes.append(backward(d.net, tape, np.array([1.0 / (m * q)])))
    grad = accumulate(tapes)
    return Discriminator(sgd_step(d.net, grad, lr))


def worse_generator_update(g_b: Generator, d: Discriminator,
                           noise: NoiseBatch, lr: float) -> Generator:
    """One SGD step on the worse generator, gradients chained through D.

    Descends ``mean log(1 - D(G_b(z)))``; the judge's parameters are left
    untouched, only its input gradient is used.
    """
    if noise.samples.shape[1] != g_b.net.in_dim:
        raise ValueError("noise dimension does not match the generator")
    m = noise.m
    tapes = []
    for z in noise.samples:
        raw, g_tape = forward(g_b.net, z)
        y, d_tape = forward(d.net, raw)
        q = max(1.0 - float(y[0]), LOG_EPS)
        d_tape = backward(d.net, d_tape, np.array([-1.0 / (m * q)]))
        tapes.append(backward(g_b.net, g_tape, d_tape.input_grad))
    grad = accumulate(tapes)
    return Generator(sgd_step(g_b.net, grad, lr), g_b.id)


def maybe_reinit(g_b: Generator, probe_equal_history: tuple[bool, bool],
                 seed: int) -> Generator:
    """Reset the worse generator after two consecutive probe-equal verdicts.

    ``probe_equal_history`` holds the last two iterations' equality verdicts
    (decoded outputs of both generators on the shared probe vector).  Only
    when both are true is a freshly initialized generator returned.
    """
    if not all(probe_equal_history):
        return g_b
    net = g_b.net
    fresh = tinynet.init(net.layer_dims, hidden_alpha=net.hidden_alpha,
                         output_activation=net.output_activation, seed=seed)
    return Generator(fresh, g_b.id)
