import math

import numpy as np
import pytest

from advrefine import adversary, tinynet
from advrefine.adversary import (
    Discriminator,
    Generator,
    discriminator_objective,
    discriminator_update,
    generate,
    maybe_reinit,
    new_discriminator,
    new_generator,
    noise_batch,
    scores,
    worse_generator_update,
    worse_objective,
)
from helpers import zero_net

P = 5
M = 8


@pytest.fixture
def noise():
    return noise_batch(M, adversary.DEFAULT_NOISE_DIM, seed=7)


def zero_generator(gen_id=2, noise_dim=adversary.DEFAULT_NOISE_DIM, p=P):
    return Generator(zero_net([noise_dim, 4, p], tinynet.TANH), gen_id)


def zero_discriminator(p=P):
    return Discriminator(zero_net([p, 4, 1], tinynet.SIGMOID))


# --- generate -----------------------------------------------------------


def test_zero_weight_generator_emits_zero_vectors(noise):
    outs = generate(zero_generator(), noise)
    assert len(outs) == M
    for v in outs:
        assert np.array_equal(v, np.zeros(P))


def test_generate_reproducible_from_seed():
    g = new_generator(1, P, seed=3)
    a = generate(g, noise_batch(4, adversary.DEFAULT_NOISE_DIM, seed=11))
    b = generate(g, noise_batch(4, adversary.DEFAULT_NOISE_DIM, seed=11))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_generate_outputs_in_open_interval():
    g = new_generator(1, 3, seed=21)
    for v in generate(g, noise_batch(4, adversary.DEFAULT_NOISE_DIM, seed=2)):
        assert v.shape == (3,)
        assert np.all(v > -1.0) and np.all(v < 1.0)


def test_generate_clips_saturated_tanh():
    # Huge weights push tanh to exactly 1.0; generate must stay inside (-1, 1).
    dims = (2, 1)
    net = tinynet.DenseNet(dims, (np.array([[50.0, 50.0]]),), (np.array([0.0]),),
                           0.2, tinynet.TANH, 0)
    g = Generator(net, 1)
    v = adversary.generate_one(g, np.array([5.0, 5.0]))
    assert v[0] < 1.0


def test_generate_rejects_dimension_mismatch():
    g = new_generator(1, P, seed=3, noise_dim=16)
    with pytest.raises(ValueError):
        generate(g, noise_batch(4, 8, seed=1))


def test_noise_batch_reproducible():
    a = noise_batch(3, 6, seed=5)
    b = noise_batch(3, 6, seed=5)
    assert np.array_equal(a.samples, b.samples)
    assert np.isfinite(a.samples).all()


# --- discriminator update -------------------------------------------------


def constant_batches(m=M, p=P):
    better = [np.full(p, 0.5) for _ in range(m)]
    worse = [np.full(p, -0.5) for _ in range(m)]
    return better, worse


def test_objective_at_constant_half_is_two_log_half():
    better, worse = constant_batches()
    assert discriminator_objective(zero_discriminator(), better, worse) \
        == 2 * math.log(0.5)


def test_discriminator_separates_linearly_separable_batches():
    better, worse = constant_batches()
    d = new_discriminator(P, seed=0)
    for _ in range(200):
        d = discriminator_update(d, better, worse, lr=0.01)
    assert scores(d, better).mean() > 0.9
    assert scores(d, worse).mean() < 0.1


def test_discriminator_update_lr_zero_is_noop():
    better, worse = constant_batches()
    d = new_discriminator(P, seed=1)
    updated = discriminator_update(d, better, worse, lr=0.0)
    assert tinynet.nets_equal(updated.net, d.net)


def test_discriminator_update_reduces_its_loss_at_small_lr():
    rng = np.random.default_rng(9)
    for seed in range(5):
        d = new_discriminator(P, seed=seed)
        better = [rng.uniform(-0.9, 0.9, P) for _ in range(4)]
        worse = [rng.uniform(-0.9, 0.9, P) for _ in range(4)]
        before = -discriminator_objective(d, better, worse)
        after = -discriminator_objective(
            discriminator_update(d, better, worse, lr=1e-4), better, worse)
        assert after <= before + 1e-9


# --- worse generator update ------------------------------------------------


def test_constant_discriminator_gives_zero_generator_gradient(noise):
    g = new_generator(2, P, seed=4)
    updated = worse_generator_update(g, zero_discriminator(), noise, lr=0.05)
    assert tinynet.nets_equal(updated.net, g.net)


def test_worse_objective_at_constant_half(noise):
    g = new_generator(2, P, seed=4)
    assert worse_objective(g, zero_discriminator(), noise) \
        == pytest.approx(math.log(0.5), abs=1e-12)


def test_generator_climbs_trained_discriminator(noise):
    better, worse = constant_batches()
    d = new_discriminator(P, seed=0)
    for _ in range(200):
        d = discriminator_update(d, better, worse, lr=0.01)
    g = new_generator(2, P, seed=12)
    start = scores(d, generate(g, noise)).mean()
    for _ in range(100):
        g = worse_generator_update(g, d, noise, lr=0.01)
    assert scores(d, generate(g, noise)).mean() > start


def test_generator_update_reduces_its_loss_at_small_lr():
    for seed in range(5):
        d = new_discriminator(P, seed=seed + 50)
        g = new_generator(2, P, seed=seed)
        z = noise_batch(4, adversary.DEFAULT_NOISE_DIM, seed=seed + 100)
        before = worse_objective(g, d, z)
        after = worse_objective(worse_generator_update(g, d, z, lr=1e-4), d, z)
        assert after <= before + 1e-9


def test_updates_never_touch_the_other_network(noise):
    better, worse = constant_batches()
    d = new_discriminator(P, seed=1)
    g = new_generator(2, P, seed=2)
    g_before = g.net
    d2 = discriminator_update(d, better, worse, lr=0.01)
    assert tinynet.nets_equal(g.net, g_before)  # generator untouched
    d_snapshot = d2.net
    worse_generator_update(g, d2, noise, lr=0.01)
    assert tinynet.nets_equal(d2.net, d_snapshot)  # judge untouched


# --- reinit rule ------------------------------------------------------------


def test_reinit_needs_two_consecutive_equal_verdicts():
    g = new_generator(2, P, seed=6)
    assert maybe_reinit(g, (False, True), seed=1) is g
    assert maybe_reinit(g, (True, False), seed=1) is g
    assert maybe_reinit(g, (False, False), seed=1) is g


def test_reinit_fires_on_double_equality():
    g = new_generator(2, P, seed=6)
    reborn = maybe_reinit(g, (True, True), seed=77)
    assert reborn is not g
    assert not tinynet.nets_equal(reborn.net, g.net)
    assert reborn.id == g.id
    assert reborn.net.layer_dims == g.net.layer_dims
