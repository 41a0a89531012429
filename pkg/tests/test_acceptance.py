"""Acceptance suite: one test per shipping criterion, each with its stated
runtime bound.  The terminal summary prints one PASS/FAIL line per test."""

import time
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from advrefine import adversary, cli, refine, tinynet
from advrefine.adversary import (
    Discriminator,
    Generator,
    discriminator_update,
    new_discriminator,
    scores,
)
from advrefine.bench import ADVERSARIAL, RANDOM, compare
from advrefine.evaluation import EvaluatorSpec, exhaustive_optimum, synthetic_registry
from advrefine.param_space import INTEGER, builtin_spaces, rescale
from advrefine.refine import RefineConfig, run
from helpers import central_diff_param_grads, dot_loss, zero_net

FIXTURE = Path(str(resources.files("advrefine").joinpath("configs/modelnet_ridge.yaml")))


class Deadline:
    def __init__(self, seconds: float):
        self.seconds = seconds
        self.start = time.monotonic()

    def check(self) -> None:
        elapsed = time.monotonic() - self.start
        assert elapsed < self.seconds, f"took {elapsed:.1f}s, budget {self.seconds}s"


def test_gradient_correctness():
    """>=50 random small nets: analytic grads match central differences."""
    deadline = Deadline(10)
    rng = np.random.default_rng(20240810)
    checked = 0
    while checked < 50:
        for out_act in (tinynet.TANH, tinynet.SIGMOID):
            n_layers = int(rng.integers(1, 4))
            dims = [int(rng.integers(1, 9)) for _ in range(n_layers + 1)]
            net = tinynet.init(dims, output_activation=out_act,
                               seed=int(rng.integers(1 << 31)))
            x = rng.standard_normal(dims[0])
            r = rng.standard_normal(dims[-1])
            _, tape = tinynet.forward(net, x)
            tape = tinynet.backward(net, tape, r)
            fd_w, fd_b = central_diff_param_grads(net, dot_loss(x, r), h=1e-5)
            for got, want in zip(tape.weight_grads + tape.bias_grads, fd_w + fd_b):
                np.testing.assert_allclose(got, want, rtol=1e-4, atol=1e-8)
            checked += 1
    assert checked >= 50
    deadline.check()


def test_rescale_conformance():
    """10k random raw vectors x the three shipped layouts: bounds, limits,
    monotonicity."""
    deadline = Deadline(5)
    rng = np.random.default_rng(7)
    for space in builtin_spaces().values():
        raws = rng.uniform(-1 + 1e-12, 1 - 1e-12, size=(10_000, space.dim))
        for raw in raws:
            space.validate_decoded(rescale(raw, space))
        # bounds attained at the tanh limits
        hi = rescale(np.full(space.dim, 1 - 1e-12), space)
        lo = rescale(np.full(space.dim, -1 + 1e-12), space)
        for slot, h, l in zip(space.slots, hi, lo):
            if slot.kind == INTEGER:
                assert h == int(slot.pm_max) and l == int(slot.pm_min)
            else:
                assert h == len(slot.choices) - 1 and l == 0
        # monotone per slot
        for _ in range(2000):
            raw = rng.uniform(-1 + 1e-12, 1 - 1e-12, size=space.dim)
            j = int(rng.integers(space.dim))
            bumped = raw.copy()
            bumped[j] = rng.uniform(raw[j], 1 - 1e-12)
            assert rescale(raw, space)[j] <= rescale(bumped, space)[j]
    deadline.check()


def test_loop_contract():
    """Constant evaluator, 100 iterations: 2m evaluations each, sticky
    winner, constant best, untouched generator bit-identical."""
    deadline = Deadline(5)
    space = synthetic_registry()["constant"].canonical_space
    spec = EvaluatorSpec(kind="synthetic", space=space, name="constant", cache=False)
    m = 2
    config = RefineConfig(space=space, evaluator=spec, m=m, max_iterations=100,
                          eval_budget=400, noise_dim=8, seed=31,
                          gen_hidden=(16, 16), disc_hidden=(16, 8))
    batch_sizes = []
    real_open = refine.open_evaluator

    class Counting:
        def __init__(self, inner):
            self.inner = inner

        def evaluate_batch(self, batch):
            batch_sizes.append(len(batch))
            return self.inner.evaluate_batch(batch)

        def __enter__(self):
            return self

        def __exit__(self, *exc):
            self.inner.close()

    refine.open_evaluator = lambda s: Counting(real_open(s))
    try:
        g1_states = []
        result = run(config, observer=lambda it, g1, g2, d: g1_states.append(g1))
    finally:
        refine.open_evaluator = real_open

    assert len(result.log) == 100
    assert batch_sizes == [2 * m] * 100
    assert all(r.winner == 1 for r in result.log)  # ties stay with the first winner
    assert all(r.best_accuracy == 0.5 for r in result.log)
    assert result.best[1] == 0.5
    first = g1_states[0]
    assert all(tinynet.nets_equal(g.net, first.net) for g in g1_states)
    deadline.check()


def test_desk_scale_optimization():
    """ridge, m=8, 500-evaluation budget: >=8/10 seeds within 0.05 of the
    exhaustively computed optimum."""
    deadline = Deadline(60)
    obj = synthetic_registry()["ridge"]
    optimum, _ = exhaustive_optimum(obj.canonical_space, obj.fn)
    assert optimum == obj.optimum
    spec = EvaluatorSpec(kind="synthetic", space=obj.canonical_space, name="ridge")
    hits = 0
    for seed in range(10):
        config = RefineConfig(space=obj.canonical_space, evaluator=spec, m=8,
                              max_iterations=1000, eval_budget=500, seed=seed)
        result = run(config)
        assert result.evaluations <= 500
        if optimum - result.best[1] <= 0.05:
            hits += 1
    assert hits >= 8
    deadline.check()


def test_reinit_rule():
    """Identically-decoding generators trigger exactly one loser reset."""
    deadline = Deadline(5)
    space = synthetic_registry()["constant"].canonical_space
    spec = EvaluatorSpec(kind="synthetic", space=space, name="constant")
    config = RefineConfig(space=space, evaluator=spec, m=2, max_iterations=6,
                          eval_budget=100, noise_dim=8, seed=13,
                          gen_hidden=(8, 8), disc_hidden=(8, 4))
    state = refine._LoopState(
        Generator(zero_net([8, 4, space.dim], tinynet.TANH), 1),
        Generator(zero_net([8, 4, space.dim], tinynet.TANH), 2),
        Discriminator(zero_net([space.dim, 4, 1], tinynet.SIGMOID)),
    )
    result = run(config, initial=state)
    fired = [r.reinit_fired for r in result.log]
    assert fired == [False, True, False, False, False, False]
    assert sum(fired) == 1
    deadline.check()


def test_discriminator_separation():
    """200 updates on fixed separable batches: D(better)>0.9, D(worse)<0.1."""
    deadline = Deadline(5)
    p = 9
    better = [np.full(p, 0.5) for _ in range(8)]
    worse = [np.full(p, -0.5) for _ in range(8)]
    d = new_discriminator(p, seed=0)
    for _ in range(200):
        d = discriminator_update(d, better, worse, lr=0.01)
    assert scores(d, better).mean() > 0.9
    assert scores(d, worse).mean() < 0.1
    deadline.check()


def test_reproducibility(tmp_path):
    """Two CLI runs from identical manifests produce byte-identical CSVs."""
    deadline = Deadline(30)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert cli.main(["run", "--config", str(FIXTURE), "--out", str(out_a)]) == 0
    assert cli.main(["run", "--config", str(out_a / "manifest"),
                     "--out", str(out_b)]) == 0
    assert (out_a / "manifest").read_bytes() != b""
    assert (out_a / "iterations.csv").read_bytes() == (out_b / "iterations.csv").read_bytes()
    deadline.check()


def test_budget_matched_benchmark(tmp_path, capsys):
    """bench on deceptive, budget 500, 10 seeds: parity within 2m-1 and
    recomputable aggregates; superiority only reported."""
    deadline = Deadline(120)
    assert cli.main(["bench", "--objective", "deceptive", "--budget", "500",
                     "--seeds", "10", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "difference (adversarial - random)" in out  # reported, not asserted

    report = compare("deceptive", budget=500, n_seeds=10)
    m = report.m
    by_seed = {}
    for row in report.rows:
        by_seed.setdefault(row.seed, {})[row.method] = row
    assert len(by_seed) == 10
    for counts in by_seed.values():
        a, r = counts[ADVERSARIAL], counts[RANDOM]
        assert a.evaluations <= 500 and r.evaluations <= 500
        assert abs(r.evaluations - a.evaluations) <= 2 * m - 1
    for method in (ADVERSARIAL, RANDOM):
        accs = sorted(row.best_accuracy for row in report.rows if row.method == method)
        mean = sum(accs) / len(accs)
        median = (accs[4] + accs[5]) / 2
        assert report.aggregates[method]["mean"] == pytest.approx(mean, abs=1e-12)
        assert report.aggregates[method]["median"] == pytest.approx(median, abs=1e-12)
    deadline.check()
