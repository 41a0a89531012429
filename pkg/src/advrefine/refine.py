"""The outer refinement loop.

Each iteration: draw two fresh noise batches, run both generators, decode
and evaluate all 2m candidates, label the generator with the higher mean
accuracy the winner, train the judge on (winner batch = 1, loser batch = 0),
push the loser downhill through the judge, and reinitialize the loser if
its decoded probe output has matched the winner's for two consecutive
iterations.  The best individual candidate ever scored is tracked
throughout.

Every random draw derives from the root seed through fixed spawn keys
(probe vector; initial nets; per-iteration noise per generator; per
-iteration reinit seeds), so runs are reproducible and evaluation fan-out
cannot perturb them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import adversary, tinynet
from .adversary import Discriminator, Generator
from .evaluation import (
    EvaluationError,
    EvaluatorSpec,
    mean_accuracy,
    open_evaluator,
)
from .param_space import DecodedParams, ParamSpace, rescale

log = logging.getLogger("advrefine.refine")

CSV_HEADER = "iteration,acc1,acc2,winner,best_acc,d_loss,g_loss,reinit"

# Spawn-key domains for deriving child seeds from the root seed.
_PROBE, _NETS, _NOISE, _REINIT = 0, 1, 2, 3


def child_seed(root: int, *key: int) -> int:
    """Derive an independent child seed from the root via a fixed spawn key."""
    ss = np.random.SeedSequence(root, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class RefineConfig:
    space: ParamSpace
    evaluator: EvaluatorSpec
    m: int = 8
    max_iterations: int = 50
    eval_budget: int = 1000
    lr_d: float = 0.01
    lr_g: float = 0.01
    noise_dim: int = adversary.DEFAULT_NOISE_DIM
    seed: int = 0
    gen_hidden: tuple[int, ...] = adversary.DEFAULT_GEN_HIDDEN
    disc_hidden: tuple[int, ...] = adversary.DEFAULT_DISC_HIDDEN
    leaky_slope: float = tinynet.DEFAULT_LEAKY_SLOPE

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.eval_budget < 2 * self.m:
            raise ValueError("eval_budget must be at least 2*m")
        if self.lr_d <= 0 or self.lr_g <= 0:
            raise ValueError("learning rates must be positive")
        if self.noise_dim < 1:
            raise ValueError("noise_dim must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    acc_1: float
    acc_2: float
    winner: int
    best_params: DecodedParams
    best_accuracy: float
    d_loss: float
    g_loss: float
    reinit_fired: bool


@dataclass(frozen=True)
class RefineResult:
    best: tuple[DecodedParams, float] | None  # None when nothing was evaluated
    log: tuple[IterationRecord, ...]
    evaluations: int


class RefineError(RuntimeError):
    """An iteration aborted; the log of completed iterations is attached."""

    def __init__(self, message: str, partial_log: tuple[IterationRecord, ...],
                 best: tuple[DecodedParams, float] | None, evaluations: int):
        super().__init__(message)
        self.partial_log = partial_log
        self.best = best
        self.evaluations = evaluations


def tie_break(acc_1: float, acc_2: float, prev_winner: int | None = None) -> int:
    """Pick the winner label; exact ties stick with the previous winner."""
    if acc_1 > acc_2:
        return 1
    if acc_2 > acc_1:
        return 2
    return prev_winner if prev_winner is not None else 1


@dataclass
class _LoopState:
    g1: Generator
    g2: Generator
    d: Discriminator


def initial_state(config: RefineConfig) -> _LoopState:
    p = config.space.dim
    g1 = adversary.new_generator(1, p, child_seed(config.seed, _NETS, 1),
                                 config.noise_dim, config.gen_hidden, config.leaky_slope)
    g2 = adversary.new_generator(2, p, child_seed(config.seed, _NETS, 2),
                                 config.noise_dim, config.gen_hidden, config.leaky_slope)
    d = adversary.new_discriminator(p, child_seed(config.seed, _NETS, 3),
                                    config.disc_hidden, config.leaky_slope)
    return _LoopState(g1, g2, d)


def run(config: RefineConfig,
        initial: _LoopState | None = None,
        observer: Callable[[int, Generator, Generator, Discriminator], None] | None = None,
        ) -> RefineResult:
    """Run the refinement loop to its iteration or evaluation budget.

    ``initial`` overrides the seeded starting networks (tests use this to
    stage degenerate states); ``observer`` is called after every iteration
    with (iteration, g1, g2, d).  Fully deterministic given the config seed
    and a synthetic evaluator.
    """
    state = initial if initial is not None else initial_state(config)
    probe = np.random.default_rng(
        child_seed(config.seed, _PROBE)).standard_normal(config.noise_dim)
    m = config.m
    records: list[IterationRecord] = []
    best: tuple[DecodedParams, float] | None = None
    evals_used = 0
    prev_winner: int | None = None
    history = (False, False)

    with open_evaluator(config.evaluator) as evaluator:
        for it in range(1, config.max_iterations + 1):
            if evals_used + 2 * m > config.eval_budget:
                log.info("budget exhausted after %d evaluations", evals_used)
                break
            z1 = adversary.noise_batch(m, config.noise_dim, child_seed(config.seed, _NOISE, it, 1))
            z2 = adversary.noise_batch(m, config.noise_dim, child_seed(config.seed, _NOISE, it, 2))
            raw1 = adversary.generate(state.g1, z1)
            raw2 = adversary.generate(state.g2, z2)
            decoded = [rescale(r, config.space) for r in raw1 + raw2]
            try:
                scores = evaluator.evaluate_batch(decoded)
            except EvaluationError as exc:
                raise RefineError(f"iteration {it}: {exc}", tuple(records),
                                  best, evals_used) from exc
            evals_used += 2 * m
            for s in scores:
                if best is None or s.accuracy > best[1]:
                    best = (s.params, s.accuracy)
            acc_1 = mean_accuracy(scores[:m])
            acc_2 = mean_accuracy(scores[m:])
            winner = tie_break(acc_1, acc_2, prev_winner)
            prev_winner = winner

            # Probe equality is judged on the generators as they stood when
            # producing this iteration's candidates.
            probe_eq = (rescale(adversary.generate_one(state.g1, probe), config.space)
                        == rescale(adversary.generate_one(state.g2, probe), config.space))
            history = (history[1], probe_eq)

            if winner == 1:
                better_raw, worse_raw, worse_noise = raw1, raw2, z2
                worse_gen = state.g2
            else:
                better_raw, worse_raw, worse_noise = raw2, raw1, z1
                worse_gen = state.g1
            d_loss = adversary.discriminator_objective(state.d, better_raw, worse_raw)
            state.d = adversary.discriminator_update(state.d, better_raw, worse_raw, config.lr_d)
            g_loss = adversary.worse_objective(worse_gen, state.d, worse_noise)
            updated = adversary.worse_generator_update(worse_gen, state.d, worse_noise, config.lr_g)
            reborn = adversary.maybe_reinit(updated, history,
                                            child_seed(config.seed, _REINIT, it))
            reinit_fired = reborn is not updated
            if reinit_fired:
                history = (False, False)
                log.info("iteration %d: reinitialized generator %d", it, reborn.id)
            if winner == 1:
                state.g2 = reborn
            else:
                state.g1 = reborn

            assert best is not None
            records.append(IterationRecord(
                iteration=it, acc_1=acc_1, acc_2=acc_2, winner=winner,
                best_params=best[0], best_accuracy=best[1],
                d_loss=d_loss, g_loss=g_loss, reinit_fired=reinit_fired,
            ))
            if observer is not None:
                observer(it, state.g1, state.g2, state.d)

    return RefineResult(best=best, log=tuple(records), evaluations=evals_used)


def records_to_csv(records) -> str:
    """Render iteration records as the run-log CSV (repr-exact floats)."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join([
            str(r.iteration), repr(r.acc_1), repr(r.acc_2), str(r.winner),
            repr(r.best_accuracy), repr(r.d_loss), repr(r.g_loss),
            str(int(r.reinit_fired)),
        ]))
    return "\n".join(lines) + "\n"
