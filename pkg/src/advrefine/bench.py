"""Budget-matched comparison: adversarial refinement vs uniform random search.

Both methods get the same evaluation budget and the same per-seed root
seeds.  The adversarial side consumes budget in whole iterations of 2m
evaluations, so its count can trail random search by at most ``2m - 1``;
exact counts are part of the report.  Which method won is reported, never
asserted.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import refine
from .evaluation import SYNTHETIC, EvaluatorSpec, open_evaluator, synthetic_registry
from .param_space import DecodedParams, ParamSpace, uniform_sample

ADVERSARIAL = "adversarial"
RANDOM = "random"


@dataclass(frozen=True)
class TracePoint:
    evaluation: int  # 1-based count of evaluations so far
    accuracy: float
    best_accuracy: float


def random_search(space: ParamSpace, evaluator: EvaluatorSpec, budget: int,
                  seed: int) -> tuple[tuple[DecodedParams, float], tuple[TracePoint, ...]]:
    """budget i.i.d. uniform draws over the decoded space, best-so-far kept.

    Ties keep the earliest candidate, matching the refinement loop's
    best-so-far rule.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    best: tuple[DecodedParams, float] | None = None
    trace = []
    with open_evaluator(evaluator) as ev:
        for i in range(1, budget + 1):
            params = uniform_sample(space, rng)
            score = ev.evaluate(params)
            if best is None or score.accuracy > best[1]:
                best = (params, score.accuracy)
            trace.append(TracePoint(i, score.accuracy, best[1]))
    assert best is not None
    return best, tuple(trace)


@dataclass(frozen=True)
class MethodRow:
    method: str
    seed: int
    best_accuracy: float | None  # None when the method could not evaluate at all
    evaluations: int


@dataclass(frozen=True)
class BenchReport:
    objective: str
    budget: int
    n_seeds: int
    m: int
    rows: tuple[MethodRow, ...]
    aggregates: dict[str, dict[str, float]]       # method -> mean/median/stddev
    paired_differences: tuple[float, ...]         # first method minus second, per seed
    degenerate_budget: bool


def _aggregate(values: list[float]) -> dict[str, float]:
    return {
        "mean": statistics.mean(values),
        "median": statistics.median(values),
        "stddev": statistics.stdev(values) if len(values) > 1 else 0.0,
    }


def paired_compare(method_a: tuple[str, Callable[[int], tuple[float | None, int]]],
                   method_b: tuple[str, Callable[[int], tuple[float | None, int]]],
                   seeds: list[int], objective: str, budget: int, m: int,
                   degenerate: bool = False) -> BenchReport:
    """Run two (name, seed -> (best_acc, evals)) methods over paired seeds."""
    rows: list[MethodRow] = []
    diffs: list[float] = []
    for name, fn in (method_a, method_b):
        for seed in seeds:
            acc, evals = fn(seed)
            rows.append(MethodRow(name, seed, acc, evals))
    half = len(seeds)
    for i in range(half):
        a, b = rows[i].best_accuracy, rows[half + i].best_accuracy
        if a is not None and b is not None:
            diffs.append(a - b)
    aggregates = {}
    for name in (method_a[0], method_b[0]):
        accs = [r.best_accuracy for r in rows if r.method == name and r.best_accuracy is not None]
        if accs:
            aggregates[name] = _aggregate(accs)
    return BenchReport(objective=objective, budget=budget, n_seeds=len(seeds), m=m,
                       rows=tuple(rows), aggregates=aggregates,
                       paired_differences=tuple(diffs), degenerate_budget=degenerate)


def compare(objective: str, budget: int, n_seeds: int, m: int = 8,
            base_seed: int = 0) -> BenchReport:
    """Adversarial refinement vs random search on a registry objective."""
    registry = synthetic_registry()
    if objective not in registry:
        raise ValueError(f"unknown objective {objective!r} (have: {', '.join(sorted(registry))})")
    if n_seeds < 2:
        raise ValueError("n_seeds must be >= 2")
    space = registry[objective].canonical_space
    spec = EvaluatorSpec(kind=SYNTHETIC, space=space, name=objective)
    seeds = [base_seed + k for k in range(n_seeds)]
    degenerate = budget < 2 * m

    def run_adversarial(seed: int) -> tuple[float | None, int]:
        if degenerate:
            return None, 0
        config = refine.RefineConfig(
            space=space, evaluator=spec, m=m,
            max_iterations=budget // (2 * m), eval_budget=budget, seed=seed)
        result = refine.run(config)
        return (None if result.best is None else result.best[1]), result.evaluations

    def run_random(seed: int) -> tuple[float | None, int]:
        best, trace = random_search(space, spec, budget, seed)
        return best[1], len(trace)

    return paired_compare((ADVERSARIAL, run_adversarial), (RANDOM, run_random),
                          seeds, objective, budget, m, degenerate=degenerate)


def report_to_csv(report: BenchReport) -> str:
    """Per-seed rows, a blank line, then the aggregate block."""
    lines = ["objective,method,seed,best_acc,evaluations"]
    for r in report.rows:
        acc = "" if r.best_accuracy is None else repr(r.best_accuracy)
        lines.append(f"{report.objective},{r.method},{r.seed},{acc},{r.evaluations}")
    lines.append("")
    lines.append("method,mean,median,stddev")
    for name, agg in report.aggregates.items():
        lines.append(f"{name},{agg['mean']!r},{agg['median']!r},{agg['stddev']!r}")
    if report.paired_differences:
        diff_agg = _aggregate(list(report.paired_differences))
        lines.append(f"paired_diff,{diff_agg['mean']!r},{diff_agg['median']!r},{diff_agg['stddev']!r}")
    if report.degenerate_budget:
        lines.append("degenerate_budget,1,,")
    return "\n".join(lines) + "\n"
