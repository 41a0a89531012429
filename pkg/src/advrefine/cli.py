"""Operator entry point: ``advrefine run|bench|selftest``.

``run`` loads a YAML config, writes a manifest that pins every resolved
setting (including the root seed, drawn from entropy if absent — an
unrecorded source of nondeterminism is never allowed), then executes the
refinement loop and drops its artifacts under ``--out``:

    manifest         resolved config snapshot; rerunning with
                     ``--config <out>/manifest`` reproduces the run exactly
    iterations.csv   one row per iteration (partial on evaluator failure)
    best.conf        best candidate found, or an explicit null
    checkpoints/     final generator and judge networks

``bench`` runs the budget-matched comparison harness, ``selftest`` a quick
built-in health check.  ``ADVREFINE_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, adversary, bench, evaluation, param_space, refine, tinynet
from .evaluation import EXTERNAL, SYNTHETIC, EvaluatorSpec
from .param_space import ParamSpace, builtin_spaces
from .refine import RefineConfig, RefineError

log = logging.getLogger("advrefine.cli")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config documents
# ---------------------------------------------------------------------------

def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"{where}: missing key {key!r}")
    return doc[key]


def _resolve_space(node) -> ParamSpace:
    if isinstance(node, str):
        spaces = builtin_spaces()
        if node not in spaces:
            raise ConfigError(f"space: unknown builtin {node!r} (have: {', '.join(sorted(spaces))})")
        return spaces[node]
    try:
        return param_space.space_from_mapping(node)
    except param_space.ParseError as exc:
        raise ConfigError(f"space: {exc}") from exc


def _resolve_evaluator(node, space: ParamSpace) -> EvaluatorSpec:
    if not isinstance(node, dict):
        raise ConfigError("evaluator: expected a mapping")
    kind = _require(node, "kind", "evaluator")
    try:
        if kind == SYNTHETIC:
            return EvaluatorSpec(
                kind=SYNTHETIC, space=space,
                name=_require(node, "name", "evaluator"),
                cache=node.get("cache"))
        if kind == EXTERNAL:
            return EvaluatorSpec(
                kind=EXTERNAL, space=space,
                command=_require(node, "command", "evaluator"),
                early_stop_c=int(node.get("early_stop_c", 1)),
                timeout=float(node.get("timeout", evaluation.DEFAULT_TIMEOUT)),
                pool_size=int(node.get("pool_size", 1)),
                cache=node.get("cache"))
    except ValueError as exc:
        raise ConfigError(f"evaluator: {exc}") from exc
    raise ConfigError(f"evaluator: unknown kind {kind!r}")


def load_run_config(path: Path, overrides: argparse.Namespace | None = None) -> RefineConfig:
    """Parse a run config (or a previously written manifest) plus CLI overrides."""
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    space = _resolve_space(_require(doc, "space", str(path)))
    run_node = doc.get("run", {})
    if not isinstance(run_node, dict):
        raise ConfigError("run: expected a mapping")
    ev_node = _require(doc, "evaluator", str(path))

    if overrides is not None:
        if getattr(overrides, "objective", None):
            ev_node = {"kind": SYNTHETIC, "name": overrides.objective}
        if getattr(overrides, "evaluator_cmd", None):
            base = dict(ev_node) if isinstance(ev_node, dict) else {}
            ev_node = {"kind": EXTERNAL, "command": overrides.evaluator_cmd,
                       "early_stop_c": base.get("early_stop_c", 1),
                       "timeout": base.get("timeout", evaluation.DEFAULT_TIMEOUT),
                       "pool_size": base.get("pool_size", 1)}
        for flag, key in (("seed", "seed"), ("budget", "eval_budget"),
                          ("iterations", "iterations"), ("m", "m")):
            value = getattr(overrides, flag, None)
            if value is not None:
                run_node = {**run_node, key: value}

    seed = run_node.get("seed")
    if seed is None:
        # Drawn once from OS entropy and recorded in the manifest.
        seed = int(np.random.SeedSequence().entropy) & ((1 << 63) - 1)
        log.info("no seed given; drew %d from entropy", seed)

    evaluator = _resolve_evaluator(ev_node, space)
    try:
        return RefineConfig(
            space=space,
            evaluator=evaluator,
            m=int(run_node.get("m", 8)),
            max_iterations=int(run_node.get("iterations", 50)),
            eval_budget=int(run_node.get("eval_budget", 1000)),
            lr_d=float(run_node.get("lr_d", 0.01)),
            lr_g=float(run_node.get("lr_g", 0.01)),
            noise_dim=int(run_node.get("noise_dim", adversary.DEFAULT_NOISE_DIM)),
            seed=int(seed),
            gen_hidden=tuple(run_node.get("gen_hidden", adversary.DEFAULT_GEN_HIDDEN)),
            disc_hidden=tuple(run_node.get("disc_hidden", adversary.DEFAULT_DISC_HIDDEN)),
            leaky_slope=float(run_node.get("leaky_slope", tinynet.DEFAULT_LEAKY_SLOPE)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"run: {exc}") from exc


def config_to_manifest(config: RefineConfig, out_dir: Path) -> dict:
    ev = config.evaluator
    ev_node: dict = {"kind": ev.kind}
    if ev.kind == SYNTHETIC:
        ev_node["name"] = ev.name
    else:
        ev_node.update(command=ev.command, early_stop_c=ev.early_stop_c,
                       timeout=ev.timeout, pool_size=ev.pool_size)
    if ev.cache is not None:
        ev_node["cache"] = ev.cache
    return {
        "advrefine_version": __version__,
        "root_seed": config.seed,
        "space": param_space.space_to_mapping(config.space),
        "run": {
            "m": config.m,
            "iterations": config.max_iterations,
            "eval_budget": config.eval_budget,
            "lr_d": config.lr_d,
            "lr_g": config.lr_g,
            "noise_dim": config.noise_dim,
            "seed": config.seed,
            "gen_hidden": list(config.gen_hidden),
            "disc_hidden": list(config.disc_hidden),
            "leaky_slope": config.leaky_slope,
        },
        "evaluator": ev_node,
        "outputs": {
            "dir": str(out_dir),
            "iterations_csv": "iterations.csv",
            "best": "best.conf",
            "checkpoints": "checkpoints",
        },
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = load_run_config(Path(args.config), args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = config_to_manifest(config, out_dir)
    (out_dir / "manifest").write_text(yaml.safe_dump(manifest, sort_keys=False))

    final = {}

    def keep_final(it, g1, g2, d):
        final.update(g1=g1, g2=g2, d=d)

    try:
        result = refine.run(config, observer=keep_final)
    except RefineError as exc:
        (out_dir / "iterations.csv").write_text(refine.records_to_csv(exc.partial_log))
        print(f"error: {exc}", file=sys.stderr)
        print(f"partial log ({len(exc.partial_log)} iterations) kept at "
              f"{out_dir / 'iterations.csv'}", file=sys.stderr)
        return 1

    (out_dir / "iterations.csv").write_text(refine.records_to_csv(result.log))
    _write_best(out_dir / "best.conf", config, result)
    if not final:
        state = refine.initial_state(config)
        final.update(g1=state.g1, g2=state.g2, d=state.d)
    ckpt = out_dir / "checkpoints"
    ckpt.mkdir(exist_ok=True)
    tinynet.save_net(final["g1"].net, ckpt / "g1.txt")
    tinynet.save_net(final["g2"].net, ckpt / "g2.txt")
    tinynet.save_net(final["d"].net, ckpt / "d.txt")

    if result.best is None:
        print("no candidate evaluated (zero iterations)")
    else:
        print(f"best accuracy {result.best[1]:.6f} after {result.evaluations} evaluations")
    print(f"artifacts in {out_dir}")
    return 0


def _write_best(path: Path, config: RefineConfig, result: refine.RefineResult) -> None:
    if result.best is None:
        doc: dict = {"candidate": None, "note": "no candidate evaluated"}
    else:
        params, acc = result.best
        doc = {"candidate": {
            "accuracy": float(acc),
            "params": {s.name: int(v) for s, v in zip(config.space.slots, params)},
            "labels": param_space.describe(config.space, params),
        }}
    path.write_text(yaml.safe_dump(doc, sort_keys=False))


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        report = bench.compare(args.objective, args.budget, args.seeds,
                               m=args.m, base_seed=args.seed or 0)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    csv_text = bench.report_to_csv(report)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "bench.csv"
    out_path.write_text(csv_text)
    for name, agg in report.aggregates.items():
        print(f"{name}: mean={agg['mean']:.6f} median={agg['median']:.6f} "
              f"stddev={agg['stddev']:.6f}")
    if report.paired_differences:
        mean_diff = sum(report.paired_differences) / len(report.paired_differences)
        print(f"mean best-accuracy difference (adversarial - random): {mean_diff:+.6f}")
    if report.degenerate_budget:
        print("warning: budget below one adversarial iteration (2*m); "
              "adversarial rows are empty")
    print(f"report written to {out_path}")
    return 0


# ---------------------------------------------------------------------------
# Selftest
# ---------------------------------------------------------------------------

def _fd_loss_grads(net: tinynet.DenseNet, x: np.ndarray, r: np.ndarray,
                   h: float = 1e-5) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Central-difference gradients of loss = r . net(x) over all parameters."""

    def loss_with(weights, biases) -> float:
        # DenseNet freezes the arrays it is given, so hand it copies.
        probe = tinynet.DenseNet(net.layer_dims,
                                 tuple(np.array(w) for w in weights),
                                 tuple(np.array(b) for b in biases),
                                 net.hidden_alpha, net.output_activation, net.seed)
        y, _ = tinynet.forward(probe, x)
        return float(r @ y)

    w_grads, b_grads = [], []
    for l in range(len(net.weights)):
        wg = np.zeros_like(net.weights[l])
        for idx in np.ndindex(net.weights[l].shape):
            ws = [w.copy() for w in net.weights]
            ws[l][idx] += h
            up = loss_with(ws, net.biases)
            ws[l][idx] -= 2 * h
            down = loss_with(ws, net.biases)
            wg[idx] = (up - down) / (2 * h)
        w_grads.append(wg)
        bg = np.zeros_like(net.biases[l])
        for idx in np.ndindex(net.biases[l].shape):
            bs = [b.copy() for b in net.biases]
            bs[l][idx] += h
            up = loss_with(net.weights, bs)
            bs[l][idx] -= 2 * h
            down = loss_with(net.weights, bs)
            bg[idx] = (up - down) / (2 * h)
        b_grads.append(bg)
    return w_grads, b_grads


def _check_gradients() -> None:
    rng = np.random.default_rng(7)
    for out_act in (tinynet.TANH, tinynet.SIGMOID):
        for _ in range(3):
            dims = [int(rng.integers(2, 5)) for _ in range(3)]
            net = tinynet.init(dims, output_activation=out_act,
                               seed=int(rng.integers(1 << 30)))
            x = rng.standard_normal(dims[0])
            r = rng.standard_normal(dims[-1])
            y, tape = tinynet.forward(net, x)
            tape = tinynet.backward(net, tape, r)
            fd_w, fd_b = _fd_loss_grads(net, x, r)
            for got, want in zip(tape.weight_grads + tape.bias_grads, fd_w + fd_b):
                np.testing.assert_allclose(got, want, rtol=1e-4, atol=1e-8)


def _check_rescale() -> None:
    rng = np.random.default_rng(11)
    for name, space in builtin_spaces().items():
        for _ in range(500):
            raw = rng.uniform(-1 + 1e-9, 1 - 1e-9, size=space.dim)
            space.validate_decoded(param_space.rescale(raw, space))
        hi = param_space.rescale(np.full(space.dim, 1 - 1e-12), space)
        lo = param_space.rescale(np.full(space.dim, -1 + 1e-12), space)
        for slot, h, l in zip(space.slots, hi, lo):
            top = int(slot.pm_max) if slot.kind == param_space.INTEGER else len(slot.choices) - 1
            bottom = int(slot.pm_min) if slot.kind == param_space.INTEGER else 0
            assert h == top, f"{name}.{slot.name}: upper limit decoded to {h}, wanted {top}"
            assert l == bottom, f"{name}.{slot.name}: lower limit decoded to {l}, wanted {bottom}"
        again = param_space.rescale(np.full(space.dim, 0.317), space)
        assert again == param_space.rescale(np.full(space.dim, 0.317), space)


def _check_tiny_refine() -> None:
    registry = evaluation.synthetic_registry()
    space = registry["ridge"].canonical_space
    spec = EvaluatorSpec(kind=SYNTHETIC, space=space, name="ridge")
    config = RefineConfig(space=space, evaluator=spec, m=2,
                          max_iterations=5, eval_budget=100, seed=5)
    result = refine.run(config)
    assert len(result.log) == 5, f"expected 5 iterations, got {len(result.log)}"
    assert result.evaluations == 20
    accs = [r.best_accuracy for r in result.log]
    assert accs == sorted(accs), "best-so-far decreased"


SELFTEST_CHECKS = (
    ("gradient-check", _check_gradients),
    ("rescale-properties", _check_rescale),
    ("tiny-refine", _check_tiny_refine),
)


def cmd_selftest(args: argparse.Namespace) -> int:
    failed = []
    for name, check in SELFTEST_CHECKS:
        try:
            check()
        except Exception as exc:  # noqa: BLE001 - report, don't crash
            failed.append(name)
            print(f"FAIL {name}: {exc}")
        else:
            print(f"ok   {name}")
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return 1
    print("all checks passed")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advrefine",
                                     description="adversarial hyperparameter refinement")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a refinement from a config file")
    p_run.add_argument("--config", required=True, help="YAML run config or a manifest")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--budget", type=int, default=None, help="override eval_budget")
    p_run.add_argument("--iterations", type=int, default=None)
    p_run.add_argument("--m", type=int, default=None)
    p_run.add_argument("--objective", default=None, help="switch to this synthetic objective")
    p_run.add_argument("--evaluator-cmd", default=None, help="switch to an external worker command")
    p_run.add_argument("--out", default="advrefine-out")
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("bench", help="compare against random search")
    p_bench.add_argument("--objective", required=True)
    p_bench.add_argument("--budget", type=int, required=True)
    p_bench.add_argument("--seeds", type=int, required=True, help="number of paired seeds (>= 2)")
    p_bench.add_argument("--m", type=int, default=8)
    p_bench.add_argument("--seed", type=int, default=0, help="base seed")
    p_bench.add_argument("--out", default="advrefine-out")
    p_bench.set_defaults(func=cmd_bench)

    p_self = sub.add_parser("selftest", help="run built-in health checks")
    p_self.set_defaults(func=cmd_selftest)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("ADVREFINE_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
