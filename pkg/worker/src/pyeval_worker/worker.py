"""Line-delimited JSON evaluation worker on standard streams.

Each request line is ``{"id": <int>, "params": [n1, n2, act1, act2, dropout],
"early_stop_c": <int>}``.  The worker trains the requested classifier on the
bundled toy dataset and answers ``{"id", "accuracy", "epochs", "best_epoch"}``
(the last two are telemetry; callers may ignore them).  Malformed requests or
internal failures produce ``{"id", "error"}`` - with ``id: null`` when the
line was not even parseable - and never kill the loop; the worker exits when
its input stream closes.

Per-request training seed is a stable hash of (run seed, request id), so a
given request is reproducible across connections while repeated evaluations
of the same parameters within one connection see fresh training noise.

The documented default configuration is ``DEFAULT_PARAMS`` (a modest tanh
net, no dropout): the natural baseline a refinement run should beat.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import data
from .train import DEFAULT_MAX_EPOCHS, NetParams, train_and_score

DEFAULT_RUN_SEED = 1
DEFAULT_PARAMS = (16, 16, 3, 3, 0)  # [n1, n2, act1, act2, dropout]


@dataclass(frozen=True)
class WorkerConfig:
    """Per-process settings; early_stop_c arrives with each request."""

    run_seed: int = DEFAULT_RUN_SEED
    max_epochs: int = DEFAULT_MAX_EPOCHS
    dataset: dict[str, np.ndarray] = field(default_factory=data.load)


def request_seed(run_seed: int, request_id: int) -> int:
    digest = hashlib.blake2b(f"{run_seed}:{request_id}".encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


def handle_request(line: str, config: WorkerConfig) -> dict:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        return {"id": None, "error": f"unparseable request: {exc}"}
    if not isinstance(doc, dict):
        return {"id": None, "error": "request must be a JSON object"}
    rid = doc.get("id")
    if not isinstance(rid, int) or isinstance(rid, bool):
        return {"id": None, "error": f"missing or non-integer id: {rid!r}"}
    try:
        params = NetParams.from_request(doc.get("params"))
        early_stop_c = doc.get("early_stop_c", 1)
        if not isinstance(early_stop_c, int) or early_stop_c < 1:
            raise ValueError(f"early_stop_c must be an integer >= 1, got {early_stop_c!r}")
        result = train_and_score(params, config.dataset, early_stop_c,
                                 seed=request_seed(config.run_seed, rid),
                                 max_epochs=config.max_epochs)
    except Exception as exc:  # noqa: BLE001 - any failure becomes an error reply
        return {"id": rid, "error": str(exc)}
    return {"id": rid, "accuracy": result.accuracy,
            "epochs": result.epochs, "best_epoch": result.best_epoch}


def serve(config: WorkerConfig | None = None, stdin=None, stdout=None) -> None:
    config = config if config is not None else WorkerConfig()
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        reply = handle_request(line, config)
        print(json.dumps(reply), file=stdout, flush=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pyeval-worker",
                                     description="toy-dataset evaluation worker (JSON lines on stdio)")
    parser.add_argument("--seed", type=int, default=DEFAULT_RUN_SEED,
                        help="run seed hashed with each request id")
    parser.add_argument("--max-epochs", type=int, default=DEFAULT_MAX_EPOCHS)
    args = parser.parse_args(argv)
    serve(WorkerConfig(run_seed=args.seed, max_epochs=args.max_epochs))
    return 0


if __name__ == "__main__":
    sys.exit(main())
