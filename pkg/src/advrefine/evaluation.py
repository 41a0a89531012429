"""Evaluator contract: a decoded assignment goes in, an accuracy in [0, 1]
comes out.

Two evaluator kinds ship.  Synthetic objectives are pure functions over
normalized slot coordinates, cheap enough to search exhaustively, used for
desk-scale runs and tests.  External evaluators wrap a worker subprocess
speaking line-delimited JSON on its standard streams; that is the extension
point for plugging in real training jobs.

Worker protocol (one JSON document per line):

    request:  {"id": <int>, "params": [<decoded values>], "early_stop_c": <int>}
    response: {"id": <int>, "accuracy": <real>}
              {"id": <int>, "error": <string>}

Request ids are strictly increasing per connection; the worker may answer
out of order; extra keys in a response are ignored.  A response accuracy
outside [0, 1] is a protocol violation, never silently clamped.
"""

from __future__ import annotations

import itertools
import json
import math
import shlex
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass
from queue import Empty, Queue
from typing import Callable

from .param_space import (
    BOOLEAN,
    CATEGORICAL,
    INTEGER,
    DecodedParams,
    ParamSlot,
    ParamSpace,
)

SYNTHETIC = "synthetic"
EXTERNAL = "external"

DEFAULT_TIMEOUT = 3600.0


class EvaluationError(RuntimeError):
    """Worker crash, timeout, or malformed reply; carries the raw exchange."""

    def __init__(self, message: str, request: str | None = None, reply: str | None = None):
        super().__init__(message)
        self.request = request
        self.reply = reply


class ProtocolError(EvaluationError):
    """The worker answered, but outside the protocol contract."""


@dataclass(frozen=True)
class Score:
    """One evaluation result."""

    accuracy: float
    cost: float  # synthetic: evaluation count (1); external: wall seconds
    params: DecodedParams

    def __post_init__(self) -> None:
        if not (0.0 <= self.accuracy <= 1.0):
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        if self.cost < 0:
            raise ValueError("cost must be >= 0")


@dataclass(frozen=True)
class EvaluatorSpec:
    kind: str
    space: ParamSpace
    name: str | None = None          # synthetic objective name
    command: str | None = None       # external worker command line
    early_stop_c: int = 1
    cache: bool | None = None        # None: on for synthetic, off for external
    timeout: float = DEFAULT_TIMEOUT
    pool_size: int = 1

    def __post_init__(self) -> None:
        if self.kind == SYNTHETIC:
            if self.name not in synthetic_registry():
                known = ", ".join(sorted(synthetic_registry()))
                raise ValueError(f"unknown synthetic objective {self.name!r} (have: {known})")
        elif self.kind == EXTERNAL:
            if not self.command:
                raise ValueError("external evaluator needs a non-empty command")
            if self.early_stop_c < 1:
                raise ValueError("early_stop_c must be >= 1")
            if self.pool_size < 1:
                raise ValueError("pool_size must be >= 1")
        else:
            raise ValueError(f"unknown evaluator kind {self.kind!r}")

    @property
    def caching(self) -> bool:
        if self.cache is not None:
            return self.cache
        return self.kind == SYNTHETIC


def mean_accuracy(scores: list[Score]) -> float:
    """Arithmetic mean of the accuracies; exact, so order never matters."""
    if not scores:
        raise ValueError("mean_accuracy of an empty score list")
    return math.fsum(s.accuracy for s in scores) / len(scores)


# ---------------------------------------------------------------------------
# Synthetic objectives
#
# All objectives read normalized coordinates: an integer slot's value maps to
# t = (v - min) / (max - min), a choice index to t = i / (K - 1).  That makes
# every objective total over any space, while each ships with a canonical
# small space whose optimum has been found by exhaustive enumeration and is
# frozen below as a fixture (a test re-derives it).
# ---------------------------------------------------------------------------

def normalized_coords(space: ParamSpace, params: DecodedParams) -> tuple[float, ...]:
    out = []
    for slot, v in zip(space.slots, params):
        if slot.kind == INTEGER:
            out.append((v - slot.pm_min) / (slot.pm_max - slot.pm_min))
        else:
            out.append(v / (len(slot.choices) - 1))
    return tuple(out)


def _gauss(t: float, mu: float, sigma: float) -> float:
    return math.exp(-((t - mu) ** 2) / (2.0 * sigma * sigma))


def _ridge(space: ParamSpace, params: DecodedParams) -> float:
    # Smooth and unimodal: per-slot bell scores multiplied together.
    acc = 1.0
    for slot, t in zip(space.slots, normalized_coords(space, params)):
        if slot.kind == INTEGER:
            acc *= _gauss(t, 0.62, 0.30)
        else:
            acc *= _gauss(t, 0.66, 0.35)
    return acc


def _deceptive(space: ParamSpace, params: DecodedParams) -> float:
    # A broad hill and a much narrower, higher one.
    t = normalized_coords(space, params)
    broad = 0.72 * math.exp(-sum((x - 0.30) ** 2 for x in t) / (2.0 * 0.22**2))
    narrow = 0.98 * math.exp(-sum((x - 0.85) ** 2 for x in t) / (2.0 * 0.045**2))
    return max(broad, narrow)


def _plateau(space: ParamSpace, params: DecodedParams) -> float:
    # Flat almost everywhere; a single step up governed by the first slot.
    t0 = normalized_coords(space, params)[0]
    return 0.88 if t0 >= 0.82 else 0.24


def _constant(space: ParamSpace, params: DecodedParams) -> float:
    return 0.5


@dataclass(frozen=True)
class SyntheticObjective:
    name: str
    fn: Callable[[ParamSpace, DecodedParams], float]
    canonical_space: ParamSpace
    optimum: float          # frozen result of exhaustive_optimum on the canonical space
    argmax: DecodedParams   # first maximizer in enumeration order


def _canonical_spaces() -> dict[str, ParamSpace]:
    return {
        "ridge": ParamSpace((
            ParamSlot("x", INTEGER, 0, 99),
            ParamSlot("y", INTEGER, 0, 19),
            ParamSlot("act", CATEGORICAL, 0, 4, ("sigmoid", "relu", "linear", "tanh")),
        )),
        "deceptive": ParamSpace((
            ParamSlot("x", INTEGER, 0, 199),
            ParamSlot("y", INTEGER, 0, 49),
        )),
        "plateau": ParamSpace((
            ParamSlot("x", INTEGER, 0, 99),
            ParamSlot("y", INTEGER, 0, 99),
        )),
        "constant": ParamSpace((
            ParamSlot("x", INTEGER, 0, 9),
            ParamSlot("flag", BOOLEAN, 0, 1),
        )),
    }


# Frozen optima for the canonical spaces; must stay reproducible by
# exhaustive_optimum().
_FIXTURES: dict[str, tuple[float, DecodedParams]] = {
    "ridge": (0.9989924064420987, (61, 12, 2)),
    "deceptive": (0.9675960067415883, (169, 42)),
    "plateau": (0.88, (82, 0)),
    "constant": (0.5, (0, 0)),
}


def synthetic_registry() -> dict[str, SyntheticObjective]:
    """Named pure objectives, each with its exhaustively-verified optimum."""
    fns = {"ridge": _ridge, "deceptive": _deceptive,
           "plateau": _plateau, "constant": _constant}
    spaces = _canonical_spaces()
    out = {}
    for name, fn in fns.items():
        optimum, argmax = _FIXTURES[name]
        out[name] = SyntheticObjective(name, fn, spaces[name], optimum, argmax)
    return out


def exhaustive_optimum(space: ParamSpace,
                       fn: Callable[[ParamSpace, DecodedParams], float]) -> tuple[float, DecodedParams]:
    """Brute-force search over every assignment; first maximizer wins ties.

    Enumeration is lexicographic over per-slot decoded values, so the result
    is deterministic and usable as a frozen fixture.
    """
    best_acc = -1.0
    best: DecodedParams | None = None
    for combo in itertools.product(*(s.decoded_values() for s in space.slots)):
        acc = fn(space, combo)
        if acc > best_acc:
            best_acc, best = acc, combo
    assert best is not None
    return best_acc, best


# ---------------------------------------------------------------------------
# Evaluator sessions
# ---------------------------------------------------------------------------

class SyntheticEvaluator:
    """Pure in-process evaluator; caches by decoded assignment."""

    def __init__(self, spec: EvaluatorSpec):
        if spec.kind != SYNTHETIC:
            raise ValueError("spec is not synthetic")
        self.spec = spec
        self._fn = synthetic_registry()[spec.name].fn
        self._cache: dict[DecodedParams, Score] = {}

    def evaluate(self, params: DecodedParams) -> Score:
        params = self.spec.space.validate_decoded(params)
        if self.spec.caching and params in self._cache:
            return self._cache[params]
        acc = self._fn(self.spec.space, params)
        score = Score(accuracy=acc, cost=1.0, params=params)
        if self.spec.caching:
            self._cache[params] = score
        return score

    def evaluate_batch(self, batch: list[DecodedParams]) -> list[Score]:
        return [self.evaluate(p) for p in batch]

    def close(self) -> None:
        pass

    def __enter__(self) -> "SyntheticEvaluator":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class _WorkerProcess:
    """One worker subprocess with a background reply reader."""

    def __init__(self, command: str):
        self.command = command
        self.proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
            text=True, bufsize=1,
        )
        self.replies: Queue = Queue()
        self.stderr_tail: deque[str] = deque(maxlen=40)
        self._out_thread = threading.Thread(target=self._pump_stdout, daemon=True)
        self._err_thread = threading.Thread(target=self._pump_stderr, daemon=True)
        self._out_thread.start()
        self._err_thread.start()

    def _pump_stdout(self) -> None:
        for line in self.proc.stdout:
            self.replies.put(line.rstrip("\n"))
        self.replies.put(None)  # EOF sentinel

    def _pump_stderr(self) -> None:
        for line in self.proc.stderr:
            self.stderr_tail.append(line.rstrip("\n"))

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class ExternalEvaluator:
    """Session against one or more worker subprocesses.

    Requests carry strictly increasing ids per connection.  Batches are
    dealt round-robin across the pool and pipelined; replies are matched
    by id, so workers may answer in any order.
    """

    def __init__(self, spec: EvaluatorSpec):
        if spec.kind != EXTERNAL:
            raise ValueError("spec is not external")
        self.spec = spec
        self._workers = [_WorkerProcess(spec.command) for _ in range(spec.pool_size)]
        self._next_id = 1
        self._cache: dict[DecodedParams, Score] = {}

    def evaluate(self, params: DecodedParams) -> Score:
        return self.evaluate_batch([params])[0]

    def evaluate_batch(self, batch: list[DecodedParams]) -> list[Score]:
        batch = [self.spec.space.validate_decoded(p) for p in batch]
        results: list[Score | None] = [None] * len(batch)
        assigned: list[list[tuple[int, int, str]]] = [[] for _ in self._workers]
        for pos, params in enumerate(batch):
            if self.spec.caching and params in self._cache:
                results[pos] = self._cache[params]
                continue
            req_id = self._next_id
            self._next_id += 1
            line = json.dumps({"id": req_id, "params": list(params),
                               "early_stop_c": self.spec.early_stop_c})
            assigned[pos % len(self._workers)].append((pos, req_id, line))
        for worker, jobs in zip(self._workers, assigned):
            for _, _, line in jobs:
                self._send(worker, line)
        for worker, jobs in zip(self._workers, assigned):
            pending = {req_id: (pos, line) for pos, req_id, line in jobs}
            # The timeout is per request: the clock restarts whenever the
            # (serial) worker delivers a reply, which also makes the gap a
            # fair wall-time cost for the request just answered.
            last_progress = time.monotonic()
            while pending:
                reply = self._recv(worker, last_progress)
                req_id, accuracy = self._parse_reply(worker, reply, pending)
                now = time.monotonic()
                pos, _ = pending.pop(req_id)
                score = Score(accuracy=accuracy, cost=now - last_progress,
                              params=batch[pos])
                last_progress = now
                results[pos] = score
                if self.spec.caching:
                    self._cache[batch[pos]] = score
        return results  # type: ignore[return-value]

    def _send(self, worker: _WorkerProcess, line: str) -> None:
        try:
            worker.proc.stdin.write(line + "\n")
            worker.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EvaluationError(
                f"worker {worker.command!r} is gone: {exc}; stderr tail: "
                + " | ".join(worker.stderr_tail),
                request=line) from exc

    def _recv(self, worker: _WorkerProcess, last_progress: float) -> str:
        remaining = self.spec.timeout - (time.monotonic() - last_progress)
        try:
            reply = worker.replies.get(timeout=max(remaining, 0.001))
        except Empty:
            raise EvaluationError(
                f"worker {worker.command!r} timed out after {self.spec.timeout}s")
        if reply is None:
            raise EvaluationError(
                f"worker {worker.command!r} closed its output; stderr tail: "
                + " | ".join(worker.stderr_tail))
        return reply

    def _parse_reply(self, worker: _WorkerProcess, reply: str,
                     pending: dict[int, tuple[int, str]]) -> tuple[int, float]:
        try:
            doc = json.loads(reply)
        except json.JSONDecodeError as exc:
            raise EvaluationError(f"malformed reply: {exc}", reply=reply) from exc
        if not isinstance(doc, dict) or "id" not in doc:
            raise ProtocolError("reply without an id", reply=reply)
        req_id = doc["id"]
        if req_id not in pending:
            raise ProtocolError(f"reply for unknown id {req_id}", reply=reply)
        request_line = pending[req_id][1]
        if "error" in doc:
            raise EvaluationError(f"worker error: {doc['error']}",
                                  request=request_line, reply=reply)
        if "accuracy" not in doc:
            raise ProtocolError("reply carries neither accuracy nor error",
                                request=request_line, reply=reply)
        accuracy = doc["accuracy"]
        if not isinstance(accuracy, (int, float)) or isinstance(accuracy, bool) \
                or not math.isfinite(accuracy) or not (0.0 <= accuracy <= 1.0):
            raise ProtocolError(f"accuracy {accuracy!r} outside [0, 1]",
                                request=request_line, reply=reply)
        return int(req_id), float(accuracy)

    def close(self) -> None:
        for worker in self._workers:
            worker.close()

    def __enter__(self) -> "ExternalEvaluator":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_evaluator(spec: EvaluatorSpec) -> SyntheticEvaluator | ExternalEvaluator:
    """Session factory; use as a context manager for external workers."""
    if spec.kind == SYNTHETIC:
        return SyntheticEvaluator(spec)
    return ExternalEvaluator(spec)


def evaluate(spec: EvaluatorSpec, params: DecodedParams) -> Score:
    """One-shot evaluation; spawns and tears down a session per call.

    Loops keep a session open via ``open_evaluator`` instead.
    """
    with open_evaluator(spec) as ev:
        return ev.evaluate(params)
