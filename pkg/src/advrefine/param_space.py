"""Searchable parameter spaces and the tanh-space <-> concrete-value mapping.

A :class:`ParamSpace` is an ordered list of slots.  Each slot is either an
integer range, a categorical choice, or a boolean flag (a categorical with
two fixed labels).  Generators emit raw vectors in (-1, 1)^P; ``rescale``
turns one of those into a concrete assignment: integers are affinely mapped
into [min, max] and rounded, categorical slots are binned into equal-width
buckets over the same affine image.

Decoded assignments are plain tuples of ints (the categorical entries are
choice indices), which keeps them hashable and trivially serializable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import yaml

INTEGER = "integer"
CATEGORICAL = "categorical"
BOOLEAN = "boolean"

KINDS = (INTEGER, CATEGORICAL, BOOLEAN)

BOOLEAN_LABELS = ("off", "on")

# Raw generator output: float vector with every component in (-1, 1).
RawParams = np.ndarray

# Decoded assignment: one int per slot (value or choice index).
DecodedParams = tuple[int, ...]


class StructureError(ValueError):
    """Shape/arity violation: wrong vector length, bad slot definition."""


class DomainError(ValueError):
    """A raw component falls outside the open interval (-1, 1)."""


class ParseError(ValueError):
    """A space config document violates the schema."""


@dataclass(frozen=True)
class ParamSlot:
    """One searchable parameter: an integer range or a finite choice."""

    name: str
    kind: str
    pm_min: float
    pm_max: float
    choices: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise StructureError(f"slot {self.name!r}: unknown kind {self.kind!r}")
        if not self.name:
            raise StructureError("slot name must be non-empty")
        if not (self.pm_max > self.pm_min):
            raise StructureError(
                f"slot {self.name!r}: max ({self.pm_max}) must exceed min ({self.pm_min})"
            )
        if self.kind == INTEGER:
            if self.pm_min != int(self.pm_min) or self.pm_max != int(self.pm_max):
                raise StructureError(f"slot {self.name!r}: integer bounds must be whole numbers")
            if self.choices:
                raise StructureError(f"slot {self.name!r}: integer slots take no choices")
        elif self.kind == BOOLEAN:
            if self.choices and self.choices != BOOLEAN_LABELS:
                raise StructureError(f"slot {self.name!r}: boolean labels are fixed")
            object.__setattr__(self, "choices", BOOLEAN_LABELS)
        else:
            if len(self.choices) < 2:
                raise StructureError(f"slot {self.name!r}: categorical needs >= 2 choices")
            if len(set(self.choices)) != len(self.choices):
                raise StructureError(f"slot {self.name!r}: duplicate choice labels")

    @property
    def cardinality(self) -> int:
        """Number of distinct decoded values this slot can take."""
        if self.kind == INTEGER:
            return int(self.pm_max) - int(self.pm_min) + 1
        return len(self.choices)

    def decoded_values(self) -> range:
        """Every decoded value, in ascending order."""
        if self.kind == INTEGER:
            return range(int(self.pm_min), int(self.pm_max) + 1)
        return range(len(self.choices))


@dataclass(frozen=True)
class ParamSpace:
    """Ordered collection of slots; P is the generator output dimension."""

    slots: tuple[ParamSlot, ...]

    def __post_init__(self) -> None:
        if isinstance(self.slots, list):
            object.__setattr__(self, "slots", tuple(self.slots))
        if len(self.slots) < 1:
            raise StructureError("a space needs at least one slot")
        names = [s.name for s in self.slots]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise StructureError(f"duplicate slot name {dup!r}")

    @property
    def dim(self) -> int:
        return len(self.slots)

    @property
    def pm_min(self) -> tuple[float, ...]:
        return tuple(s.pm_min for s in self.slots)

    @property
    def pm_max(self) -> tuple[float, ...]:
        return tuple(s.pm_max for s in self.slots)

    def size(self) -> int:
        """Total number of distinct decoded assignments."""
        return math.prod(s.cardinality for s in self.slots)

    def validate_decoded(self, values) -> DecodedParams:
        """Check a decoded assignment against every slot; return it as a tuple."""
        values = tuple(int(v) for v in values)
        if len(values) != self.dim:
            raise StructureError(f"expected {self.dim} values, got {len(values)}")
        for slot, v in zip(self.slots, values):
            if slot.kind == INTEGER:
                if not (slot.pm_min <= v <= slot.pm_max):
                    raise DomainError(f"slot {slot.name!r}: {v} outside [{slot.pm_min}, {slot.pm_max}]")
            elif not (0 <= v < len(slot.choices)):
                raise DomainError(f"slot {slot.name!r}: index {v} outside 0..{len(slot.choices) - 1}")
        return values


def _round_half_away(v: float) -> int:
    # Symmetric and platform-stable, unlike banker's rounding.
    return int(math.copysign(math.floor(abs(v) + 0.5), v))


def rescale(raw, space: ParamSpace) -> DecodedParams:
    """Map a raw vector in (-1, 1)^P onto a concrete assignment.

    Per slot: ``v = raw * (max - min)/2 + (max + min)/2``.  Integer slots
    round half away from zero and clamp to [min, max].  Categorical and
    boolean slots with K choices bin v into K equal-width buckets over
    [min, max] (when min = 0 and max = K this is exactly
    ``min(floor(v), K - 1)``); the upper boundary folds into the last bin.

    Deterministic and pure.  Raises ``StructureError`` on length mismatch,
    ``DomainError`` if any component is outside the open interval.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (space.dim,):
        raise StructureError(f"raw vector has shape {raw.shape}, expected ({space.dim},)")
    decoded = []
    for slot, r in zip(space.slots, raw.tolist()):
        if not (-1.0 < r < 1.0):
            raise DomainError(f"slot {slot.name!r}: raw component {r} outside (-1, 1)")
        v = r * (slot.pm_max - slot.pm_min) / 2.0 + (slot.pm_max + slot.pm_min) / 2.0
        if slot.kind == INTEGER:
            d = _round_half_away(v)
            d = min(max(d, int(slot.pm_min)), int(slot.pm_max))
        else:
            k = len(slot.choices)
            t = (v - slot.pm_min) / (slot.pm_max - slot.pm_min)
            d = min(max(int(math.floor(t * k)), 0), k - 1)
        decoded.append(d)
    return tuple(decoded)


def uniform_sample(space: ParamSpace, rng: np.random.Generator) -> DecodedParams:
    """Draw one assignment uniformly: every slot uniform over its decoded values."""
    out = []
    for slot in space.slots:
        if slot.kind == INTEGER:
            out.append(int(rng.integers(int(slot.pm_min), int(slot.pm_max) + 1)))
        else:
            out.append(int(rng.integers(0, len(slot.choices))))
    return tuple(out)


def describe(space: ParamSpace, decoded) -> dict[str, int | str]:
    """Human-readable view of an assignment: choice indices become labels."""
    decoded = space.validate_decoded(decoded)
    out: dict[str, int | str] = {}
    for slot, v in zip(space.slots, decoded):
        out[slot.name] = v if slot.kind == INTEGER else slot.choices[v]
    return out


# ---------------------------------------------------------------------------
# Built-in layouts
# ---------------------------------------------------------------------------

ACTIVATION_CHOICES = ("sigmoid", "relu", "linear", "tanh")


def _activation_slot(name: str, pm_min: float, pm_max: float) -> ParamSlot:
    return ParamSlot(name, CATEGORICAL, pm_min, pm_max, ACTIVATION_CHOICES)


def builtin_spaces() -> dict[str, ParamSpace]:
    """The three reference layouts shipped with the engine.

    ``modelnet``: two fully-connected neuron counts in 1..4000, six 4-way
    activation choices binned over [0, 4], one dropout flag over [0, 1].
    ``uci_har``: four neuron counts (two in 10..4000, two in 10..2000),
    four 4-way activation choices binned over [0, 1], one dropout flag.
    ``chars74k``: two neuron counts in 10..4000, four 4-way activation
    choices over [0, 4], one dropout flag.

    Choice cardinality always comes from the slot declaration, never from
    the [min, max] span, so the uci_har activation slots still expose all
    four functions.
    """
    modelnet = ParamSpace((
        ParamSlot("fc1_neurons", INTEGER, 1, 4000),
        ParamSlot("fc2_neurons", INTEGER, 1, 4000),
        _activation_slot("act1", 0, 4),
        _activation_slot("act2", 0, 4),
        _activation_slot("act3", 0, 4),
        _activation_slot("act4", 0, 4),
        _activation_slot("act5", 0, 4),
        _activation_slot("act6", 0, 4),
        ParamSlot("dropout", BOOLEAN, 0, 1),
    ))
    uci_har = ParamSpace((
        ParamSlot("fc1_neurons", INTEGER, 10, 4000),
        ParamSlot("fc2_neurons", INTEGER, 10, 4000),
        ParamSlot("lstm1_units", INTEGER, 10, 2000),
        ParamSlot("lstm2_units", INTEGER, 10, 2000),
        _activation_slot("act1", 0, 1),
        _activation_slot("act2", 0, 1),
        _activation_slot("act3", 0, 1),
        _activation_slot("act4", 0, 1),
        ParamSlot("dropout", BOOLEAN, 0, 1),
    ))
    chars74k = ParamSpace((
        ParamSlot("fc1_neurons", INTEGER, 10, 4000),
        ParamSlot("fc2_neurons", INTEGER, 10, 4000),
        _activation_slot("act1", 0, 4),
        _activation_slot("act2", 0, 4),
        _activation_slot("act3", 0, 4),
        _activation_slot("act4", 0, 4),
        ParamSlot("dropout", BOOLEAN, 0, 1),
    ))
    return {"modelnet": modelnet, "uci_har": uci_har, "chars74k": chars74k}


# ---------------------------------------------------------------------------
# Config documents
# ---------------------------------------------------------------------------

def space_from_mapping(doc) -> ParamSpace:
    """Build a space from a parsed config mapping (``{"slots": [...]}``)."""
    if not isinstance(doc, dict) or "slots" not in doc:
        raise ParseError("space document must be a mapping with a 'slots' list")
    raw_slots = doc["slots"]
    if not isinstance(raw_slots, list) or not raw_slots:
        raise ParseError("'slots' must be a non-empty list")
    slots = []
    for i, entry in enumerate(raw_slots):
        label = entry.get("name", f"#{i}") if isinstance(entry, dict) else f"#{i}"
        if not isinstance(entry, dict):
            raise ParseError(f"slot {label}: expected a mapping")
        unknown = set(entry) - {"name", "kind", "min", "max", "choices"}
        if unknown:
            raise ParseError(f"slot {label}: unknown keys {sorted(unknown)}")
        for key in ("name", "kind", "min", "max"):
            if key not in entry:
                raise ParseError(f"slot {label}: missing key {key!r}")
        try:
            slots.append(ParamSlot(
                name=str(entry["name"]),
                kind=str(entry["kind"]),
                pm_min=float(entry["min"]),
                pm_max=float(entry["max"]),
                choices=tuple(entry.get("choices", ())),
            ))
        except StructureError as exc:
            raise ParseError(str(exc)) from exc
    try:
        return ParamSpace(tuple(slots))
    except StructureError as exc:
        raise ParseError(str(exc)) from exc


def space_to_mapping(space: ParamSpace) -> dict:
    """Inverse of ``space_from_mapping``; used when writing manifests."""
    slots = []
    for s in space.slots:
        entry: dict = {"name": s.name, "kind": s.kind, "min": s.pm_min, "max": s.pm_max}
        if s.kind == CATEGORICAL:
            entry["choices"] = list(s.choices)
        slots.append(entry)
    return {"slots": slots}


def parse_space(config_text: str) -> ParamSpace:
    """Parse a YAML space document.  See ``space_from_mapping`` for the schema."""
    try:
        doc = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML: {exc}") from exc
    return space_from_mapping(doc)
