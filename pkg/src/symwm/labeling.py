"""Labelers map (state, ground atoms, context) to truth labels; abstract()
turns truth labels into an abstract state."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set

from .structs import (KIND_FEATURE, KIND_PROVIDED, KIND_VISUAL, AbstractState,
                      Action, GroundAtom, ObjectRef, Predicate, State,
                      all_groundings)


class Label(Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"


class UnsupportedPredicateKind(ValueError):
    """The labeler cannot evaluate this predicate."""


class LabelerUnavailable(RuntimeError):
    """Transient labeler failure (VLM gateway); retryable."""


@dataclass(frozen=True)
class LabelContext:
    """Previous-timestep context for t>0 labeling prompts.

    All three pieces are present together or absent together; a partial
    context is rejected rather than silently degraded.
    """
    previous_state: Optional[State] = None
    previous_labels: Optional[Dict[GroundAtom, Label]] = None
    previous_action: Optional[Action] = None

    def __post_init__(self) -> None:
        present = [self.previous_state is not None,
                   self.previous_labels is not None,
                   self.previous_action is not None]
        if any(present) and not all(present):
            raise ValueError("LabelContext must be all-or-nothing")

    @property
    def empty(self) -> bool:
        return self.previous_state is None


class Labeler:
    """Base labeler: evaluates ground atoms against a low-level state."""

    identity = "labeler"
    kinds: FrozenSet[str] = frozenset({KIND_VISUAL, KIND_PROVIDED})

    def label_batch(self, state: State, atoms: Sequence[GroundAtom],
                    ctx: LabelContext) -> Dict[GroundAtom, Label]:
        raise NotImplementedError

    def _check_kinds(self, atoms: Sequence[GroundAtom]) -> None:
        for atom in atoms:
            if atom.predicate.kind not in self.kinds:
                raise UnsupportedPredicateKind(
                    f"{self.identity} cannot evaluate {atom.predicate.kind} "
                    f"predicate {atom.predicate.name}")


def evaluate_feature_atom(atom: GroundAtom, state: State) -> bool:
    cond = atom.predicate.condition
    assert cond is not None, f"{atom} is not a feature predicate"
    return cond.holds(state, atom.objects[0])


def abstract(state: State, predicates: Iterable[Predicate],
             objects: Sequence[ObjectRef], labeler: Optional[Labeler],
             ctx: LabelContext = LabelContext()) -> AbstractState:
    """ABSTRACT: the set of ground atoms labeled true in the state.

    Feature predicates are evaluated directly from the object-centric state;
    visual and provided predicates are routed through the labeler. Unknown
    coerces to false here, preserving the raw ternary output upstream.
    """
    true_atoms: Set[GroundAtom] = set()
    to_label: List[GroundAtom] = []
    for pred in sorted(predicates):
        for atom in all_groundings(pred, objects):
            if pred.kind == KIND_FEATURE:
                if evaluate_feature_atom(atom, state):
                    true_atoms.add(atom)
            else:
                to_label.append(atom)
    if to_label:
        assert labeler is not None, "non-feature predicates need a labeler"
        labels = labeler.label_batch(state, to_label, ctx)
        for atom in to_label:
            if labels[atom] is Label.TRUE:
                true_atoms.add(atom)
    return frozenset(true_atoms)


def atom_digest(atom: GroundAtom) -> str:
    payload = f"{atom.predicate.name}|{str(atom)}"
    return hashlib.sha256(payload.encode()).hexdigest()


class NoisyLabeler(Labeler):
    """Wraps a labeler and independently flips labels true<->false.

    Flips are scoped to the given predicate kinds (default: visual only,
    modeling VLM labeling noise) and never touch protected predicates
    (default: the goal predicates). Randomness is a counter-based hash of
    (seed, state digest, atom digest) so results are reproducible for any
    call interleaving.
    """

    def __init__(self, base: Labeler, flip_rate: float, seed: int,
                 protected: Iterable[Predicate] = (),
                 noisy_kinds: Iterable[str] = (KIND_VISUAL,)) -> None:
        assert 0.0 <= flip_rate <= 1.0
        self._base = base
        self._flip_rate = flip_rate
        self._seed = seed
        self._protected = frozenset(protected)
        self._noisy_kinds = frozenset(noisy_kinds)
        self.identity = (f"noisy({base.identity},eps={flip_rate},"
                         f"seed={seed})")
        self.kinds = base.kinds

    def _flip(self, state_digest: str, atom: GroundAtom) -> bool:
        payload = f"{self._seed}|{state_digest}|{atom_digest(atom)}"
        h = hashlib.sha256(payload.encode()).digest()
        u = int.from_bytes(h[:8], "big") / float(1 << 64)
        return u < self._flip_rate

    def label_batch(self, state: State, atoms: Sequence[GroundAtom],
                    ctx: LabelContext) -> Dict[GroundAtom, Label]:
        labels = self._base.label_batch(state, atoms, ctx)
        digest = state.digest()
        out: Dict[GroundAtom, Label] = {}
        for atom, label in labels.items():
            if (atom.predicate in self._protected
                    or atom.predicate.kind not in self._noisy_kinds
                    or label is Label.UNKNOWN
                    or not self._flip(digest, atom)):
                out[atom] = label
            else:
                out[atom] = Label.FALSE if label is Label.TRUE else Label.TRUE
        return out


def make_noisy(labeler: Labeler, flip_rate: float, seed: int,
               protected: Iterable[Predicate] = (),
               noisy_kinds: Iterable[str] = (KIND_VISUAL,)) -> NoisyLabeler:
    return NoisyLabeler(labeler, flip_rate, seed, protected, noisy_kinds)


class CachingLabeler(Labeler):
    """Disk cache in front of a labeler: one JSON record per (labeler
    identity, request digest). Concurrent readers are fine; writes go
    through a temp file + rename so each key is written atomically."""

    def __init__(self, base: Labeler, cache_dir: str) -> None:
        self._base = base
        self._dir = cache_dir
        self._lock = threading.Lock()
        os.makedirs(cache_dir, exist_ok=True)
        self.identity = f"cached({base.identity})"
        self.kinds = base.kinds

    def _key(self, state: State, atoms: Sequence[GroundAtom],
             ctx: LabelContext) -> str:
        parts = [self._base.identity, state.digest()]
        parts.extend(sorted(str(a) for a in atoms))
        if not ctx.empty:
            assert ctx.previous_state is not None
            assert ctx.previous_labels is not None
            parts.append(ctx.previous_state.digest())
            parts.append(str(ctx.previous_action))
            parts.extend(sorted(f"{a}={l.value}"
                                for a, l in ctx.previous_labels.items()))
        return hashlib.sha256("|".join(parts).encode()).hexdigest()

    def _path(self, key: str) -> str:
        return os.path.join(self._dir, f"{key}.json")

    def label_batch(self, state: State, atoms: Sequence[GroundAtom],
                    ctx: LabelContext) -> Dict[GroundAtom, Label]:
        key = self._key(state, atoms, ctx)
        path = self._path(key)
        by_str = {str(a): a for a in atoms}
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as f:
                record = json.load(f)
            return {by_str[s]: Label(v) for s, v in record["labels"].items()}
        labels = self._base.label_batch(state, atoms, ctx)
        record = {"labeler": self._base.identity,
                  "labels": {str(a): l.value for a, l in labels.items()}}
        with self._lock:
            fd, tmp = tempfile.mkstemp(dir=self._dir, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as f:
                    json.dump(record, f, sort_keys=True)
                os.replace(tmp, path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
        return labels
