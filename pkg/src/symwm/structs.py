"""Core data structures: types, objects, predicates, atoms, states, skills,
actions, operators, demonstrations, and tasks."""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

# An abstract state is just a frozenset of ground atoms; equality and
# hashing are structural, and rendering is handled by abstract_state_str.
AbstractState = FrozenSet["GroundAtom"]


class ArityMismatch(ValueError):
    """Raised when an atom is built with the wrong number of arguments."""


class TypeMismatch(TypeError):
    """Raised when an atom argument does not match the declared type."""


@dataclass(frozen=True)
class ObjectType:
    """A named object type with optional single inheritance and a fixed
    feature schema shared by all objects of the type."""
    name: str
    feature_names: Tuple[str, ...] = ()
    parent: Optional["ObjectType"] = None

    def is_a(self, other: "ObjectType") -> bool:
        """True iff self equals other or descends from it."""
        t: Optional[ObjectType] = self
        while t is not None:
            if t.name == other.name:
                return True
            t = t.parent
        return False

    def feature_index(self, feature: str) -> int:
        return self.feature_names.index(feature)

    def __lt__(self, other: "ObjectType") -> bool:
        return self.name < other.name

    def __repr__(self) -> str:
        return f"ObjectType({self.name})"


@dataclass(frozen=True, order=True)
class ObjectRef:
    """A concrete object in a task: name, type, and a natural-language
    descriptor used when prompting a VLM."""
    name: str
    type: ObjectType = field(compare=False)
    descriptor: str = field(default="", compare=False)

    def __repr__(self) -> str:
        return f"{self.name}:{self.type.name}"


@dataclass(frozen=True, order=True)
class Variable:
    """A typed variable, e.g. ?x0:patty."""
    name: str
    type: ObjectType = field(compare=False)

    def __repr__(self) -> str:
        return f"{self.name}:{self.type.name}"


# A feature classifier takes (state, objects) and returns a bool.
Classifier = Callable[["State", Sequence[ObjectRef]], bool]

KIND_VISUAL = "visual"
KIND_FEATURE = "feature"
KIND_PROVIDED = "provided"


@dataclass(frozen=True)
class FeatureCondition:
    """A single-feature threshold test over argument 0, optionally negated.

    Renders in the grammar's canonical form, e.g.
    NOT-[[0:surface].z<=[idx_0]1.59].
    """
    type_name: str
    feature: str
    threshold: float
    threshold_idx: int
    negated: bool = False

    def __str__(self) -> str:
        base = (f"[[0:{self.type_name}].{self.feature}"
                f"<=[idx_{self.threshold_idx}]{format_number(self.threshold)}]")
        return f"NOT-{base}" if self.negated else base

    def holds(self, state: "State", obj: ObjectRef) -> bool:
        value = state.get(obj, self.feature)
        result = value <= self.threshold
        return not result if self.negated else result


def format_number(x: float) -> str:
    """Render a threshold the way the listings do (no trailing zeros)."""
    s = f"{x:.10g}"
    return s


@dataclass(frozen=True)
class Predicate:
    """A named, typed relational symbol.

    kind is one of visual (evaluated by a labeler), feature (evaluated from
    the object-centric state via `condition`), or provided (evaluated by a
    domain-registered classifier routed through the labeler).
    """
    name: str
    arg_types: Tuple[ObjectType, ...]
    kind: str = KIND_VISUAL
    condition: Optional[FeatureCondition] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        assert self.kind in (KIND_VISUAL, KIND_FEATURE, KIND_PROVIDED)
        if self.kind == KIND_FEATURE:
            assert self.condition is not None and len(self.arg_types) == 1

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    @cached_property
    def signature(self) -> Tuple[str, Tuple[str, ...]]:
        return (self.name, tuple(t.name for t in self.arg_types))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Predicate):
            return NotImplemented
        return self.signature == other.signature

    def __hash__(self) -> int:
        return hash(self.signature)

    def __lt__(self, other: "Predicate") -> bool:
        return self.signature < other.signature

    def __call__(self, args: Sequence[ObjectRef]) -> "GroundAtom":
        return ground(self, args)

    def lifted(self, variables: Sequence[Variable]) -> "LiftedAtom":
        return LiftedAtom(self, tuple(variables))

    def __repr__(self) -> str:
        args = ", ".join(f"?{chr(ord('a') + i)}:{t.name}"
                         for i, t in enumerate(self.arg_types))
        return f"{self.name}({args})"


def ground(predicate: Predicate, args: Sequence[ObjectRef]) -> "GroundAtom":
    """Ground a predicate with concrete objects, checking arity and types."""
    if len(args) != predicate.arity:
        raise ArityMismatch(
            f"{predicate.name} expects {predicate.arity} args, "
            f"got {len(args)}")
    for arg, expected in zip(args, predicate.arg_types):
        if not arg.type.is_a(expected):
            raise TypeMismatch(
                f"{predicate.name}: {arg.name}:{arg.type.name} is not a "
                f"{expected.name}")
    return GroundAtom(predicate, tuple(args))


@dataclass(frozen=True)
class GroundAtom:
    """A predicate applied to concrete objects."""
    predicate: Predicate
    objects: Tuple[ObjectRef, ...]

    def __str__(self) -> str:
        return f"{self.predicate.name}({', '.join(o.name for o in self.objects)})"

    __repr__ = __str__

    def __lt__(self, other: "GroundAtom") -> bool:
        return (str(self), self.predicate.signature) < (str(other),
                                                        other.predicate.signature)

    def lift(self, sub: Dict[ObjectRef, Variable]) -> "LiftedAtom":
        return LiftedAtom(self.predicate,
                          tuple(sub[o] for o in self.objects))


@dataclass(frozen=True)
class LiftedAtom:
    """A predicate applied to typed variables."""
    predicate: Predicate
    variables: Tuple[Variable, ...]

    def __str__(self) -> str:
        return (f"{self.predicate.name}"
                f"({', '.join(repr(v) for v in self.variables)})")

    __repr__ = __str__

    def __lt__(self, other: "LiftedAtom") -> bool:
        return str(self) < str(other)

    def ground(self, sub: Dict[Variable, ObjectRef]) -> GroundAtom:
        return GroundAtom(self.predicate,
                          tuple(sub[v] for v in self.variables))


@dataclass(frozen=True, eq=False)
class State:
    """A low-level state: image references plus the object-centric state
    (one feature vector per object), at a given timestep."""
    data: Dict[ObjectRef, np.ndarray]
    images: Tuple[str, ...] = ()
    timestep: int = 0

    def get(self, obj: ObjectRef, feature: str) -> float:
        return float(self.data[obj][obj.type.feature_index(feature)])

    @property
    def objects(self) -> List[ObjectRef]:
        return sorted(self.data)

    def digest(self) -> str:
        h = hashlib.sha256()
        for obj in self.objects:
            h.update(obj.name.encode())
            h.update(np.asarray(self.data[obj], dtype=float).tobytes())
        for img in self.images:
            h.update(img.encode())
        return h.hexdigest()

    def allclose(self, other: "State") -> bool:
        if set(self.data) != set(other.data) or self.images != other.images:
            return False
        return all(np.allclose(self.data[o], other.data[o])
                   for o in self.data)

    def copy(self) -> "State":
        return State({o: v.copy() for o, v in self.data.items()},
                     self.images, self.timestep)


@dataclass(frozen=True)
class Skill:
    """A low-level controller: discrete typed parameters plus an optional
    continuous parameter vector of fixed dimension."""
    name: str
    param_types: Tuple[ObjectType, ...]
    continuous_dim: int = 0

    def __lt__(self, other: "Skill") -> bool:
        return self.name < other.name

    def __repr__(self) -> str:
        return f"Skill({self.name}/{len(self.param_types)})"


@dataclass(frozen=True)
class Action:
    """A skill with discrete and continuous arguments fully specified."""
    skill: Skill
    objects: Tuple[ObjectRef, ...]
    theta: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        assert len(self.objects) == len(self.skill.param_types)
        assert len(self.theta) == self.skill.continuous_dim

    def __str__(self) -> str:
        inside = ", ".join(f"{o.name}:{o.type.name}" for o in self.objects)
        return f"{self.skill.name}[{inside}]"

    __repr__ = __str__


def _atoms_str(atoms: Sequence[LiftedAtom]) -> str:
    return "[" + ", ".join(str(a) for a in sorted(atoms, key=str)) + "]"


@dataclass(frozen=True)
class Operator:
    """A lifted STRIPS operator linked to a skill.

    ignore_effects is carried for fixture fidelity only and is always empty
    for learned operators.
    """
    name: str
    parameters: Tuple[Variable, ...]
    preconditions: FrozenSet[LiftedAtom]
    add_effects: FrozenSet[LiftedAtom]
    delete_effects: FrozenSet[LiftedAtom]
    skill: Skill
    skill_params: Tuple[Variable, ...]
    ignore_effects: FrozenSet[LiftedAtom] = frozenset()
    support_count: int = 0

    def __post_init__(self) -> None:
        params = set(self.parameters)
        assert set(self.skill_params) <= params
        assert not (self.add_effects & self.delete_effects)
        for atom in self.preconditions | self.add_effects | self.delete_effects:
            assert set(atom.variables) <= params

    def ground(self, sub: Dict[Variable, ObjectRef]) -> "GroundOperator":
        objs = tuple(sub[v] for v in self.parameters)
        return GroundOperator(
            parent=self,
            objects=objs,
            preconditions=frozenset(a.ground(sub) for a in self.preconditions),
            add_effects=frozenset(a.ground(sub) for a in self.add_effects),
            delete_effects=frozenset(
                a.ground(sub) for a in self.delete_effects),
            skill_objects=tuple(sub[v] for v in self.skill_params),
        )

    def listing_str(self) -> str:
        """Render in the learned-model listing format."""
        params = ", ".join(repr(v) for v in self.parameters)
        skill_args = ", ".join(repr(v) for v in self.skill_params)
        return (f"{self.name}:\n"
                f"  Parameters: [{params}]\n"
                f"  Preconditions: {_atoms_str(sorted(self.preconditions, key=str))}\n"
                f"  Add Effects: {_atoms_str(sorted(self.add_effects, key=str))}\n"
                f"  Delete Effects: {_atoms_str(sorted(self.delete_effects, key=str))}\n"
                f"  Ignore Effects: {_atoms_str(sorted(self.ignore_effects, key=str))}\n"
                f"  Skill: {self.skill.name}({skill_args})")

    @property
    def complexity(self) -> int:
        return (len(self.preconditions) + len(self.add_effects) +
                len(self.delete_effects))

    def __lt__(self, other: "Operator") -> bool:
        return self.name < other.name

    def __repr__(self) -> str:
        return f"Operator({self.name})"


@dataclass(frozen=True)
class GroundOperator:
    """An operator with all parameters bound to objects."""
    parent: Operator
    objects: Tuple[ObjectRef, ...]
    preconditions: FrozenSet[GroundAtom]
    add_effects: FrozenSet[GroundAtom]
    delete_effects: FrozenSet[GroundAtom]
    skill_objects: Tuple[ObjectRef, ...]

    def applicable(self, atoms: AbstractState) -> bool:
        return self.preconditions <= atoms

    def __str__(self) -> str:
        return f"{self.parent.name}({', '.join(o.name for o in self.objects)})"

    __repr__ = __str__


def apply(op: GroundOperator, atoms: AbstractState) -> AbstractState:
    """Successor abstract state under a ground operator (pure set algebra;
    applicability must be checked by the caller)."""
    return (atoms - op.delete_effects) | op.add_effects


def goal_holds(atoms: AbstractState, goal: FrozenSet[GroundAtom]) -> bool:
    """True iff every goal atom is in the abstract state."""
    return goal <= atoms


def abstract_state_str(atoms: AbstractState) -> str:
    return "{" + ", ".join(str(a) for a in sorted(atoms)) + "}"


@dataclass(frozen=True)
class Demonstration:
    """A skill-segmented trajectory with a conjunctive goal that holds in the
    final state."""
    objects: Tuple[ObjectRef, ...]
    states: Tuple[State, ...]
    actions: Tuple[Action, ...]
    goal: FrozenSet[GroundAtom]
    name: str = ""

    def __post_init__(self) -> None:
        assert len(self.states) == len(self.actions) + 1

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class Task:
    """A planning problem: objects, an initial low-level state, and a goal."""
    objects: Tuple[ObjectRef, ...]
    init: State
    goal: FrozenSet[GroundAtom]
    name: str = ""


def all_groundings(predicate: Predicate,
                   objects: Sequence[ObjectRef]) -> List[GroundAtom]:
    """All type-consistent ground atoms of a predicate over the objects."""
    pools = []
    for expected in predicate.arg_types:
        pool = [o for o in sorted(objects) if o.type.is_a(expected)]
        pools.append(pool)
    return [GroundAtom(predicate, combo)
            for combo in itertools.product(*pools)]


def parse_atom_str(text: str) -> Tuple[str, List[str]]:
    """Split 'name(arg1, arg2)' into (name, [args]); raises ValueError on
    malformed input. Names are case-preserved here; callers normalize."""
    text = text.strip()
    if not text.endswith(")") or "(" not in text:
        raise ValueError(f"malformed atom: {text!r}")
    # Split on the FIRST '(' that balances with the final ')': grammar
    # predicate names contain brackets but not parentheses.
    name, _, rest = text.partition("(")
    args_str = rest[:-1]
    name = name.strip()
    if not name:
        raise ValueError(f"malformed atom: {text!r}")
    if args_str.strip() == "":
        args = []
    else:
        args = [a.strip() for a in args_str.split(",")]
        if any(not a for a in args):
            raise ValueError(f"malformed atom: {text!r}")
    return name, args
