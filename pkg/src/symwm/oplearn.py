"""Cluster-and-intersect operator learning with noise-aware modifications:
partition by effect/controller unification, induce arguments and effects,
soft-intersection preconditions, and low-data pruning."""

from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .labeling import LabelContext, Labeler, abstract
from .structs import (AbstractState, Action, Demonstration, GroundAtom,
                      LiftedAtom, ObjectRef, Operator, Predicate, Skill,
                      State, Variable)


@dataclass(frozen=True)
class Transition:
    """One abstracted demonstration step."""
    s_abs: AbstractState
    action: Action
    s_abs_next: AbstractState
    demo_idx: int
    step_idx: int
    state: State
    state_next: State

    @property
    def adds(self) -> FrozenSet[GroundAtom]:
        return self.s_abs_next - self.s_abs

    @property
    def deletes(self) -> FrozenSet[GroundAtom]:
        return self.s_abs - self.s_abs_next

    @property
    def relevant_objects(self) -> Tuple[ObjectRef, ...]:
        seen: Dict[ObjectRef, None] = {}
        for obj in self.action.objects:
            seen.setdefault(obj)
        for atom in sorted(self.adds) + sorted(self.deletes):
            for obj in atom.objects:
                seen.setdefault(obj)
        return tuple(seen)


@dataclass
class EquivalenceClass:
    """A maximal set of transitions whose controllers and effects unify."""
    skill: Skill
    parameters: Tuple[Variable, ...]
    add_effects: FrozenSet[LiftedAtom]
    delete_effects: FrozenSet[LiftedAtom]
    skill_params: Tuple[Variable, ...]
    members: List[Tuple[Transition, Dict[Variable, ObjectRef]]] = field(
        default_factory=list)

    @property
    def support(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class LearnConfig:
    h_pre_frac: float = 0.8
    h_data_frac: float = 0.05

    def __post_init__(self) -> None:
        assert 0.0 < self.h_pre_frac <= 1.0
        assert 0.0 <= self.h_data_frac < 1.0


class LabelStore:
    """Caches per-predicate ground-atom labels for every demo state, so that
    hill-climbing candidate evaluations never relabel a predicate."""

    def __init__(self, demos: Sequence[Demonstration],
                 labeler: Optional[Labeler]) -> None:
        self._demos = list(demos)
        self._labeler = labeler
        self._cache: Dict[Tuple[Tuple[str, Tuple[str, ...]], int, int],
                          FrozenSet[GroundAtom]] = {}

    @property
    def demos(self) -> List[Demonstration]:
        return self._demos

    def atoms(self, demo_idx: int, t: int,
              predicates: Iterable[Predicate]) -> AbstractState:
        out: set = set()
        demo = self._demos[demo_idx]
        for pred in sorted(predicates):
            key = (pred.signature, demo_idx, t)
            if key not in self._cache:
                self._cache[key] = abstract(demo.states[t], [pred],
                                            demo.objects, self._labeler,
                                            LabelContext())
            out |= self._cache[key]
        return frozenset(out)


def abstract_demos(demos: Sequence[Demonstration],
                   predicates: Iterable[Predicate],
                   labeler: Optional[Labeler],
                   store: Optional[LabelStore] = None) -> List[Transition]:
    """One Transition per consecutive (s, a, s') in every demo."""
    if store is None:
        store = LabelStore(demos, labeler)
    preds = list(predicates)
    transitions = []
    for d, demo in enumerate(demos):
        atom_seq = [store.atoms(d, t, preds)
                    for t in range(len(demo.states))]
        for t, action in enumerate(demo.actions):
            transitions.append(
                Transition(atom_seq[t], action, atom_seq[t + 1], d, t,
                           demo.states[t], demo.states[t + 1]))
    return transitions


def _find_bijection(t1: Transition, t2: Transition
                    ) -> Optional[Dict[ObjectRef, ObjectRef]]:
    """An object bijection under which t1's controller args map positionally
    to t2's and the add/delete sets coincide; None if there is none."""
    if t1.action.skill != t2.action.skill:
        return None
    if (len(t1.adds), len(t1.deletes)) != (len(t2.adds), len(t2.deletes)):
        return None
    base: Dict[ObjectRef, ObjectRef] = {}
    for o1, o2 in zip(t1.action.objects, t2.action.objects):
        if o1.type.name != o2.type.name:
            return None
        if base.get(o1, o2) != o2:
            return None
        base[o1] = o2
    if len(set(base.values())) != len(base):
        return None
    rest1 = [o for o in t1.relevant_objects if o not in base]
    rest2 = [o for o in t2.relevant_objects if o not in set(base.values())]
    if len(rest1) != len(rest2):
        return None

    def effects_match(mapping: Dict[ObjectRef, ObjectRef]) -> bool:
        for src, dst in ((t1.adds, t2.adds), (t1.deletes, t2.deletes)):
            mapped = {GroundAtom(a.predicate,
                                 tuple(mapping[o] for o in a.objects))
                      for a in src}
            if mapped != dst:
                return False
        return True

    # Exhaustive over type-consistent assignments of the leftover objects.
    for perm in itertools.permutations(rest2):
        if any(o1.type.name != o2.type.name for o1, o2 in zip(rest1, perm)):
            continue
        mapping = dict(base)
        mapping.update(dict(zip(rest1, perm)))
        if len(set(mapping.values())) != len(mapping):
            continue
        if effects_match(mapping):
            return mapping
    return None


def _skeleton_from(rep: Transition) -> Tuple[Tuple[Variable, ...],
                                             Dict[ObjectRef, Variable],
                                             FrozenSet[LiftedAtom],
                                             FrozenSet[LiftedAtom],
                                             Tuple[Variable, ...]]:
    """Lift the representative: one variable per object appearing in the
    controller or effects, named ?x0.. sorted by (type name, appearance)."""
    relevant = rep.relevant_objects
    ordered = sorted(relevant, key=lambda o: (o.type.name,
                                              relevant.index(o)))
    sub = {obj: Variable(f"?x{i}", obj.type)
           for i, obj in enumerate(ordered)}
    params = tuple(sub[o] for o in ordered)
    adds = frozenset(a.lift(sub) for a in rep.adds)
    dels = frozenset(a.lift(sub) for a in rep.deletes)
    skill_params = tuple(sub[o] for o in rep.action.objects)
    return params, sub, adds, dels, skill_params


def partition(transitions: Sequence[Transition]) -> List[EquivalenceClass]:
    """Group transitions by unification of controllers and effects.

    Classes are deterministic: members are visited in (demo, step) order and
    the representative is the first member."""
    ordered = sorted(transitions, key=lambda t: (t.demo_idx, t.step_idx))
    classes: List[EquivalenceClass] = []
    reps: List[Transition] = []
    # Cheap signature to avoid the bijection search for obvious mismatches.
    buckets: Dict[tuple, List[int]] = defaultdict(list)

    def signature(t: Transition) -> tuple:
        def shape(atoms: FrozenSet[GroundAtom]) -> tuple:
            return tuple(sorted(
                (a.predicate.name,) + tuple(o.type.name for o in a.objects)
                for a in atoms))
        return (t.action.skill.name, shape(t.adds), shape(t.deletes))

    for trans in ordered:
        sig = signature(trans)
        placed = False
        for idx in buckets[sig]:
            mapping = _find_bijection(reps[idx], trans)
            if mapping is not None:
                cls = classes[idx]
                # delta for this member: variable -> member object, through
                # the representative's object for that variable.
                obj_of_var = cls.members[0][1]
                delta = {v: mapping[obj_of_var[v]] for v in cls.parameters}
                cls.members.append((trans, delta))
                placed = True
                break
        if not placed:
            params, sub, adds, dels, skill_params = _skeleton_from(trans)
            cls = EquivalenceClass(trans.action.skill, params, adds, dels,
                                   skill_params)
            cls.members.append((trans, {v: o for o, v in sub.items()}))
            classes.append(cls)
            reps.append(trans)
            buckets[sig].append(len(classes) - 1)
    return classes


def learn_preconditions(cls: EquivalenceClass,
                        h_pre_frac: float) -> FrozenSet[LiftedAtom]:
    """Soft intersection: keep a lifted atom iff it holds in at least
    h_pre_frac of the member pre-states (boundary inclusive); atoms
    mentioning objects outside the member's binding are discarded."""
    counts: Counter = Counter()
    n = len(cls.members)
    assert n > 0
    for trans, delta in cls.members:
        inv = {o: v for v, o in delta.items()}
        for atom in trans.s_abs:
            if all(o in inv for o in atom.objects):
                counts[atom.lift(inv)] += 1
    return frozenset(atom for atom, c in counts.items()
                     if c / n >= h_pre_frac)


def build_operator(cls: EquivalenceClass, name: str,
                   h_pre_frac: float) -> Operator:
    return Operator(
        name=name,
        parameters=cls.parameters,
        preconditions=learn_preconditions(cls, h_pre_frac),
        add_effects=cls.add_effects,
        delete_effects=cls.delete_effects,
        skill=cls.skill,
        skill_params=cls.skill_params,
        support_count=cls.support,
    )


def prune_low_data(classes: Sequence[EquivalenceClass],
                   transitions: Sequence[Transition],
                   h_data_frac: float) -> List[EquivalenceClass]:
    """Drop classes whose support is below h_data_frac of their skill's
    total transitions."""
    totals: Counter = Counter(t.action.skill.name for t in transitions)
    kept = []
    for cls in classes:
        total = totals[cls.skill.name]
        if total and cls.support / total >= h_data_frac:
            kept.append(cls)
    return kept


@dataclass
class LearnedModel:
    """Operators plus the per-operator equivalence classes (kept for sampler
    training and objective bookkeeping)."""
    operators: List[Operator]
    classes: List[EquivalenceClass]


def _class_order_key(cls: EquivalenceClass) -> tuple:
    return (cls.skill.name,
            tuple(sorted(str(a) for a in cls.add_effects)),
            tuple(sorted(str(a) for a in cls.delete_effects)),
            -cls.support)


def learn_operators(demos: Sequence[Demonstration],
                    predicates: Iterable[Predicate],
                    labeler: Optional[Labeler],
                    cfg: LearnConfig = LearnConfig(),
                    store: Optional[LabelStore] = None) -> LearnedModel:
    """Full pipeline: abstract -> partition -> induce -> soft intersection
    -> prune. Deterministic given a deterministic labeler."""
    transitions = abstract_demos(demos, predicates, labeler, store)
    classes = partition(transitions)
    classes = prune_low_data(classes, transitions, cfg.h_data_frac)
    classes = sorted(classes, key=_class_order_key)
    operators = [build_operator(cls, f"STRIPS-Op{i}", cfg.h_pre_frac)
                 for i, cls in enumerate(classes)]
    return LearnedModel(operators, classes)
