"""Candidate predicate pool construction: parse proposed ground atoms, lift
them into visual predicates, and generate the feature-threshold grammar."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Set, Tuple

from .structs import (KIND_FEATURE, KIND_VISUAL, Demonstration,
                      FeatureCondition, GroundAtom, ObjectRef, ObjectType,
                      Predicate, format_number)

REJECT_UNKNOWN_OBJECT = "unknown_object"
REJECT_MALFORMED = "malformed"
REJECT_ARITY_CONFLICT = "arity_conflict"

# A would-be atom starts with a word-like name followed by '('; grammar-style
# bracket names never appear in VLM output.
_ATOM_START = re.compile(r"\b([A-Za-z_][A-Za-z0-9_]*)\(")


@dataclass
class ProposalResult:
    """Atoms recovered from a proposal response, plus rejects with reasons."""
    accepted: List[GroundAtom] = field(default_factory=list)
    rejected: List[Tuple[str, str]] = field(default_factory=list)


def parse_proposals(text: str, objects: Sequence[ObjectRef]) -> ProposalResult:
    """Scan the entire response for atom tokens; classify each as accepted
    or rejected. Names are case-normalized (lowercased). Atoms naming
    objects outside the demonstration are rejected, as are malformed tokens
    and re-uses of a name at a different arity."""
    by_name = {o.name: o for o in objects}
    result = ProposalResult()
    arity_seen: Dict[str, int] = {}
    seen: Set[GroundAtom] = set()
    for match in _ATOM_START.finditer(text):
        name = match.group(1).lower()
        # The argument list runs to the first ')'; hitting a newline or a
        # second '(' first means the token is malformed.
        rest = text[match.end():]
        close = rest.find(")")
        cut = min((i for i in (rest.find("\n"), rest.find("("))
                   if i != -1), default=len(rest))
        if close == -1 or close > cut:
            result.rejected.append((match.group(0), REJECT_MALFORMED))
            continue
        raw = text[match.start():match.end() + close + 1]
        args_str = rest[:close]
        args = ([a.strip() for a in args_str.split(",")]
                if args_str.strip() else [])
        if not args or any(not a or " " in a for a in args):
            result.rejected.append((raw, REJECT_MALFORMED))
            continue
        if any(a not in by_name for a in args):
            result.rejected.append((raw, REJECT_UNKNOWN_OBJECT))
            continue
        if name in arity_seen and arity_seen[name] != len(args):
            result.rejected.append((raw, REJECT_ARITY_CONFLICT))
            continue
        arity_seen.setdefault(name, len(args))
        refs = tuple(by_name[a] for a in args)
        placeholder = Predicate(name, tuple(r.type for r in refs),
                                kind=KIND_VISUAL)
        atom = GroundAtom(placeholder, refs)
        if atom not in seen:
            seen.add(atom)
            result.accepted.append(atom)
    return result


def lift_and_dedup(atoms: Sequence[GroundAtom]) -> List[Predicate]:
    """Lift accepted atoms into visual predicates, one per unique
    (name, type signature). A name proposed with several distinct type
    signatures is disambiguated with numeric suffixes in first-seen order
    (clear0, clear1, ...)."""
    order: List[Tuple[str, Tuple[str, ...]]] = []
    sigs_by_name: Dict[str, List[Tuple[str, ...]]] = defaultdict(list)
    for atom in atoms:
        name = atom.predicate.name
        sig = tuple(o.type.name for o in atom.objects)
        if sig not in sigs_by_name[name]:
            sigs_by_name[name].append(sig)
            order.append((name, sig))
    types_by_sig: Dict[Tuple[str, Tuple[str, ...]], Tuple[ObjectType, ...]] = {}
    for atom in atoms:
        key = (atom.predicate.name, tuple(o.type.name for o in atom.objects))
        types_by_sig.setdefault(key, tuple(o.type for o in atom.objects))
    predicates = []
    for name, sig in order:
        if len(sigs_by_name[name]) > 1:
            final_name = f"{name}{sigs_by_name[name].index(sig)}"
        else:
            final_name = name
        predicates.append(Predicate(final_name, types_by_sig[(name, sig)],
                                    kind=KIND_VISUAL))
    return predicates


def lifted_name_map(atoms: Sequence[GroundAtom],
                    predicates: Sequence[Predicate]) -> Dict[GroundAtom, Predicate]:
    """Map each accepted atom to its (possibly suffixed) lifted predicate."""
    order: Dict[str, List[Tuple[str, ...]]] = defaultdict(list)
    for atom in atoms:
        name = atom.predicate.name
        sig = tuple(o.type.name for o in atom.objects)
        if sig not in order[name]:
            order[name].append(sig)
    by_signature = {p.signature: p for p in predicates}
    mapping = {}
    for atom in atoms:
        name = atom.predicate.name
        sig = tuple(o.type.name for o in atom.objects)
        if len(order[name]) > 1:
            final = f"{name}{order[name].index(sig)}"
        else:
            final = name
        mapping[atom] = by_signature[(final, sig)]
    return mapping


@dataclass(frozen=True)
class FeatureGrammarConfig:
    """Controls the single-feature threshold grammar."""
    include_negations: bool = True
    max_thresholds_per_feature: int = 4

    def __post_init__(self) -> None:
        assert self.max_thresholds_per_feature >= 1


def generate_feature_grammar(demos: Sequence[Demonstration],
                             cfg: FeatureGrammarConfig = FeatureGrammarConfig()
                             ) -> List[Predicate]:
    """Unary threshold predicates [[0:T].f<=[idx_k]theta] for each (type,
    feature) with at least two distinct observed values across all demo
    states; thresholds are midpoints between consecutive sorted values,
    capped per feature keeping those nearest the median split."""
    values: Dict[Tuple[ObjectType, str], Set[float]] = defaultdict(set)
    for demo in demos:
        for state in demo.states:
            for obj in state.data:
                for feature in obj.type.feature_names:
                    values[(obj.type, feature)].add(state.get(obj, feature))
    predicates: List[Predicate] = []
    for (obj_type, feature) in sorted(values, key=lambda k: (k[0].name, k[1])):
        observed = sorted(values[(obj_type, feature)])
        if len(observed) < 2:
            continue
        midpoints = [(a + b) / 2.0 for a, b in zip(observed, observed[1:])]
        if len(midpoints) > cfg.max_thresholds_per_feature:
            median = (observed[0] + observed[-1]) / 2.0
            midpoints = sorted(midpoints,
                               key=lambda m: (abs(m - median), m))
            midpoints = sorted(midpoints[:cfg.max_thresholds_per_feature])
        for idx, theta in enumerate(midpoints):
            for negated in ((False, True) if cfg.include_negations
                            else (False,)):
                cond = FeatureCondition(obj_type.name, feature, theta, idx,
                                        negated)
                predicates.append(Predicate(str(cond), (obj_type,),
                                            kind=KIND_FEATURE,
                                            condition=cond))
    return predicates


@dataclass
class PredicatePool:
    """The candidate pool plus the never-removable subsets."""
    candidates: List[Predicate]
    init_predicates: List[Predicate]
    goal_predicates: List[Predicate]

    def __len__(self) -> int:
        return len(self.candidates)


def assemble_pool(init: Sequence[Predicate], visual: Sequence[Predicate],
                  feature: Sequence[Predicate],
                  goal: Sequence[Predicate]) -> PredicatePool:
    """Union with collision resolution: a proposed predicate whose (name,
    signature) matches an init predicate is dropped (init wins). Goal
    predicates are flagged never-removable downstream."""
    init_list = list(dict.fromkeys(init))
    init_sigs = {p.signature for p in init_list}
    init_names_ci = {(p.name.lower(),) + (p.signature[1],) for p in init_list}
    candidates: List[Predicate] = list(init_list)
    seen = set(init_sigs)
    for pred in list(visual) + list(feature):
        if pred.signature in seen:
            continue
        if ((pred.name.lower(),) + (pred.signature[1],)) in init_names_ci:
            # Same name modulo case with an identical signature: init wins.
            continue
        seen.add(pred.signature)
        candidates.append(pred)
    for g in goal:
        assert g in init_list, "goal predicates must come from the init set"
    return PredicatePool(candidates, init_list, list(goal))
