"""Serialization: learned-model text listings (parse and byte-identical
re-emit), PDDL domain/problem emission and parsing, JSON model artifacts and
dataset files, and the operator isomorphism check."""

from __future__ import annotations

import hashlib
import itertools
import json
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import numpy as np

from .samplers import Sampler, sampler_from_json, sampler_to_json
from .structs import (KIND_FEATURE, KIND_PROVIDED, KIND_VISUAL, Action,
                      Demonstration, FeatureCondition, GroundAtom, LiftedAtom,
                      ObjectRef, ObjectType, Operator, Predicate, Skill,
                      State, Task, Variable, parse_atom_str)

SCHEMA_VERSION = 1


class PddlSyntaxError(ValueError):
    """Malformed PDDL, with a character offset where parsing failed."""

    def __init__(self, message: str, position: int = -1) -> None:
        super().__init__(f"{message} (at offset {position})")
        self.position = position


# ---------------------------------------------------------------------------
# Learned-model text listings
# ---------------------------------------------------------------------------

@dataclass
class ListingOp:
    """One operator block, with atoms kept as ordered verbatim tokens so
    emission reproduces the source byte-for-byte."""
    name: str
    parameters: List[str]
    preconditions: List[str]
    add_effects: List[str]
    delete_effects: List[str]
    ignore_effects: List[str]
    skill: str

    def emit(self) -> str:
        def row(label: str, tokens: List[str]) -> str:
            return f"  {label}: [" + ", ".join(tokens) + "]"

        return "\n".join([
            f"{self.name}:",
            row("Parameters", self.parameters),
            row("Preconditions", self.preconditions),
            row("Add Effects", self.add_effects),
            row("Delete Effects", self.delete_effects),
            row("Ignore Effects", self.ignore_effects),
            f"  Skill: {self.skill}",
        ])


@dataclass
class Listing:
    """A parsed learned-model listing; emit() reproduces the text verbatim
    and to_operators() builds the structured model."""
    predicates_header: str
    predicate_lines: List[str]
    operators_header: str
    ops: List[ListingOp]
    op_separator: str = "\n\n"

    def emit(self) -> str:
        return (self.predicates_header + "\n"
                + "\n".join(self.predicate_lines) + "\n\n"
                + self.operators_header + "\n"
                + self.op_separator.join(op.emit() for op in self.ops)
                + "\n")

    def to_operators(self) -> List[Operator]:
        types: Dict[str, ObjectType] = {}
        predicates: Dict[Tuple[str, Tuple[str, ...]], Predicate] = {}
        skills: Dict[str, Skill] = {}
        operators = []
        for op in self.ops:
            params = tuple(_parse_typed_var(tok, types)
                           for tok in op.parameters)
            pre = [_parse_lifted_atom(a, types, predicates)
                   for a in op.preconditions]
            add = [_parse_lifted_atom(a, types, predicates)
                   for a in op.add_effects]
            dele = [_parse_lifted_atom(a, types, predicates)
                    for a in op.delete_effects]
            ign = [_parse_lifted_atom(a, types, predicates)
                   for a in op.ignore_effects]
            skill_name, skill_args = parse_atom_str(op.skill)
            skill_vars = tuple(_parse_typed_var(tok, types)
                               for tok in skill_args)
            if skill_name not in skills:
                skills[skill_name] = Skill(
                    skill_name, tuple(v.type for v in skill_vars))
            operators.append(Operator(
                name=op.name, parameters=params,
                preconditions=frozenset(pre), add_effects=frozenset(add),
                delete_effects=frozenset(dele), skill=skills[skill_name],
                skill_params=skill_vars, ignore_effects=frozenset(ign)))
        return operators


def _parse_typed_var(token: str,
                     types: Dict[str, ObjectType]) -> Variable:
    name, _, type_name = token.strip().partition(":")
    if not name.startswith("?") or not type_name:
        raise ValueError(f"malformed variable {token!r}")
    types.setdefault(type_name, ObjectType(type_name))
    return Variable(name, types[type_name])


def _split_atom_list(text: str) -> List[str]:
    """Split '[A(...), B(...)]' at top-level commas (predicate names may
    contain brackets, so track parenthesis depth only)."""
    inner = text.strip()
    assert inner.startswith("[") and inner.endswith("]"), inner
    inner = inner[1:-1].strip()
    if not inner:
        return []
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(inner):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(inner[start:i].strip())
            start = i + 1
    parts.append(inner[start:].strip())
    return parts


def _parse_lifted_atom(text: str, types: Dict[str, ObjectType],
                       predicates: Dict[Tuple[str, Tuple[str, ...]],
                                        Predicate]) -> LiftedAtom:
    name, arg_tokens = parse_atom_str(text)
    variables = tuple(_parse_typed_var(tok, types) for tok in arg_tokens)
    sig = (name, tuple(v.type.name for v in variables))
    if sig not in predicates:
        predicates[sig] = Predicate(name, tuple(v.type for v in variables),
                                    kind=KIND_VISUAL)
    return LiftedAtom(predicates[sig], variables)


def parse_listing(text: str) -> Listing:
    """Parse a learned-model listing (tolerates both header casings and
    missing blank lines between operator blocks)."""
    lines = text.splitlines()
    i = 0
    assert lines[i].lower().startswith("learned predicates"), lines[i]
    pred_header = lines[i]
    i += 1
    pred_lines: List[str] = []
    while i < len(lines) and lines[i].strip() != "":
        pred_lines.append(lines[i])
        i += 1
    while i < len(lines) and lines[i].strip() == "":
        i += 1
    assert lines[i].lower().startswith("learned operators"), lines[i]
    ops_header = lines[i]
    i += 1
    ops: List[ListingOp] = []
    blank_runs: Set[int] = set()
    while i < len(lines):
        if lines[i].strip() == "":
            i += 1
            continue
        header = lines[i].rstrip()
        assert header.endswith(":"), f"expected operator header: {header!r}"
        op_name = header[:-1]
        fields = {}
        i += 1
        while i < len(lines) and lines[i].startswith("  "):
            key, _, value = lines[i].strip().partition(": ")
            fields[key] = value
            i += 1
        blanks = 0
        while i < len(lines) and lines[i].strip() == "":
            blanks += 1
            i += 1
        if i < len(lines):
            blank_runs.add(blanks)
        ops.append(ListingOp(
            name=op_name,
            parameters=_split_atom_list(fields["Parameters"]),
            preconditions=_split_atom_list(fields["Preconditions"]),
            add_effects=_split_atom_list(fields["Add Effects"]),
            delete_effects=_split_atom_list(fields["Delete Effects"]),
            ignore_effects=_split_atom_list(fields.get("Ignore Effects",
                                                       "[]")),
            skill=fields["Skill"],
        ))
    separator = "\n" if blank_runs == {0} else "\n\n"
    return Listing(pred_header, pred_lines, ops_header, ops, separator)


def build_listing(predicate_names: Sequence[str],
                  operators: Sequence[Operator]) -> Listing:
    """Canonical listing for a freshly learned model (atoms sorted)."""
    ops = []
    for op in operators:
        ops.append(ListingOp(
            name=op.name,
            parameters=[repr(v) for v in op.parameters],
            preconditions=[str(a) for a in sorted(op.preconditions, key=str)],
            add_effects=[str(a) for a in sorted(op.add_effects, key=str)],
            delete_effects=[str(a)
                            for a in sorted(op.delete_effects, key=str)],
            ignore_effects=[str(a)
                            for a in sorted(op.ignore_effects, key=str)],
            skill=(f"{op.skill.name}("
                   + ", ".join(repr(v) for v in op.skill_params) + ")"),
        ))
    return Listing("Learned predicates:", list(predicate_names),
                   "Learned operators:", ops)


# ---------------------------------------------------------------------------
# Operator isomorphism (modulo variable and predicate renaming)
# ---------------------------------------------------------------------------

def _atoms_match(atoms_a: FrozenSet[LiftedAtom],
                 atoms_b: FrozenSet[LiftedAtom],
                 var_map: Dict[Variable, Variable],
                 pred_map: Dict[str, str]) -> Optional[Dict[str, str]]:
    """Try to extend the predicate-name bijection so that the var-mapped
    atoms_a equals atoms_b. Variable types already agree through var_map, so
    predicates are matched by name (a listing may refine one predicate into
    several fine-typed signatures)."""
    remaining = list(atoms_b)

    def backtrack(todo: List[LiftedAtom], pmap: Dict[str, str],
                  used: Set[int]) -> Optional[Dict[str, str]]:
        if not todo:
            return pmap
        atom = todo[0]
        target_args = tuple(var_map[v] for v in atom.variables)
        name = atom.predicate.name
        for idx, cand in enumerate(remaining):
            if idx in used or cand.variables != target_args:
                continue
            mapped = pmap.get(name)
            if mapped is not None and mapped != cand.predicate.name:
                continue
            if mapped is None and cand.predicate.name in pmap.values():
                continue
            new_map = dict(pmap)
            new_map[name] = cand.predicate.name
            result = backtrack(todo[1:], new_map, used | {idx})
            if result is not None:
                return result
        return None

    if len(atoms_a) != len(atoms_b):
        return None
    return backtrack(sorted(atoms_a, key=str), pred_map, set())


def _operator_match(op_a: Operator, op_b: Operator,
                    pred_map: Dict[str, str]) -> Optional[Dict[str, str]]:
    if op_a.skill.name != op_b.skill.name:
        return None
    if len(op_a.parameters) != len(op_b.parameters):
        return None
    by_type_b: Dict[str, List[Variable]] = {}
    for v in op_b.parameters:
        by_type_b.setdefault(v.type.name, []).append(v)
    groups_a: Dict[str, List[Variable]] = {}
    for v in op_a.parameters:
        groups_a.setdefault(v.type.name, []).append(v)
    if {t: len(vs) for t, vs in groups_a.items()} != \
            {t: len(vs) for t, vs in by_type_b.items()}:
        return None
    type_names = sorted(groups_a)
    perm_options = [list(itertools.permutations(by_type_b[t]))
                    for t in type_names]
    for combo in itertools.product(*perm_options):
        var_map: Dict[Variable, Variable] = {}
        for t, perm in zip(type_names, combo):
            for va, vb in zip(groups_a[t], perm):
                var_map[va] = vb
        if tuple(var_map[v] for v in op_a.skill_params) != op_b.skill_params:
            continue
        pmap: Optional[Dict[str, str]] = dict(pred_map)
        for sel in ("preconditions", "add_effects", "delete_effects"):
            assert pmap is not None
            pmap = _atoms_match(getattr(op_a, sel), getattr(op_b, sel),
                                var_map, pmap)
            if pmap is None:
                break
        if pmap is not None:
            return pmap
    return None


def operators_isomorphic(ops_a: Sequence[Operator],
                         ops_b: Sequence[Operator]) -> bool:
    """True iff there is a bijection between the operator sets, a global
    predicate renaming, and per-operator variable renamings under which the
    two models are identical. Skill names must match exactly."""
    if len(ops_a) != len(ops_b):
        return False

    ops_a = sorted(ops_a, key=lambda o: (o.skill.name, o.complexity, o.name))

    def backtrack(idx: int, used: Set[int],
                  pred_map: Dict[str, str]) -> bool:
        if idx == len(ops_a):
            return True
        for j, op_b in enumerate(ops_b):
            if j in used:
                continue
            new_map = _operator_match(ops_a[idx], op_b, pred_map)
            if new_map is not None:
                if backtrack(idx + 1, used | {j}, new_map):
                    return True
        return False

    return backtrack(0, set(), {})


# ---------------------------------------------------------------------------
# PDDL emission and parsing
# ---------------------------------------------------------------------------

_PDDL_ESCAPES = (("[", "_lbk_"), ("]", "_rbk_"), ("<=", "_leq_"),
                 (":", "_cln_"), (".", "_dot_"), ("<", "_lt_"),
                 ("=", "_eq_"), ("|", "_bar_"))


def _pddl_escape(name: str) -> str:
    for ch, token in _PDDL_ESCAPES:
        name = name.replace(ch, token)
    return name


def _pddl_unescape(name: str) -> str:
    for ch, token in reversed(_PDDL_ESCAPES):
        name = name.replace(token, ch)
    return name


def _pddl_pred_name(pred: Predicate, collided: Set[str]) -> str:
    base = _pddl_escape(pred.name)
    if pred.name in collided:
        return base + "-sig-" + "-".join(t.name for t in pred.arg_types)
    return base


def _restore_pred_name(name: str) -> str:
    base = name.split("-sig-")[0]
    return _pddl_unescape(base)


def emit_pddl(operators: Sequence[Operator],
              predicates: Sequence[Predicate],
              types: Sequence[ObjectType],
              domain_name: str = "symwm") -> str:
    """Typed-STRIPS PDDL domain text. Skill linkage is carried in a comment
    line that parse_pddl understands; other planners ignore it."""
    lines = [f"(define (domain {domain_name})",
             "  (:requirements :strips :typing)"]
    by_parent: Dict[str, List[str]] = {}
    roots: List[str] = []
    for t in sorted(types, key=lambda t: t.name):
        if t.parent is None:
            roots.append(t.name)
        else:
            by_parent.setdefault(t.parent.name, []).append(t.name)
    type_lines = []
    for parent in sorted(by_parent):
        type_lines.append("    " + " ".join(sorted(by_parent[parent]))
                          + f" - {parent}")
    if roots and by_parent:
        type_lines.append("    " + " ".join(sorted(roots)))
    elif roots:
        type_lines.append("    " + " ".join(sorted(roots)))
    lines.append("  (:types")
    lines.extend(type_lines)
    lines.append("  )")
    name_counts: Dict[str, int] = {}
    for pred in predicates:
        name_counts[pred.name] = name_counts.get(pred.name, 0) + 1
    collided = {n for n, c in name_counts.items() if c > 1}
    lines.append("  (:predicates")
    for pred in sorted(predicates):
        args = " ".join(f"?a{i} - {t.name}"
                        for i, t in enumerate(pred.arg_types))
        inner = (_pddl_pred_name(pred, collided)
                 + (" " + args if args else ""))
        lines.append(f"    ({inner})")
    lines.append("  )")

    def atom_str(atom: LiftedAtom) -> str:
        inner = _pddl_pred_name(atom.predicate, collided)
        for v in atom.variables:
            inner += f" {v.name}"
        return f"({inner})"

    for op in operators:
        params = " ".join(f"{v.name} - {v.type.name}"
                          for v in op.parameters)
        pre = " ".join(atom_str(a) for a in sorted(op.preconditions, key=str))
        effects = [atom_str(a) for a in sorted(op.add_effects, key=str)]
        effects += [f"(not {atom_str(a)})"
                    for a in sorted(op.delete_effects, key=str)]
        skill_args = " ".join(v.name for v in op.skill_params)
        lines.append(f"  (:action {op.name}")
        lines.append(f"    ;; skill: {op.skill.name} [{skill_args}] "
                     f"theta: {op.skill.continuous_dim}")
        lines.append(f"    :parameters ({params})")
        lines.append(f"    :precondition (and {pre})")
        lines.append(f"    :effect (and {' '.join(effects)})")
        lines.append("  )")
    lines.append(")")
    return "\n".join(lines) + "\n"


def emit_pddl_problem(task: Task, init_atoms: Sequence[GroundAtom],
                      problem_name: str = "task",
                      domain_name: str = "symwm") -> str:
    name_counts: Dict[str, int] = {}
    for atom in list(init_atoms) + sorted(task.goal):
        name_counts.setdefault(atom.predicate.name, 0)
    collided: Set[str] = set()
    lines = [f"(define (problem {problem_name})",
             f"  (:domain {domain_name})",
             "  (:objects"]
    for obj in sorted(task.objects):
        lines.append(f"    {obj.name} - {obj.type.name}")
    lines.append("  )")
    lines.append("  (:init")
    for atom in sorted(init_atoms):
        inner = " ".join([_pddl_pred_name(atom.predicate, collided)]
                         + [o.name for o in atom.objects])
        lines.append(f"    ({inner})")
    lines.append("  )")
    goal_atoms = " ".join(
        "(" + " ".join([_pddl_pred_name(a.predicate, collided)]
                       + [o.name for o in a.objects]) + ")"
        for a in sorted(task.goal))
    lines.append(f"  (:goal (and {goal_atoms}))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def _tokenize_sexp(text: str) -> List[Tuple[str, int]]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == ";":
            j = text.find("\n", i)
            comment = text[i:j if j != -1 else len(text)]
            tokens.append((comment, i))
            i = j if j != -1 else len(text)
        elif ch in "()":
            tokens.append((ch, i))
            i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() \
                    and text[j] not in "();":
                j += 1
            tokens.append((text[i:j], i))
            i = j
    return tokens


def _parse_sexp(tokens: List[Tuple[str, int]], pos: int = 0):
    if pos >= len(tokens):
        raise PddlSyntaxError("unexpected end of input",
                              tokens[-1][1] if tokens else 0)
    tok, offset = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos][0] != ")":
            item, pos = _parse_sexp(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise PddlSyntaxError("missing closing parenthesis", offset)
        return items, pos + 1
    if tok == ")":
        raise PddlSyntaxError("unbalanced closing parenthesis", offset)
    return tok, pos + 1


@dataclass
class ParsedPddl:
    types: Dict[str, ObjectType]
    predicates: Dict[Tuple[str, Tuple[str, ...]], Predicate]
    operators: List[Operator]


def parse_pddl(text: str) -> ParsedPddl:
    """Parse a typed-STRIPS domain emitted by emit_pddl (or hand-written in
    the same subset)."""
    # Skill comments: op name -> (skill name, arg names, theta dim).
    skill_notes: Dict[str, Tuple[str, List[str], int]] = {}
    note_re = re.compile(r";;\s*skill:\s*(\S+)\s*\[([^\]]*)\]\s*theta:\s*(\d+)")
    pending: Optional[Tuple[str, List[str], int]] = None
    tokens = _tokenize_sexp(text)
    cleaned = []
    comment_for_action: Dict[int, Tuple[str, List[str], int]] = {}
    for tok, off in tokens:
        if tok.startswith(";"):
            m = note_re.search(tok)
            if m:
                args = [a for a in m.group(2).split() if a]
                pending = (m.group(1), args, int(m.group(3)))
            continue
        if pending is not None:
            comment_for_action[len(cleaned)] = pending
            pending = None
        cleaned.append((tok, off))
    tree, _ = _parse_sexp(cleaned, 0)
    if not isinstance(tree, list) or not tree or tree[0] != "define":
        raise PddlSyntaxError("expected (define (domain ...) ...)", 0)
    types: Dict[str, ObjectType] = {"object": ObjectType("object")}
    predicates: Dict[Tuple[str, Tuple[str, ...]], Predicate] = {}
    operators: List[Operator] = []

    def get_type(name: str) -> ObjectType:
        types.setdefault(name, ObjectType(name))
        return types[name]

    def parse_typed_list(items: List[str]) -> List[Tuple[str, str]]:
        out = []
        buffer: List[str] = []
        i = 0
        while i < len(items):
            if items[i] == "-":
                type_name = items[i + 1]
                out.extend((entry, type_name) for entry in buffer)
                buffer = []
                i += 2
            else:
                buffer.append(items[i])
                i += 1
        out.extend((entry, "object") for entry in buffer)
        return out

    # Map from cleaned-token position to actions is hard to thread through
    # the recursive parse, so re-scan the raw text per action name instead.
    notes_by_name: Dict[str, Tuple[str, List[str], int]] = {}
    for block in re.finditer(r"\(:action\s+(\S+)([^\0]*?)(?=\(:action|\)\s*$)",
                             text):
        m = note_re.search(block.group(2))
        if m:
            notes_by_name[block.group(1)] = (
                m.group(1), [a for a in m.group(2).split() if a],
                int(m.group(3)))

    for section in tree[1:]:
        if not isinstance(section, list) or not section:
            continue
        head = section[0]
        if head == "domain":
            continue
        if head == ":types":
            # Parent declarations first so child types resolve.
            pairs = parse_typed_list(section[1:])
            for _, parent in pairs:
                get_type(parent)
            for child, parent in pairs:
                types[child] = ObjectType(child, parent=get_type(parent))
        elif head == ":predicates":
            for entry in section[1:]:
                name = _restore_pred_name(entry[0])
                args = parse_typed_list(entry[1:])
                sig = (name, tuple(t for _, t in args))
                predicates[sig] = Predicate(
                    name, tuple(get_type(t) for _, t in args),
                    kind=KIND_VISUAL)
        elif head == ":action":
            op_name = section[1]
            fields = {}
            i = 2
            while i < len(section):
                key = section[i]
                fields[key] = section[i + 1]
                i += 2
            params = [Variable(n, get_type(t))
                      for n, t in parse_typed_list(fields[":parameters"])]
            var_map = {v.name: v for v in params}

            def conj(node) -> List[List[str]]:
                if not node:
                    return []
                if node[0] == "and":
                    return node[1:]
                return [node]

            def lift(entry, var_map=var_map) -> LiftedAtom:
                name = _restore_pred_name(entry[0])
                vars_ = tuple(var_map[v] for v in entry[1:])
                sig = (name, tuple(v.type.name for v in vars_))
                if sig not in predicates:
                    predicates[sig] = Predicate(
                        name, tuple(v.type for v in vars_), kind=KIND_VISUAL)
                return LiftedAtom(predicates[sig], vars_)

            pre = [lift(e) for e in conj(fields.get(":precondition", []))]
            adds, dels = [], []
            for entry in conj(fields.get(":effect", [])):
                if entry and entry[0] == "not":
                    dels.append(lift(entry[1]))
                else:
                    adds.append(lift(entry))
            note = notes_by_name.get(op_name)
            if note is not None:
                skill_name, skill_arg_names, theta = note
                skill_vars = tuple(var_map[a] for a in skill_arg_names)
            else:
                skill_name, theta = op_name, 0
                skill_vars = tuple(params)
            skill = Skill(skill_name, tuple(v.type for v in skill_vars),
                          continuous_dim=theta)
            operators.append(Operator(
                name=op_name, parameters=tuple(params),
                preconditions=frozenset(pre), add_effects=frozenset(adds),
                delete_effects=frozenset(dels), skill=skill,
                skill_params=skill_vars))
    return ParsedPddl(types, predicates, operators)


# ---------------------------------------------------------------------------
# JSON artifacts
# ---------------------------------------------------------------------------

def _dump(data: dict) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _type_to_json(t: ObjectType) -> dict:
    return {"name": t.name, "features": list(t.feature_names),
            "parent": t.parent.name if t.parent else None}


def types_from_json(entries: Sequence[dict]) -> Dict[str, ObjectType]:
    types: Dict[str, ObjectType] = {}
    remaining = list(entries)
    while remaining:
        progressed = False
        for entry in list(remaining):
            parent = entry["parent"]
            if parent is None or parent in types:
                types[entry["name"]] = ObjectType(
                    entry["name"], tuple(entry["features"]),
                    types.get(parent) if parent else None)
                remaining.remove(entry)
                progressed = True
        if not progressed:
            raise ValueError("type hierarchy has a cycle or missing parent")
    return types


def _predicate_to_json(p: Predicate) -> dict:
    out = {"name": p.name, "arg_types": [t.name for t in p.arg_types],
           "kind": p.kind}
    if p.condition is not None:
        c = p.condition
        out["condition"] = {"type": c.type_name, "feature": c.feature,
                            "threshold": c.threshold,
                            "threshold_idx": c.threshold_idx,
                            "negated": c.negated}
    return out


def predicate_from_json(entry: dict,
                        types: Dict[str, ObjectType]) -> Predicate:
    cond = None
    if "condition" in entry:
        c = entry["condition"]
        cond = FeatureCondition(c["type"], c["feature"], c["threshold"],
                                c["threshold_idx"], c["negated"])
    return Predicate(entry["name"],
                     tuple(types[t] for t in entry["arg_types"]),
                     kind=entry["kind"], condition=cond)


def _atom_to_json(atom: LiftedAtom) -> dict:
    return {"predicate": atom.predicate.name,
            "arg_types": [t.name for t in atom.predicate.arg_types],
            "args": [v.name for v in atom.variables]}


def _operator_to_json(op: Operator) -> dict:
    return {
        "name": op.name,
        "parameters": [{"name": v.name, "type": v.type.name}
                       for v in op.parameters],
        "preconditions": [_atom_to_json(a)
                          for a in sorted(op.preconditions, key=str)],
        "add_effects": [_atom_to_json(a)
                        for a in sorted(op.add_effects, key=str)],
        "delete_effects": [_atom_to_json(a)
                           for a in sorted(op.delete_effects, key=str)],
        "skill": {"name": op.skill.name,
                  "params": [v.name for v in op.skill_params],
                  "continuous_dim": op.skill.continuous_dim},
        "support_count": op.support_count,
    }


def operator_from_json(entry: dict, types: Dict[str, ObjectType],
                       predicates: Dict[Tuple[str, Tuple[str, ...]],
                                        Predicate]) -> Operator:
    params = tuple(Variable(p["name"], types[p["type"]])
                   for p in entry["parameters"])
    var_map = {v.name: v for v in params}

    def atoms(entries: Sequence[dict]) -> FrozenSet[LiftedAtom]:
        out = []
        for e in entries:
            sig = (e["predicate"], tuple(e["arg_types"]))
            pred = predicates[sig]
            out.append(LiftedAtom(pred,
                                  tuple(var_map[a] for a in e["args"])))
        return frozenset(out)

    skill_vars = tuple(var_map[a] for a in entry["skill"]["params"])
    skill = Skill(entry["skill"]["name"],
                  tuple(v.type for v in skill_vars),
                  continuous_dim=entry["skill"]["continuous_dim"])
    return Operator(
        name=entry["name"], parameters=params,
        preconditions=atoms(entry["preconditions"]),
        add_effects=atoms(entry["add_effects"]),
        delete_effects=atoms(entry["delete_effects"]),
        skill=skill, skill_params=skill_vars,
        support_count=entry["support_count"])


@dataclass
class ModelArtifact:
    """A self-contained learned model: loading reproduces planning behavior."""
    domain: str
    types: Dict[str, ObjectType]
    predicates: List[Predicate]
    operators: List[Operator]
    samplers: Dict[str, Sampler]
    trace: dict
    provenance: dict

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "domain": self.domain,
            "types": [_type_to_json(t)
                      for t in sorted(self.types.values(),
                                      key=lambda t: t.name)],
            "predicates": [_predicate_to_json(p)
                           for p in sorted(self.predicates)],
            "operators": [_operator_to_json(op) for op in self.operators],
            "samplers": {name: sampler_to_json(s)
                         for name, s in sorted(self.samplers.items())},
            "trace": self.trace,
            "provenance": self.provenance,
        }

    def dumps(self) -> str:
        return _dump(self.to_json())

    @staticmethod
    def loads(text: str) -> "ModelArtifact":
        data = json.loads(text)
        assert data["schema_version"] == SCHEMA_VERSION
        types = types_from_json(data["types"])
        predicates = [predicate_from_json(e, types)
                      for e in data["predicates"]]
        pred_index = {p.signature: p for p in predicates}
        operators = [operator_from_json(e, types, pred_index)
                     for e in data["operators"]]
        samplers = {name: sampler_from_json(s)
                    for name, s in data["samplers"].items()}
        return ModelArtifact(data["domain"], types, predicates, operators,
                             samplers, data["trace"], data["provenance"])


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------

def dataset_to_json(demos: Sequence[Demonstration],
                    types: Dict[str, ObjectType]) -> dict:
    def state_json(state: State) -> dict:
        return {
            "features": {o.name: [float(v) for v in state.data[o]]
                         for o in sorted(state.data)},
            "images": list(state.images),
            "timestep": state.timestep,
        }

    def atom_json(atom: GroundAtom) -> dict:
        return {"predicate": atom.predicate.name,
                "arg_types": [t.name for t in atom.predicate.arg_types],
                "kind": atom.predicate.kind,
                "args": [o.name for o in atom.objects]}

    out = {"schema_version": SCHEMA_VERSION,
           "types": [_type_to_json(t)
                     for t in sorted(types.values(), key=lambda t: t.name)],
           "demos": []}
    for demo in demos:
        entry = {
            "name": demo.name,
            "objects": [{"name": o.name, "type": o.type.name,
                         "descriptor": o.descriptor}
                        for o in sorted(demo.objects)],
            "goal": [atom_json(a) for a in sorted(demo.goal)],
            "steps": [],
        }
        for i, action in enumerate(demo.actions):
            entry["steps"].append({
                "state": state_json(demo.states[i]),
                "action": {"skill": action.skill.name,
                           "args": [o.name for o in action.objects],
                           "theta": list(action.theta)},
            })
        entry["final_state"] = state_json(demo.states[-1])
        out["demos"].append(entry)
    return out


def dataset_from_json(data: dict, skills: Dict[str, Skill],
                      predicates: Sequence[Predicate]
                      ) -> List[Demonstration]:
    types = types_from_json(data["types"])
    pred_index = {p.signature: p for p in predicates}
    demos = []
    for entry in data["demos"]:
        objects = tuple(sorted(
            ObjectRef(o["name"], types[o["type"]], o["descriptor"])
            for o in entry["objects"]))
        by_name = {o.name: o for o in objects}

        def state_from(sj: dict) -> State:
            return State({by_name[n]: np.asarray(v, dtype=float)
                          for n, v in sj["features"].items()},
                         tuple(sj["images"]), sj["timestep"])

        states = [state_from(s["state"]) for s in entry["steps"]]
        states.append(state_from(entry["final_state"]))
        actions = []
        for s in entry["steps"]:
            a = s["action"]
            actions.append(Action(skills[a["skill"]],
                                  tuple(by_name[n] for n in a["args"]),
                                  tuple(a["theta"])))
        goal = frozenset(
            GroundAtom(pred_index[(g["predicate"], tuple(g["arg_types"]))],
                       tuple(by_name[n] for n in g["args"]))
            for g in entry["goal"])
        demos.append(Demonstration(objects, tuple(states), tuple(actions),
                                   goal, name=entry["name"]))
    return demos


def dataset_dumps(demos: Sequence[Demonstration],
                  types: Dict[str, ObjectType]) -> str:
    return _dump(dataset_to_json(demos, types))
