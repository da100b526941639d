"""Hill-climbing predicate subselection with a planning-based objective:
greedy forward selection over the candidate pool, early-stopped by a
threshold on the objective improvement."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .labeling import Labeler
from .oplearn import (EquivalenceClass, LabelStore, LearnConfig, LearnedModel,
                      learn_operators)
from .planner import (DEFAULT_NODE_BUDGET, STATUS_OK, ground_all,
                      plan_skeletons)
from .proposal import PredicatePool
from .samplers import (Sampler, SamplerDataset, fit, sampler_input)
from .structs import (KIND_FEATURE, KIND_PROVIDED, KIND_VISUAL, Action,
                      Demonstration, Predicate)


class EmptyPool(ValueError):
    """Raised when the pool carries no goal predicates to retain."""


@dataclass
class ObjectiveConfig:
    """Planning-based objective J.

    cost(d) accumulates planner nodes created across a top-K skeleton loop;
    a skeleton counts as solving the demo when its skill sequence, executed
    in the simulator from the demo's initial state, reaches the demo goal
    (the refinement check; disable with validate_execution=False to score
    abstract solvability only). Unsolved demos cost fail_penalty.
    """
    node_budget: int = DEFAULT_NODE_BUDGET
    fail_penalty: float = 1e6
    lambda_pred: float = 100.0
    lambda_op: float = 1.0
    max_skeletons: int = 8
    validate_execution: bool = True
    spawn_env: Optional[Callable] = None
    sample_seed: int = 0

    def __post_init__(self) -> None:
        assert self.fail_penalty > self.node_budget


def fit_samplers(model: LearnedModel) -> Dict[str, Sampler]:
    """One sampler per operator, trained on its equivalence class with
    same-skill non-members as negatives."""
    samplers: Dict[str, Sampler] = {}
    for op, cls in zip(model.operators, model.classes):
        theta_dim = cls.skill.continuous_dim
        positives = []
        for trans, delta in cls.members:
            x = sampler_input([trans.state.data[delta[v]]
                               for v in cls.parameters])
            positives.append((x, np.asarray(trans.action.theta)))
        negatives = []
        if theta_dim > 0:
            for other_op, other_cls in zip(model.operators, model.classes):
                if other_cls is cls or other_cls.skill != cls.skill:
                    continue
                for trans, delta in other_cls.members:
                    objs = [trans.state.data[delta[v]]
                            for v in other_cls.parameters]
                    negatives.append((sampler_input(objs),
                                      np.asarray(trans.action.theta)))
        dataset = SamplerDataset(positives, negatives, theta_dim)
        samplers[op.name] = fit(dataset)
    return samplers


def _execute_skeleton(demo: Demonstration, steps, samplers, spawn_env,
                      rng: np.random.Generator) -> bool:
    env = spawn_env(demo.states[0], demo.objects)
    for ground_op in steps:
        state = env.state
        skill = ground_op.parent.skill
        if skill.continuous_dim == 0:
            theta: Tuple[float, ...] = ()
        else:
            sampler = samplers[ground_op.parent.name]
            x = sampler_input([state.data[o] for o in ground_op.objects])
            try:
                theta = tuple(float(v) for v in sampler.sample(x, rng))
            except Exception:
                return False
        env.step(Action(skill, ground_op.skill_objects, theta))
    return env.goal_reached(demo.goal)


def demo_cost(demo: Demonstration, demo_idx: int, model: LearnedModel,
              predicates: Sequence[Predicate], cfg: ObjectiveConfig,
              store: LabelStore,
              samplers: Optional[Dict[str, Sampler]] = None) -> float:
    """Nodes created until a validated skeleton solves the demo's goal from
    its initial abstract state, else fail_penalty."""
    init_atoms = store.atoms(demo_idx, 0, predicates)
    ground_ops = ground_all(model.operators, demo.objects, init_atoms)
    execute = cfg.validate_execution and cfg.spawn_env is not None
    if execute and samplers is None:
        samplers = fit_samplers(model)
    found = 0
    for abstract_plan, status in plan_skeletons(init_atoms, demo.goal,
                                                ground_ops,
                                                cfg.node_budget):
        if status != STATUS_OK:
            return cfg.fail_penalty
        found += 1
        if not execute:
            return float(abstract_plan.nodes_created)
        rng = np.random.default_rng(
            (cfg.sample_seed, demo_idx, found))
        if _execute_skeleton(demo, abstract_plan.steps, samplers,
                             cfg.spawn_env, rng):
            return float(abstract_plan.nodes_created)
        if found >= cfg.max_skeletons:
            return cfg.fail_penalty
    return cfg.fail_penalty


def objective_J(demos: Sequence[Demonstration], model: LearnedModel,
                predicates: Sequence[Predicate],
                init_predicates: Sequence[Predicate], cfg: ObjectiveConfig,
                store: LabelStore) -> float:
    """J = sum of demo costs + lambda_pred * |predicates \\ init| +
    lambda_op * total operator size."""
    samplers = (fit_samplers(model)
                if cfg.validate_execution and cfg.spawn_env is not None
                else None)
    total = 0.0
    for d, demo in enumerate(demos):
        total += demo_cost(demo, d, model, predicates, cfg, store, samplers)
    init_set = set(init_predicates)
    total += cfg.lambda_pred * sum(1 for p in set(predicates)
                                   if p not in init_set)
    total += cfg.lambda_op * sum(op.complexity for op in model.operators)
    return total


@dataclass
class SelectionConfig:
    j_thresh: float = 2000.0
    learn: LearnConfig = field(default_factory=LearnConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    rollback_final: bool = False


@dataclass
class SelectionTrace:
    """Per-iteration records plus the final selection."""
    iterations: List[dict] = field(default_factory=list)
    candidates_evaluated: int = 0
    collapsed_groups: Dict[str, List[str]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"iterations": self.iterations,
                "candidates_evaluated": self.candidates_evaluated,
                "collapsed_groups": self.collapsed_groups}


@dataclass
class SelectionResult:
    predicates: List[Predicate]
    model: LearnedModel
    trace: SelectionTrace


_KIND_RANK = {KIND_VISUAL: 0, KIND_PROVIDED: 1, KIND_FEATURE: 2}


def _labeling_digest(pred: Predicate, store: LabelStore,
                     demos: Sequence[Demonstration]) -> str:
    """Signature of which object tuples the predicate labels true in every
    demo state. Name-independent, so synonyms (and feature twins) that are
    indistinguishable on the data share a digest."""
    h = hashlib.sha256()
    for d, demo in enumerate(demos):
        for t in range(len(demo.states)):
            atoms = store.atoms(d, t, [pred])
            payload = ";".join(sorted(
                ",".join(o.name for o in a.objects) for a in atoms))
            h.update(f"{d}|{t}|{payload}".encode())
    return h.hexdigest()


def hill_climb(pool: PredicatePool, demos: Sequence[Demonstration],
               labeler: Optional[Labeler],
               cfg: SelectionConfig) -> SelectionResult:
    """Greedy best-first predicate addition (Algorithm-style): every
    iteration evaluates J for each remaining candidate group with the init
    predicates always included, adds the argmin, and stops once the
    improvement drops to the threshold. The below-threshold argmin is still
    added (pseudocode-faithful) unless rollback_final is set; a strictly
    negative best improvement stops without adding."""
    if not pool.goal_predicates:
        raise EmptyPool("pool must retain at least the goal predicates")
    store = LabelStore(demos, labeler)
    init_preds = list(pool.init_predicates)

    # Candidates with identical labelings across all demo states share one
    # evaluation; ties prefer visual-kind, then lexicographic name.
    groups: Dict[str, List[Predicate]] = {}
    for pred in pool.candidates:
        groups.setdefault(_labeling_digest(pred, store, demos),
                          []).append(pred)
    reps: List[Predicate] = []
    trace = SelectionTrace()
    for digest, members in sorted(groups.items()):
        rep = min(members, key=lambda p: (_KIND_RANK[p.kind], p.name))
        reps.append(rep)
        trace.collapsed_groups[rep.name] = sorted(p.name for p in members)
    reps.sort(key=lambda p: (_KIND_RANK[p.kind], p.name))

    selected: List[Predicate] = []
    cost_memo: Dict[str, Tuple[float, float]] = {}

    def union_digest(preds: Sequence[Predicate]) -> str:
        h = hashlib.sha256()
        for d, demo in enumerate(demos):
            for t in range(len(demo.states)):
                atoms = store.atoms(d, t, preds)
                h.update(f"{d}|{t}|" .encode())
                h.update(";".join(sorted(str(a) for a in atoms)).encode())
        return h.hexdigest()

    def evaluate(cand: Optional[Predicate]) -> float:
        preds = list(dict.fromkeys(
            init_preds + selected + ([cand] if cand else [])))
        key = union_digest(preds)
        if key in cost_memo:
            cost_sum, op_sum = cost_memo[key]
        else:
            model = learn_operators(demos, preds, labeler, cfg.learn,
                                    store=store)
            samplers = (fit_samplers(model)
                        if cfg.objective.validate_execution
                        and cfg.objective.spawn_env is not None else None)
            cost_sum = sum(
                demo_cost(demo, d, model, preds, cfg.objective, store,
                          samplers)
                for d, demo in enumerate(demos))
            op_sum = sum(op.complexity for op in model.operators)
            cost_memo[key] = (cost_sum, op_sum)
        init_set = set(init_preds)
        return (cost_sum
                + cfg.objective.lambda_pred * sum(1 for p in set(preds)
                                                  if p not in init_set)
                + cfg.objective.lambda_op * op_sum)

    j_prev = float("inf")
    j_curr = float("inf")
    iteration = 0
    while reps:
        iteration += 1
        j_prev = j_curr
        scored: List[Tuple[float, int, str, Predicate]] = []
        for rep in reps:
            j = evaluate(rep)
            trace.candidates_evaluated += 1
            scored.append((j, _KIND_RANK[rep.kind], rep.name, rep))
        scored.sort(key=lambda row: row[:3])
        j_best, _, _, best = scored[0]
        improvement = j_prev - j_best
        if improvement < 0:
            break
        selected.append(best)
        reps.remove(best)
        j_curr = j_best
        trace.iterations.append({
            "iteration": iteration,
            "chosen": best.name,
            "j_before": None if j_prev == float("inf") else j_prev,
            "j_after": j_curr,
            "pool_size": len(reps) + 1,
            "improvement": (None if improvement == float("inf")
                            else improvement),
        })
        if improvement <= cfg.j_thresh:
            if cfg.rollback_final and improvement <= 0:
                selected.pop()
                trace.iterations[-1]["rolled_back"] = True
            break

    final_preds = list(dict.fromkeys(init_preds + selected))
    final_model = learn_operators(demos, final_preds, labeler, cfg.learn,
                                  store=store)
    return SelectionResult(final_preds, final_model, trace)
