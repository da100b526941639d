"""Grounding, delete-relaxation bookkeeping, greedy best-first search over
abstract states, plan validation, and the plan-then-execute loop."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import (Callable, Dict, FrozenSet, Iterator, List, Optional,
                    Sequence, Set, Tuple)

import numpy as np

from .labeling import LabelContext, Labeler, abstract
from .samplers import Exhausted, Sampler, sampler_input
from .structs import (AbstractState, Action, GroundAtom, GroundOperator,
                      ObjectRef, Operator, Predicate, State, Task, apply,
                      goal_holds)

STATUS_OK = "ok"
STATUS_BUDGET = "budget_exhausted"
STATUS_UNREACHABLE = "proven_unreachable"

OUTCOME_SUCCESS = "success"
OUTCOME_PLAN_FAILURE = "plan_failure"
OUTCOME_DIVERGENCE = "execution_divergence"

DEFAULT_NODE_BUDGET = 10_000


def ground_all(operators: Sequence[Operator],
               objects: Sequence[ObjectRef],
               init: Optional[AbstractState] = None) -> List[GroundOperator]:
    """All type-consistent injective groundings, optionally filtered by
    delete-relaxed reachability from an initial abstract state."""
    grounded: List[GroundOperator] = []
    for op in sorted(operators):
        pools = []
        for var in op.parameters:
            pools.append([o for o in sorted(objects)
                          if o.type.is_a(var.type)])
        for combo in itertools.product(*pools):
            if len(set(combo)) != len(combo):
                continue
            sub = dict(zip(op.parameters, combo))
            grounded.append(op.ground(sub))
    if init is not None:
        reachable = _relaxed_reachable_atoms(grounded, init)
        grounded = [g for g in grounded if g.preconditions <= reachable]
    return grounded


def _relaxed_reachable_atoms(ground_ops: Sequence[GroundOperator],
                             init: AbstractState) -> FrozenSet[GroundAtom]:
    """Fixpoint of add effects under the delete relaxation."""
    reachable: Set[GroundAtom] = set(init)
    pending = list(ground_ops)
    changed = True
    while changed:
        changed = False
        remaining = []
        for g in pending:
            if g.preconditions <= reachable:
                before = len(reachable)
                reachable |= g.add_effects
                changed = changed or len(reachable) != before
            else:
                remaining.append(g)
        pending = remaining
    return frozenset(reachable)


@dataclass
class AbstractPlan:
    steps: List[GroundOperator]
    expected_states: List[AbstractState]
    nodes_created: int
    nodes_expanded: int

    def __len__(self) -> int:
        return len(self.steps)


@dataclass
class PlanResult:
    status: str
    plan: Optional[AbstractPlan] = None
    nodes_created: int = 0
    nodes_expanded: int = 0


class _SearchSpace:
    """Indexed ground-operator space with the additive heuristic."""

    def __init__(self, ground_ops: Sequence[GroundOperator],
                 goal: FrozenSet[GroundAtom]) -> None:
        self.ground_ops = sorted(
            ground_ops, key=lambda g: (g.parent.name,
                                       tuple(o.name for o in g.objects)))
        self.goal = goal

    def h_add(self, atoms: AbstractState) -> float:
        """Additive delete-relaxation heuristic; inf at dead ends."""
        cost: Dict[GroundAtom, float] = {a: 0.0 for a in atoms}
        needed: Set[GroundAtom] = set(self.goal)
        for g in self.ground_ops:
            needed |= g.preconditions
        changed = True
        while changed:
            changed = False
            for g in self.ground_ops:
                total = 0.0
                feasible = True
                for p in g.preconditions:
                    c = cost.get(p)
                    if c is None:
                        feasible = False
                        break
                    total += c
                if not feasible:
                    continue
                new_cost = total + 1.0
                for a in g.add_effects:
                    if cost.get(a, float("inf")) > new_cost:
                        cost[a] = new_cost
                        changed = True
        total = 0.0
        for g_atom in self.goal:
            c = cost.get(g_atom)
            if c is None:
                return float("inf")
            total += c
        return total


class _TreeNode:
    """Search-tree node with parent links (paths are reconstructed by
    walking up; cycle checks walk the same chain)."""

    __slots__ = ("atoms", "parent", "op", "depth")

    def __init__(self, atoms: AbstractState, parent: Optional["_TreeNode"],
                 op: Optional[GroundOperator]) -> None:
        self.atoms = atoms
        self.parent = parent
        self.op = op
        self.depth = 0 if parent is None else parent.depth + 1

    def on_path(self, atoms: AbstractState) -> bool:
        node: Optional[_TreeNode] = self
        while node is not None:
            if node.atoms == atoms:
                return True
            node = node.parent
        return False

    def path(self) -> List[GroundOperator]:
        steps: List[GroundOperator] = []
        node: Optional[_TreeNode] = self
        while node is not None and node.op is not None:
            steps.append(node.op)
            node = node.parent
        steps.reverse()
        return steps


def plan_skeletons(init: AbstractState, goal: FrozenSet[GroundAtom],
                   ground_ops: Sequence[GroundOperator],
                   node_budget: int = DEFAULT_NODE_BUDGET,
                   max_depth: Optional[int] = None
                   ) -> Iterator[Tuple[AbstractPlan, str]]:
    """Greedy best-first tree search (h_add, ties by insertion order) that
    yields one plan per distinct goal-reaching action sequence, best-first.
    Graph search would conflate action orderings that reach the same final
    abstract state, so skeleton enumeration works over the search tree with
    a path-cycle check. The final yield carries a terminal status."""
    space = _SearchSpace(ground_ops, goal)
    reachable = _relaxed_reachable_atoms(space.ground_ops, init)
    nodes_created = 1
    nodes_expanded = 0
    if not goal <= reachable:
        yield (AbstractPlan([], [init], nodes_created, 0),
               STATUS_UNREACHABLE)
        return
    h_cache: Dict[AbstractState, float] = {}

    def h_of(atoms: AbstractState) -> float:
        if atoms not in h_cache:
            h_cache[atoms] = space.h_add(atoms)
        return h_cache[atoms]

    counter = itertools.count()
    root = _TreeNode(init, None, None)
    open_heap: List[Tuple[float, int, _TreeNode]] = []
    heapq.heappush(open_heap, (h_of(init), next(counter), root))
    while open_heap:
        _, _, node = heapq.heappop(open_heap)
        if goal_holds(node.atoms, goal):
            steps = node.path()
            expected = [init]
            for op in steps:
                expected.append(apply(op, expected[-1]))
            yield (AbstractPlan(steps, expected, nodes_created,
                                nodes_expanded), STATUS_OK)
            continue
        if nodes_created >= node_budget:
            break
        if max_depth is not None and node.depth >= max_depth:
            continue
        nodes_expanded += 1
        for g in space.ground_ops:
            if not g.applicable(node.atoms):
                continue
            succ = apply(g, node.atoms)
            if succ == node.atoms:
                continue
            nodes_created += 1
            if node.on_path(succ):
                continue
            h = h_of(succ)
            if h == float("inf"):
                continue
            heapq.heappush(open_heap,
                           (h, next(counter), _TreeNode(succ, node, g)))
            if nodes_created >= node_budget:
                break
    yield (AbstractPlan([], [init], nodes_created, nodes_expanded),
           STATUS_BUDGET)


def plan(init: AbstractState, goal: FrozenSet[GroundAtom],
         ground_ops: Sequence[GroundOperator],
         node_budget: int = DEFAULT_NODE_BUDGET) -> PlanResult:
    """First plan from the skeleton generator, or a typed failure."""
    for abstract_plan, status in plan_skeletons(init, goal, ground_ops,
                                                node_budget):
        if status == STATUS_OK:
            assert validate(abstract_plan, init, goal)
            return PlanResult(STATUS_OK, abstract_plan,
                              abstract_plan.nodes_created,
                              abstract_plan.nodes_expanded)
        return PlanResult(status, None, abstract_plan.nodes_created,
                          abstract_plan.nodes_expanded)
    raise AssertionError("skeleton generator yielded nothing")


def validate(abstract_plan: AbstractPlan, init: AbstractState,
             goal: FrozenSet[GroundAtom]) -> bool:
    """Replay apply(), checking preconditions at every step and the goal at
    the end."""
    atoms = init
    for op in abstract_plan.steps:
        if not op.applicable(atoms):
            return False
        atoms = apply(op, atoms)
    return goal_holds(atoms, goal)


@dataclass
class ExecutionOutcome:
    status: str
    plan: Optional[AbstractPlan] = None
    actions: List[Action] = field(default_factory=list)
    divergence_steps: List[int] = field(default_factory=list)
    nodes_created: int = 0


def plan_and_execute(task: Task, predicates: Sequence[Predicate],
                     operators: Sequence[Operator],
                     samplers: Dict[str, Sampler],
                     environment, labeler: Optional[Labeler],
                     node_budget: int = DEFAULT_NODE_BUDGET,
                     rng: Optional[np.random.Generator] = None,
                     replan: bool = False,
                     max_replans: int = 10) -> ExecutionOutcome:
    """Abstract the initial state, plan, then greedily execute each skill
    with sampled continuous parameters. Success iff the task goal holds in
    the final low-level environment state. Divergence from the plan's
    expected abstract states is recorded; replanning is flag-gated and off
    by default."""
    if rng is None:
        rng = np.random.default_rng(0)
    outcome = ExecutionOutcome(OUTCOME_PLAN_FAILURE)
    replans = 0
    while True:
        state = environment.state
        atoms = abstract(state, predicates, task.objects, labeler,
                         LabelContext())
        ground_ops = ground_all(operators, task.objects, atoms)
        result = plan(atoms, task.goal, ground_ops, node_budget)
        outcome.nodes_created += result.nodes_created
        if result.status != STATUS_OK:
            outcome.status = OUTCOME_PLAN_FAILURE
            return outcome
        assert result.plan is not None
        outcome.plan = result.plan
        diverged_at: Optional[int] = None
        for i, ground_op in enumerate(result.plan.steps):
            x = sampler_input([state.data[o] for o in ground_op.objects])
            sampler = samplers.get(ground_op.parent.name)
            skill = ground_op.parent.skill
            if skill.continuous_dim == 0:
                theta: Tuple[float, ...] = ()
            else:
                assert sampler is not None, f"no sampler for {ground_op}"
                try:
                    theta = tuple(float(v) for v in sampler.sample(x, rng))
                except Exhausted:
                    outcome.status = OUTCOME_PLAN_FAILURE
                    return outcome
            action = Action(skill, ground_op.skill_objects, theta)
            state = environment.step(action)
            outcome.actions.append(action)
            observed = abstract(state, predicates, task.objects, labeler,
                                LabelContext())
            if observed != result.plan.expected_states[i + 1]:
                outcome.divergence_steps.append(len(outcome.actions) - 1)
                if diverged_at is None:
                    diverged_at = i
                if replan:
                    break
        if environment.goal_reached(task.goal):
            outcome.status = OUTCOME_SUCCESS
            return outcome
        if replan and diverged_at is not None and replans < max_replans:
            replans += 1
            continue
        outcome.status = OUTCOME_DIVERGENCE
        return outcome
