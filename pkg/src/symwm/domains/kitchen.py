"""Continuous kitchen domain: turn a knob to heat its linked burner, then
push the kettle onto that burner. Gives sampler learning a nontrivial
accept region while staying analytically checkable."""

from __future__ import annotations

import math
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple
from urllib.parse import urlparse

import numpy as np

from ..labeling import Label, LabelContext, Labeler, UnsupportedPredicateKind
from ..structs import (KIND_PROVIDED, Action, Demonstration, GroundAtom,
                       ObjectRef, ObjectType, Predicate, Skill, State, Task)
from .base import Domain, Environment, register_domain

# Burner z encodes heat: 1.0 off, 2.18 on, so the feature grammar's midpoint
# lands at 1.59. Front/back geometry lives in x/y.
Z_OFF = 1.0
Z_ON = 2.18
KNOB_ANGLE = math.pi / 2
KNOB_TOLERANCE = 0.3
SLOT_HALF_WIDTH = 0.4

T_GRIPPER = ObjectType("gripper", ("x", "y", "z"))
T_KETTLE = ObjectType("kettle", ("x", "y"))
T_KNOB = ObjectType("knob", ("x", "y", "link_id"))
T_SURFACE = ObjectType("surface", ("x", "y", "z", "link_id"))

TYPES = {t.name: t for t in (T_GRIPPER, T_KETTLE, T_KNOB, T_SURFACE)}

TURN_ON_KNOB = Skill("MoveAndTurnOnKnob", (T_GRIPPER, T_KNOB),
                     continuous_dim=1)
PUSH_KETTLE = Skill("PushKettleOntoBurner", (T_GRIPPER, T_KETTLE, T_SURFACE),
                    continuous_dim=3)
SKILLS = {s.name: s for s in (TURN_ON_KNOB, PUSH_KETTLE)}

# Argument orders follow the learned-model listing: KettleBoiling(kettle,
# surface, knob); KnobAndBurnerLinked(knob, surface).
P_KETTLE_BOILING = Predicate("KettleBoiling", (T_KETTLE, T_SURFACE, T_KNOB),
                             kind=KIND_PROVIDED)
P_LINKED = Predicate("KnobAndBurnerLinked", (T_KNOB, T_SURFACE),
                     kind=KIND_PROVIDED)

# Burner layout: (x, y) with y=0 the front row, y=1 the back row.
BURNER_XY = {"burner1": (0.0, 0.0), "burner2": (0.0, 1.0),
             "burner3": (1.0, 0.0), "burner4": (1.0, 1.0)}
KNOB_XY = {"knob1": (0.0, 2.0), "knob2": (0.25, 2.0),
           "knob3": (0.75, 2.0), "knob4": (1.0, 2.0)}
LINK = {"knob1": "burner1", "knob2": "burner2",
        "knob3": "burner3", "knob4": "burner4"}
LINK_INV = {b: k for k, b in LINK.items()}


def _objects() -> Tuple[ObjectRef, ...]:
    objs = [ObjectRef("gripper1", T_GRIPPER, "the robot gripper"),
            ObjectRef("kettle1", T_KETTLE, "the silver kettle")]
    for i in range(1, 5):
        objs.append(ObjectRef(f"knob{i}", T_KNOB,
                              f"the control knob labeled {i}"))
        objs.append(ObjectRef(f"burner{i}", T_SURFACE,
                              f"the stove burner labeled {i}"))
    return tuple(sorted(objs))


class KitchenEnv(Environment):
    """Deterministic continuous simulator."""

    def __init__(self, kettle_xy: Tuple[float, float],
                 knobs_on: Optional[FrozenSet[str]] = None,
                 gripper: Tuple[float, float, float] = (-0.5, -0.5, 0.5),
                 instance: str = "0", t: int = 0) -> None:
        self.objects = _objects()
        self._by_name = {o.name: o for o in self.objects}
        self._kettle = np.array(kettle_xy, dtype=float)
        self._knobs_on = set(knobs_on or ())
        self._gripper = np.array(gripper, dtype=float)
        self._instance = instance
        self._t = t
        self._failed = False

    @property
    def last_action_failed(self) -> bool:
        return self._failed

    @property
    def state(self) -> State:
        data: Dict[ObjectRef, np.ndarray] = {}
        for obj in self.objects:
            if obj.type is T_GRIPPER:
                data[obj] = self._gripper.copy()
            elif obj.type is T_KETTLE:
                data[obj] = self._kettle.copy()
            elif obj.type is T_KNOB:
                x, y = KNOB_XY[obj.name]
                data[obj] = np.array([x, y, float(obj.name[-1])])
            else:
                x, y = BURNER_XY[obj.name]
                z = Z_ON if LINK_INV[obj.name] in self._knobs_on else Z_OFF
                data[obj] = np.array([x, y, z, float(obj.name[-1])])
        token = (f"sim://kitchen/{self._instance}/t{self._t:03d}"
                 f"?on={','.join(sorted(self._knobs_on))}")
        return State(data, images=(token,), timestep=self._t)

    def step(self, action: Action) -> State:
        if action.skill.name not in SKILLS:
            raise KeyError(f"unknown skill {action.skill.name}")
        self._failed = False
        if action.skill.name == TURN_ON_KNOB.name:
            knob = action.objects[1].name
            (push_dir,) = action.theta
            kx, ky = KNOB_XY[knob]
            self._gripper = np.array([kx, ky, 0.8])
            if abs(push_dir - KNOB_ANGLE) <= KNOB_TOLERANCE:
                self._knobs_on.add(knob)
            else:
                self._failed = True
        else:
            burner = action.objects[2].name
            px, py, _pz = action.theta
            landed = self._kettle + np.array([px, py])
            bx, by = BURNER_XY[burner]
            self._gripper = np.array([landed[0], landed[1], 0.2])
            if (abs(landed[0] - bx) <= SLOT_HALF_WIDTH
                    and abs(landed[1] - by) <= SLOT_HALF_WIDTH):
                self._kettle = np.array([bx, by])
            else:
                self._kettle = landed
                self._failed = True
        self._t += 1
        return self.state

    def goal_reached(self, goal: FrozenSet[GroundAtom]) -> bool:
        labeler = KitchenGroundTruthLabeler()
        labels = labeler.label_batch(self.state, sorted(goal),
                                     LabelContext())
        return all(labels[a] is Label.TRUE for a in goal)


class KitchenGroundTruthLabeler(Labeler):
    """Provided-predicate classifiers over the object-centric state."""

    identity = "kitchen-ground-truth"

    def label_batch(self, state: State, atoms: Sequence[GroundAtom],
                    ctx: LabelContext) -> Dict[GroundAtom, Label]:
        out: Dict[GroundAtom, Label] = {}
        for atom in atoms:
            name = atom.predicate.name
            if name == "KnobAndBurnerLinked":
                knob, burner = atom.objects
                ok = state.get(knob, "link_id") == state.get(burner,
                                                             "link_id")
            elif name == "KettleBoiling":
                kettle, burner, knob = atom.objects
                on_slot = (
                    abs(state.get(kettle, "x") - state.get(burner, "x"))
                    <= SLOT_HALF_WIDTH
                    and abs(state.get(kettle, "y") - state.get(burner, "y"))
                    <= SLOT_HALF_WIDTH)
                hot = state.get(burner, "z") > (Z_OFF + Z_ON) / 2
                linked = state.get(knob, "link_id") == state.get(burner,
                                                                 "link_id")
                ok = on_slot and hot and linked
            else:
                raise UnsupportedPredicateKind(f"no classifier for {name}")
            out[atom] = Label.TRUE if ok else Label.FALSE
        return out


def _demo_theta(rng: np.random.Generator,
                kettle_xy: Tuple[float, float],
                burner: str) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    push_dir = KNOB_ANGLE + float(rng.uniform(-0.15, 0.15))
    bx, by = BURNER_XY[burner]
    dx = bx - kettle_xy[0] + float(rng.uniform(-0.1, 0.1))
    dy = by - kettle_xy[1] + float(rng.uniform(-0.1, 0.1))
    return (push_dir,), (dx, dy, 0.0)


def generate_demos(n: int, seed: int) -> List[Demonstration]:
    """Demos turn on knob2 and push the kettle from the front-left burner
    onto the back-left burner2."""
    rng = np.random.default_rng(seed)
    demos = []
    for d in range(n):
        env = KitchenEnv(BURNER_XY["burner1"], instance=f"{seed}-{d:03d}")
        objects = env.objects
        by = {o.name: o for o in objects}
        theta_knob, theta_push = _demo_theta(rng, BURNER_XY["burner1"],
                                             "burner2")
        states = [env.state]
        actions = [
            Action(TURN_ON_KNOB, (by["gripper1"], by["knob2"]), theta_knob),
            Action(PUSH_KETTLE, (by["gripper1"], by["kettle1"],
                                 by["burner2"]), theta_push),
        ]
        for action in actions:
            states.append(env.step(action))
            assert not env.last_action_failed
        goal = frozenset({P_KETTLE_BOILING((by["kettle1"], by["burner2"],
                                            by["knob2"]))})
        assert env.goal_reached(goal)
        demos.append(Demonstration(objects, tuple(states), tuple(actions),
                                   goal, name=f"kitchen-{seed}-{d:03d}"))
    return demos


def generate_test_tasks(n: int, seed: int) -> Tuple[List[Task],
                                                    List[Environment]]:
    """Held-out variant: the kettle starts on the front-right burner and
    must end up boiling on the back-right burner."""
    tasks: List[Task] = []
    envs: List[Environment] = []
    for i in range(n):
        env = KitchenEnv(BURNER_XY["burner3"],
                         instance=f"test-{seed}-{i:02d}")
        by = {o.name: o for o in env.objects}
        goal = frozenset({P_KETTLE_BOILING((by["kettle1"], by["burner4"],
                                            by["knob4"]))})
        tasks.append(Task(env.objects, env.state, goal,
                          name=f"kitchen-test-{seed}-{i:02d}"))
        envs.append(env)
    return tasks, envs


def spawn_env(state: State, objects: Sequence[ObjectRef]) -> KitchenEnv:
    token = state.images[-1]
    parts = urlparse(token).path.strip("/").split("/")
    query = urlparse(token).query
    on = set(filter(None, query.partition("=")[2].split(",")))
    by = {o.name: o for o in objects}
    kettle = by["kettle1"]
    gripper = by["gripper1"]
    return KitchenEnv(
        (state.get(kettle, "x"), state.get(kettle, "y")),
        knobs_on=frozenset(on),
        gripper=(state.get(gripper, "x"), state.get(gripper, "y"),
                 state.get(gripper, "z")),
        instance=parts[1], t=int(parts[2].lstrip("t")))


KITCHEN = register_domain(Domain(
    name="kitchen",
    types=TYPES,
    skills=SKILLS,
    init_predicates=[P_KETTLE_BOILING, P_LINKED],
    goal_predicates=[P_KETTLE_BOILING],
    make_labeler=KitchenGroundTruthLabeler,
    generate_demos=generate_demos,
    generate_test_tasks=generate_test_tasks,
    spawn_env=spawn_env,
    mock_propose=None,
    defaults={"j_thresh": 100.0, "h_pre_frac": 0.8, "h_data_frac": 0.05,
              "n_demo": 3},
    use_mock_proposals=False,
))
