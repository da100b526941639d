"""Grid-world burger domain: three task distributions (bigger_burger,
more_stacks, combo_burger), a ground-truth labeler, scripted expert
demonstrations, test-task generators, and the mock proposer."""

from __future__ import annotations

import hashlib
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple
from urllib.parse import parse_qs, urlparse

import numpy as np

from ..labeling import Label, LabelContext, Labeler, UnsupportedPredicateKind
from ..structs import (KIND_PROVIDED, Action, Demonstration, GroundAtom,
                       ObjectRef, ObjectType, Predicate, Skill, State, Task)
from .base import Domain, Environment, register_domain

GRID = 6
HELD_Z = -1.0

# Type hierarchy: object > {item > {patty, lettuce, bottom_bun, top_bun},
# grill, cutting_board, robot}. Every type has row/col/z; the robot also
# has fingers (0 open, 1 holding) and dir (facing).
BASE_FEATURES = ("row", "col", "z")
T_OBJECT = ObjectType("object", BASE_FEATURES)
T_ITEM = ObjectType("item", BASE_FEATURES, parent=T_OBJECT)
T_PATTY = ObjectType("patty", BASE_FEATURES, parent=T_ITEM)
T_LETTUCE = ObjectType("lettuce", BASE_FEATURES, parent=T_ITEM)
T_BOTTOM_BUN = ObjectType("bottom_bun", BASE_FEATURES, parent=T_ITEM)
T_TOP_BUN = ObjectType("top_bun", BASE_FEATURES, parent=T_ITEM)
T_GRILL = ObjectType("grill", BASE_FEATURES, parent=T_OBJECT)
T_CUTTING_BOARD = ObjectType("cutting_board", BASE_FEATURES, parent=T_OBJECT)
T_ROBOT = ObjectType("robot", BASE_FEATURES + ("fingers", "dir"),
                     parent=T_OBJECT)

TYPES = {t.name: t for t in (T_OBJECT, T_ITEM, T_PATTY, T_LETTUCE,
                             T_BOTTOM_BUN, T_TOP_BUN, T_GRILL,
                             T_CUTTING_BOARD, T_ROBOT)}

PICK = Skill("Pick", (T_ROBOT, T_ITEM))
PLACE = Skill("Place", (T_ROBOT, T_ITEM, T_OBJECT))
COOK = Skill("Cook", (T_ROBOT, T_PATTY, T_GRILL))
CHOP = Skill("Chop", (T_ROBOT, T_LETTUCE, T_CUTTING_BOARD))
SKILLS = {s.name: s for s in (PICK, PLACE, COOK, CHOP)}

# Provided predicates; argument order for the *Prepped predicates follows
# the learned-model listings: (surface below, item above).
P_ON = Predicate("On", (T_OBJECT, T_OBJECT), kind=KIND_PROVIDED)
P_ON_GROUND = Predicate("OnGround", (T_OBJECT,), kind=KIND_PROVIDED)
P_CLEAR = Predicate("Clear", (T_OBJECT,), kind=KIND_PROVIDED)
P_HOLDING = Predicate("Holding", (T_ROBOT, T_ITEM), kind=KIND_PROVIDED)
P_SAP_BB_PATTY = Predicate("SomewhereAboveAndPrepped",
                           (T_BOTTOM_BUN, T_PATTY), kind=KIND_PROVIDED)
P_SAP_BB_LETTUCE = Predicate("SomewhereAboveAndPrepped",
                             (T_BOTTOM_BUN, T_LETTUCE), kind=KIND_PROVIDED)
P_SAP_PATTY_LETTUCE = Predicate("SomewhereAboveAndPrepped",
                                (T_PATTY, T_LETTUCE), kind=KIND_PROVIDED)
P_RAP_CB_PATTY = Predicate("RightAboveAndPrepped",
                           (T_CUTTING_BOARD, T_PATTY), kind=KIND_PROVIDED)
P_RAP_GRILL_PATTY = Predicate("RightAboveAndPrepped",
                              (T_GRILL, T_PATTY), kind=KIND_PROVIDED)
P_RAP_PATTY_PATTY = Predicate("RightAboveAndPrepped",
                              (T_PATTY, T_PATTY), kind=KIND_PROVIDED)


def _token(dist: str, instance: str, t: int, cooked: Set[str],
           chopped: Set[str]) -> str:
    return (f"sim://burger/{dist}/{instance}/t{t:03d}"
            f"?cooked={','.join(sorted(cooked))}"
            f"&chopped={','.join(sorted(chopped))}")


def _parse_token(token: str) -> Tuple[Set[str], Set[str]]:
    query = parse_qs(urlparse(token).query, keep_blank_values=True)
    cooked = set(filter(None, query.get("cooked", [""])[0].split(",")))
    chopped = set(filter(None, query.get("chopped", [""])[0].split(",")))
    return cooked, chopped


class BurgerEnv(Environment):
    """Deterministic grid simulator. Infeasible skill applications leave the
    state unchanged and set a failed flag. Robot movement always succeeds
    and is folded into the skills."""

    def __init__(self, objects: Sequence[ObjectRef],
                 positions: Dict[str, Tuple[int, int, int]],
                 robot_pos: Tuple[int, int], dist: str = "burger",
                 instance: str = "0", fingers: int = 0,
                 held: Optional[str] = None,
                 cooked: Optional[Set[str]] = None,
                 chopped: Optional[Set[str]] = None,
                 t: int = 0, dir_: int = 0) -> None:
        self.objects = tuple(sorted(objects))
        self._by_name = {o.name: o for o in self.objects}
        self._pos = dict(positions)  # name -> (row, col, z); held z = -1
        self._robot = next(o for o in self.objects if o.type.is_a(T_ROBOT))
        self._robot_pos = robot_pos
        self._fingers = fingers
        self._held = held
        self._dir = dir_
        self._cooked: Set[str] = set(cooked or ())
        self._chopped: Set[str] = set(chopped or ())
        self._t = t
        self._dist = dist
        self._instance = instance
        self._failed = False
        if held is not None:
            self._pos[held] = (robot_pos[0], robot_pos[1], int(HELD_Z))

    @property
    def last_action_failed(self) -> bool:
        return self._failed

    @property
    def state(self) -> State:
        data: Dict[ObjectRef, np.ndarray] = {}
        for obj in self.objects:
            if obj is self._robot:
                data[obj] = np.array(
                    [self._robot_pos[0], self._robot_pos[1], 0.0,
                     float(self._fingers), float(self._dir)])
            else:
                r, c, z = self._pos[obj.name]
                data[obj] = np.array([float(r), float(c), float(z)])
        token = _token(self._dist, self._instance, self._t, self._cooked,
                       self._chopped)
        return State(data, images=(token,), timestep=self._t)

    def _occupied(self, row: int, col: int, z: int) -> Optional[str]:
        for name, (r, c, zz) in self._pos.items():
            if (r, c, zz) == (row, col, z):
                return name
        return None

    def _clear(self, name: str) -> bool:
        r, c, z = self._pos[name]
        if z < 0:
            return False
        return self._occupied(r, c, z + 1) is None

    def _move_adjacent(self, row: int, col: int) -> None:
        for dr, dc, d in ((0, -1, 1), (0, 1, 3), (-1, 0, 2), (1, 0, 0)):
            rr, cc = row + dr, col + dc
            if 0 <= rr < GRID and 0 <= cc < GRID:
                self._robot_pos = (rr, cc)
                self._dir = d
                break
        if self._held is not None:
            self._pos[self._held] = (self._robot_pos[0], self._robot_pos[1],
                                     int(HELD_Z))

    def step(self, action: Action) -> State:
        if action.skill.name not in SKILLS:
            raise KeyError(f"unknown skill {action.skill.name}")
        self._failed = False
        name = action.skill.name
        args = [o.name for o in action.objects]
        if name == "Pick":
            _, item = args
            if (self._fingers == 0 and self._held is None
                    and self._pos[item][2] >= 0 and self._clear(item)):
                r, c, _ = self._pos[item]
                self._held = item
                self._fingers = 1
                self._move_adjacent(r, c)
                self._pos[item] = (self._robot_pos[0], self._robot_pos[1],
                                   int(HELD_Z))
            else:
                self._failed = True
        elif name == "Place":
            _, item, target = args
            if (self._fingers == 1 and self._held == item and item != target
                    and self._pos[target][2] >= 0 and self._clear(target)):
                r, c, z = self._pos[target]
                self._pos[item] = (r, c, z + 1)
                self._held = None
                self._fingers = 0
                self._move_adjacent(r, c)
            else:
                self._failed = True
        elif name == "Cook":
            _, patty, grill = args
            pr, pc, pz = self._pos[patty]
            gr, gc, gz = self._pos[grill]
            if (pr, pc) == (gr, gc) and pz == gz + 1:
                self._cooked.add(patty)
                self._move_adjacent(gr, gc)
            else:
                self._failed = True
        elif name == "Chop":
            _, lettuce, board = args
            lr, lc, lz = self._pos[lettuce]
            br, bc, bz = self._pos[board]
            if (lr, lc) == (br, bc) and lz == bz + 1:
                self._chopped.add(lettuce)
                self._move_adjacent(br, bc)
            else:
                self._failed = True
        self._t += 1
        return self.state

    def goal_reached(self, goal: FrozenSet[GroundAtom]) -> bool:
        labeler = BurgerGroundTruthLabeler()
        labels = labeler.label_batch(self.state, sorted(goal),
                                     LabelContext())
        return all(labels[a] is Label.TRUE for a in goal)


def _is_item(obj: ObjectRef) -> bool:
    return obj.type.is_a(T_ITEM)


def _prepped(obj: ObjectRef, cooked: Set[str], chopped: Set[str]) -> bool:
    if obj.type.is_a(T_PATTY):
        return obj.name in cooked
    if obj.type.is_a(T_LETTUCE):
        return obj.name in chopped
    return False


class BurgerGroundTruthLabeler(Labeler):
    """Evaluates provided predicates from the object-centric state and the
    mock-proposed visual families from the state plus the rendered scene
    token (cooked/chopped live in the image reference, as they would for a
    real VLM)."""

    identity = "burger-ground-truth"

    # visual family -> (base concept, negated)
    FAMILIES: Dict[str, Tuple[str, bool]] = {}
    for _syn in ("cooked", "grilled", "seared", "browned", "prepared"):
        FAMILIES[_syn] = ("cooked", False)
    for _ant in ("raw", "uncooked", "unprepared", "uncook"):
        FAMILIES[_ant] = ("cooked", True)
    for _syn in ("chopped", "sliced", "diced", "cut"):
        FAMILIES[_syn] = ("chopped", False)
    for _ant in ("whole", "intact", "uncut"):
        FAMILIES[_ant] = ("chopped", True)
    for _syn in ("holding", "grasping", "carrying", "gripping"):
        FAMILIES[_syn] = ("holding", False)
    for _ant in ("released", "detached", "free_of"):
        FAMILIES[_ant] = ("holding", True)
    for _syn in ("empty_hands", "hand_free", "unoccupied"):
        FAMILIES[_syn] = ("empty_hands", False)
    for _ant in ("busy_hands", "full_hands", "occupied"):
        FAMILIES[_ant] = ("empty_hands", True)
    for _syn in ("on", "atop", "stacked_on"):
        FAMILIES[_syn] = ("on", False)
    for _ant in ("off", "under", "beneath"):
        FAMILIES[_ant] = ("on", True)
    for _junk in ("near", "close_to", "adjacent_to", "far_from"):
        FAMILIES[_junk] = ("junk", False)
    del _syn, _ant, _junk

    def label_batch(self, state: State, atoms: Sequence[GroundAtom],
                    ctx: LabelContext) -> Dict[GroundAtom, Label]:
        cooked, chopped = (_parse_token(state.images[-1]) if state.images
                           else (set(), set()))
        out: Dict[GroundAtom, Label] = {}
        for atom in atoms:
            if atom.predicate.kind == KIND_PROVIDED:
                value = self._provided(atom, state, cooked, chopped)
            else:
                value = self._visual(atom, state, cooked, chopped)
            out[atom] = value
        return out

    def _provided(self, atom: GroundAtom, state: State, cooked: Set[str],
                  chopped: Set[str]) -> Label:
        name = atom.predicate.name
        objs = atom.objects

        def pos(o: ObjectRef) -> Tuple[float, float, float]:
            return (state.get(o, "row"), state.get(o, "col"),
                    state.get(o, "z"))

        if name == "On":
            a, b = objs
            if a.type.is_a(T_ROBOT) or b.type.is_a(T_ROBOT):
                return Label.FALSE
            (ar, ac, az), (br, bc, bz) = pos(a), pos(b)
            ok = (az >= 0 and bz >= 0 and (ar, ac) == (br, bc)
                  and az == bz + 1)
            return Label.TRUE if ok else Label.FALSE
        if name == "OnGround":
            o = objs[0]
            ok = _is_item(o) and pos(o)[2] == 0
            return Label.TRUE if ok else Label.FALSE
        if name == "Clear":
            o = objs[0]
            if o.type.is_a(T_ROBOT):
                return Label.TRUE
            orr, occ, oz = pos(o)
            if oz < 0:
                return Label.FALSE
            for other in state.data:
                if other is o or other.type.is_a(T_ROBOT):
                    continue
                if pos(other) == (orr, occ, oz + 1):
                    return Label.FALSE
            return Label.TRUE
        if name == "Holding":
            r, item = objs
            ok = state.get(r, "fingers") == 1 and pos(item)[2] < 0
            return Label.TRUE if ok else Label.FALSE
        if name == "SomewhereAboveAndPrepped":
            below, above = objs
            (br, bc, bz), (ar, ac, az) = pos(below), pos(above)
            ok = (az >= 0 and bz >= 0 and (ar, ac) == (br, bc) and az > bz
                  and _prepped(above, cooked, chopped))
            return Label.TRUE if ok else Label.FALSE
        if name == "RightAboveAndPrepped":
            below, above = objs
            (br, bc, bz), (ar, ac, az) = pos(below), pos(above)
            ok = (az >= 0 and bz >= 0 and (ar, ac) == (br, bc)
                  and az == bz + 1 and _prepped(above, cooked, chopped))
            return Label.TRUE if ok else Label.FALSE
        raise UnsupportedPredicateKind(f"no classifier for {name}")

    def _visual(self, atom: GroundAtom, state: State, cooked: Set[str],
                chopped: Set[str]) -> Label:
        base = atom.predicate.name.rstrip("0123456789")
        if base not in self.FAMILIES:
            raise UnsupportedPredicateKind(
                f"no visual semantics for {atom.predicate.name}")
        concept, negated = self.FAMILIES[base]
        objs = atom.objects
        if concept == "junk":
            payload = f"{state.digest()}|{atom}"
            h = hashlib.sha256(payload.encode()).digest()
            value = (int.from_bytes(h[:8], "big") / float(1 << 64)) < 0.3
        elif concept == "cooked":
            value = objs[0].name in cooked
        elif concept == "chopped":
            value = objs[0].name in chopped
        elif concept == "holding":
            if len(objs) != 2 or not objs[0].type.is_a(T_ROBOT):
                value = False
            else:
                value = (state.get(objs[0], "fingers") == 1
                         and state.get(objs[1], "z") < 0)
        elif concept == "empty_hands":
            value = (objs[0].type.is_a(T_ROBOT)
                     and state.get(objs[0], "fingers") == 0)
        elif concept == "on":
            if len(objs) != 2 or any(o.type.is_a(T_ROBOT) for o in objs):
                value = False
            else:
                a, b = objs
                value = (state.get(a, "z") >= 0 and state.get(b, "z") >= 0
                         and state.get(a, "row") == state.get(b, "row")
                         and state.get(a, "col") == state.get(b, "col")
                         and state.get(a, "z") == state.get(b, "z") + 1)
        else:
            raise UnsupportedPredicateKind(concept)
        if negated and concept != "junk":
            value = not value
        return Label.TRUE if value else Label.FALSE


def _obj(name: str, type_: ObjectType) -> ObjectRef:
    article = "the" if name in ("grill", "cutting_board", "robot") else "a"
    return ObjectRef(name, type_,
                     f"{article} {type_.name.replace('_', ' ')} named {name}")


def _scatter(rng: np.random.Generator, names: Sequence[str],
             taken: Set[Tuple[int, int]]) -> Dict[str, Tuple[int, int, int]]:
    cells = [(r, c) for r in range(GRID) for c in range(GRID)
             if (r, c) not in taken]
    idx = rng.choice(len(cells), size=len(names), replace=False)
    out = {}
    for name, i in zip(names, idx):
        out[name] = (cells[int(i)][0], cells[int(i)][1], 0)
        taken.add(cells[int(i)])
    return out


def _spawn(dist: str, instance: str, rng: np.random.Generator,
           item_names: Dict[str, ObjectType], stations: Sequence[str],
           held: Optional[str] = None) -> Tuple[BurgerEnv,
                                                Tuple[ObjectRef, ...]]:
    objects = [_obj("robot", T_ROBOT)]
    objects += [_obj(n, t) for n, t in item_names.items()]
    station_types = {"grill": T_GRILL, "cutting_board": T_CUTTING_BOARD}
    objects += [_obj(s, station_types[s]) for s in stations]
    taken: Set[Tuple[int, int]] = set()
    ground = [n for n in item_names if n != held] + list(stations)
    positions = _scatter(rng, ground, taken)
    robot_cell = _scatter(rng, ["__robot__"], taken)["__robot__"][:2]
    env = BurgerEnv(objects, positions, robot_cell, dist=dist,
                    instance=instance, fingers=1 if held else 0, held=held)
    return env, tuple(sorted(objects))


def _run_script(env: BurgerEnv, script: Sequence[Tuple[Skill, Tuple[str, ...]]]
                ) -> Tuple[List[State], List[Action]]:
    by_name = {o.name: o for o in env.objects}
    states = [env.state]
    actions = []
    for skill, arg_names in script:
        action = Action(skill, tuple(by_name[n] for n in arg_names))
        states.append(env.step(action))
        assert not env.last_action_failed, f"expert action failed: {action}"
        actions.append(action)
    return states, actions


def _burger_script(p: str, bb: str, tb: str) -> List[Tuple[Skill, Tuple[str, ...]]]:
    return [
        (PICK, ("robot", p)),
        (PLACE, ("robot", p, "grill")),
        (COOK, ("robot", p, "grill")),
        (PICK, ("robot", p)),
        (PLACE, ("robot", p, bb)),
        (PICK, ("robot", tb)),
        (PLACE, ("robot", tb, p)),
    ]


def _lettuce_burger_script(l: str, bb: str, tb: str) -> List[Tuple[Skill, Tuple[str, ...]]]:
    return [
        (PICK, ("robot", l)),
        (PLACE, ("robot", l, "cutting_board")),
        (CHOP, ("robot", l, "cutting_board")),
        (PICK, ("robot", l)),
        (PLACE, ("robot", l, bb)),
        (PICK, ("robot", tb)),
        (PLACE, ("robot", tb, l)),
    ]


def _goal(*atoms: GroundAtom) -> FrozenSet[GroundAtom]:
    return frozenset(atoms)


def _more_stacks_demos(n: int, seed: int) -> List[Demonstration]:
    """1 two-burger demo plus single-burger demos (scaled from the 1 + 11
    composition)."""
    rng = np.random.default_rng(seed)
    demos = []
    n_double = max(1, round(n / 12))
    for d in range(n):
        instance = f"{seed}-{d:03d}"
        if d < n_double:
            items = {"patty1": T_PATTY, "patty2": T_PATTY,
                     "bottom_bun1": T_BOTTOM_BUN, "bottom_bun2": T_BOTTOM_BUN,
                     "top_bun1": T_TOP_BUN, "top_bun2": T_TOP_BUN}
            env, objects = _spawn("more_stacks", instance, rng, items,
                                  ["grill"])
            script = (_burger_script("patty1", "bottom_bun1", "top_bun1")
                      + _burger_script("patty2", "bottom_bun2", "top_bun2"))
            by = {o.name: o for o in objects}
            goal = _goal(
                P_SAP_BB_PATTY((by["bottom_bun1"], by["patty1"])),
                P_ON((by["top_bun1"], by["patty1"])),
                P_SAP_BB_PATTY((by["bottom_bun2"], by["patty2"])),
                P_ON((by["top_bun2"], by["patty2"])))
        else:
            items = {"patty1": T_PATTY, "bottom_bun1": T_BOTTOM_BUN,
                     "top_bun1": T_TOP_BUN}
            env, objects = _spawn("more_stacks", instance, rng, items,
                                  ["grill"])
            script = _burger_script("patty1", "bottom_bun1", "top_bun1")
            by = {o.name: o for o in objects}
            goal = _goal(P_SAP_BB_PATTY((by["bottom_bun1"], by["patty1"])),
                         P_ON((by["top_bun1"], by["patty1"])))
        states, actions = _run_script(env, script)
        assert env.goal_reached(goal)
        demos.append(Demonstration(objects, tuple(states), tuple(actions),
                                   goal, name=f"more_stacks-{instance}"))
    return demos


def _more_stacks_tests(n: int, seed: int) -> Tuple[List[Task],
                                                   List[Environment]]:
    """Half the tasks: 5 open-face burgers. Other half: 6 open-face burgers
    with the robot starting out holding a raw patty."""
    rng = np.random.default_rng(seed + 1_000_003)
    tasks: List[Task] = []
    envs: List[Environment] = []
    for i in range(n):
        start_holding = i >= (n + 1) // 2
        burgers = 6 if start_holding else 5
        items: Dict[str, ObjectType] = {}
        for b in range(1, burgers + 1):
            items[f"patty{b}"] = T_PATTY
            items[f"bottom_bun{b}"] = T_BOTTOM_BUN
        env, objects = _spawn("more_stacks", f"test-{seed}-{i:02d}", rng,
                              items, ["grill"],
                              held="patty1" if start_holding else None)
        by = {o.name: o for o in objects}
        goal = frozenset(
            P_SAP_BB_PATTY((by[f"bottom_bun{b}"], by[f"patty{b}"]))
            for b in range(1, burgers + 1))
        tasks.append(Task(objects, env.state, goal,
                          name=f"more_stacks-test-{seed}-{i:02d}"))
        envs.append(env)
    return tasks, envs


def _bigger_demos(n: int, seed: int) -> List[Demonstration]:
    """Single burgers plus two-patty stacks on the cutting board and on the
    grill (4 + 4 + 4 composition)."""
    rng = np.random.default_rng(seed)
    demos = []
    pattern = ["single", "stack_cb", "stack_grill"]
    for d in range(n):
        kind = pattern[d * 3 // n] if n % 3 == 0 else pattern[d % 3]
        instance = f"{seed}-{d:03d}"
        if kind == "single":
            items = {"patty1": T_PATTY, "bottom_bun1": T_BOTTOM_BUN,
                     "top_bun1": T_TOP_BUN}
            env, objects = _spawn("bigger_burger", instance, rng, items,
                                  ["grill", "cutting_board"])
            script = _burger_script("patty1", "bottom_bun1", "top_bun1")
            by = {o.name: o for o in objects}
            goal = _goal(P_SAP_BB_PATTY((by["bottom_bun1"], by["patty1"])),
                         P_ON((by["top_bun1"], by["patty1"])))
        else:
            items = {"patty1": T_PATTY, "patty2": T_PATTY}
            env, objects = _spawn("bigger_burger", instance, rng, items,
                                  ["grill", "cutting_board"])
            by = {o.name: o for o in objects}
            if kind == "stack_cb":
                script = [
                    (PICK, ("robot", "patty1")),
                    (PLACE, ("robot", "patty1", "grill")),
                    (COOK, ("robot", "patty1", "grill")),
                    (PICK, ("robot", "patty1")),
                    (PLACE, ("robot", "patty1", "cutting_board")),
                    (PICK, ("robot", "patty2")),
                    (PLACE, ("robot", "patty2", "grill")),
                    (COOK, ("robot", "patty2", "grill")),
                    (PICK, ("robot", "patty2")),
                    (PLACE, ("robot", "patty2", "patty1")),
                ]
                goal = _goal(
                    P_RAP_CB_PATTY((by["cutting_board"], by["patty1"])),
                    P_RAP_PATTY_PATTY((by["patty1"], by["patty2"])))
            else:
                script = [
                    (PICK, ("robot", "patty1")),
                    (PLACE, ("robot", "patty1", "grill")),
                    (COOK, ("robot", "patty1", "grill")),
                    (PICK, ("robot", "patty1")),
                    (PLACE, ("robot", "patty1", "cutting_board")),
                    (PICK, ("robot", "patty2")),
                    (PLACE, ("robot", "patty2", "grill")),
                    (COOK, ("robot", "patty2", "grill")),
                    (PICK, ("robot", "patty1")),
                    (PLACE, ("robot", "patty1", "patty2")),
                ]
                goal = _goal(
                    P_RAP_GRILL_PATTY((by["grill"], by["patty2"])),
                    P_RAP_PATTY_PATTY((by["patty2"], by["patty1"])))
        states, actions = _run_script(env, script)
        assert env.goal_reached(goal)
        demos.append(Demonstration(objects, tuple(states), tuple(actions),
                                   goal, name=f"bigger_burger-{instance}"))
    return demos


def _bigger_tests(n: int, seed: int) -> Tuple[List[Task], List[Environment]]:
    """Half: one burger with 2 cooked patties. Other half: the same plus an
    open-face burger, starting out holding a raw patty."""
    rng = np.random.default_rng(seed + 1_000_003)
    tasks: List[Task] = []
    envs: List[Environment] = []
    for i in range(n):
        extra = i >= (n + 1) // 2
        items = {"patty1": T_PATTY, "patty2": T_PATTY,
                 "bottom_bun1": T_BOTTOM_BUN, "top_bun1": T_TOP_BUN}
        if extra:
            items["patty3"] = T_PATTY
            items["bottom_bun2"] = T_BOTTOM_BUN
        env, objects = _spawn("bigger_burger", f"test-{seed}-{i:02d}", rng,
                              items, ["grill", "cutting_board"],
                              held="patty3" if extra else None)
        by = {o.name: o for o in objects}
        atoms = [P_SAP_BB_PATTY((by["bottom_bun1"], by["patty1"])),
                 P_SAP_BB_PATTY((by["bottom_bun1"], by["patty2"])),
                 P_RAP_PATTY_PATTY((by["patty1"], by["patty2"])),
                 P_ON((by["top_bun1"], by["patty2"]))]
        if extra:
            atoms.append(P_SAP_BB_PATTY((by["bottom_bun2"], by["patty3"])))
        tasks.append(Task(objects, env.state, frozenset(atoms),
                          name=f"bigger_burger-test-{seed}-{i:02d}"))
        envs.append(env)
    return tasks, envs


def _combo_demos(n: int, seed: int) -> List[Demonstration]:
    """3 patty burgers, 3 lettuce burgers, 3 lettuce-on-patty at the cutting
    board, 3 lettuce-on-patty at the grill."""
    rng = np.random.default_rng(seed)
    demos = []
    for d in range(n):
        kind = ("patty_burger", "lettuce_burger", "lp_board",
                "lp_grill")[d % 4 if n != 12 else d // 3]
        instance = f"{seed}-{d:03d}"
        if kind == "patty_burger":
            items = {"patty1": T_PATTY, "bottom_bun1": T_BOTTOM_BUN,
                     "top_bun1": T_TOP_BUN}
            env, objects = _spawn("combo_burger", instance, rng, items,
                                  ["grill", "cutting_board"])
            script = _burger_script("patty1", "bottom_bun1", "top_bun1")
            by = {o.name: o for o in objects}
            goal = _goal(P_SAP_BB_PATTY((by["bottom_bun1"], by["patty1"])),
                         P_ON((by["top_bun1"], by["patty1"])))
        elif kind == "lettuce_burger":
            items = {"lettuce1": T_LETTUCE, "bottom_bun1": T_BOTTOM_BUN,
                     "top_bun1": T_TOP_BUN}
            env, objects = _spawn("combo_burger", instance, rng, items,
                                  ["grill", "cutting_board"])
            script = _lettuce_burger_script("lettuce1", "bottom_bun1",
                                            "top_bun1")
            by = {o.name: o for o in objects}
            goal = _goal(
                P_SAP_BB_LETTUCE((by["bottom_bun1"], by["lettuce1"])),
                P_ON((by["top_bun1"], by["lettuce1"])))
        elif kind == "lp_board":
            # Chop first, park the lettuce on the grill, raw patty takes the
            # cutting board, then lettuce goes on the patty.
            items = {"patty1": T_PATTY, "lettuce1": T_LETTUCE}
            env, objects = _spawn("combo_burger", instance, rng, items,
                                  ["grill", "cutting_board"])
            script = [
                (PICK, ("robot", "lettuce1")),
                (PLACE, ("robot", "lettuce1", "cutting_board")),
                (CHOP, ("robot", "lettuce1", "cutting_board")),
                (PICK, ("robot", "lettuce1")),
                (PLACE, ("robot", "lettuce1", "grill")),
                (PICK, ("robot", "patty1")),
                (PLACE, ("robot", "patty1", "cutting_board")),
                (PICK, ("robot", "lettuce1")),
                (PLACE, ("robot", "lettuce1", "patty1")),
            ]
            by = {o.name: o for o in objects}
            goal = _goal(P_SAP_PATTY_LETTUCE((by["patty1"], by["lettuce1"])))
        else:
            items = {"patty1": T_PATTY, "lettuce1": T_LETTUCE}
            env, objects = _spawn("combo_burger", instance, rng, items,
                                  ["grill", "cutting_board"])
            script = [
                (PICK, ("robot", "patty1")),
                (PLACE, ("robot", "patty1", "grill")),
                (PICK, ("robot", "lettuce1")),
                (PLACE, ("robot", "lettuce1", "cutting_board")),
                (CHOP, ("robot", "lettuce1", "cutting_board")),
                (PICK, ("robot", "lettuce1")),
                (PLACE, ("robot", "lettuce1", "patty1")),
            ]
            by = {o.name: o for o in objects}
            goal = _goal(P_SAP_PATTY_LETTUCE((by["patty1"], by["lettuce1"])))
        states, actions = _run_script(env, script)
        assert env.goal_reached(goal)
        demos.append(Demonstration(objects, tuple(states), tuple(actions),
                                   goal, name=f"combo_burger-{instance}"))
    return demos


def _combo_tests(n: int, seed: int) -> Tuple[List[Task], List[Environment]]:
    rng = np.random.default_rng(seed + 1_000_003)
    tasks: List[Task] = []
    envs: List[Environment] = []
    for i in range(n):
        extra = i >= (n + 1) // 2
        items: Dict[str, ObjectType] = {}
        for b in (1, 2):
            items[f"patty{b}"] = T_PATTY
            items[f"lettuce{b}"] = T_LETTUCE
            items[f"bottom_bun{b}"] = T_BOTTOM_BUN
            items[f"top_bun{b}"] = T_TOP_BUN
        if extra:
            items["patty3"] = T_PATTY
            items["bottom_bun3"] = T_BOTTOM_BUN
            items["top_bun3"] = T_TOP_BUN
        env, objects = _spawn("combo_burger", f"test-{seed}-{i:02d}", rng,
                              items, ["grill", "cutting_board"],
                              held="patty3" if extra else None)
        by = {o.name: o for o in objects}
        atoms = []
        for b in (1, 2):
            atoms += [
                P_SAP_BB_PATTY((by[f"bottom_bun{b}"], by[f"patty{b}"])),
                P_SAP_PATTY_LETTUCE((by[f"patty{b}"], by[f"lettuce{b}"])),
                P_ON((by[f"top_bun{b}"], by[f"lettuce{b}"])),
            ]
        if extra:
            atoms += [P_SAP_BB_PATTY((by["bottom_bun3"], by["patty3"])),
                      P_ON((by["top_bun3"], by["patty3"]))]
        tasks.append(Task(objects, env.state, frozenset(atoms),
                          name=f"combo_burger-test-{seed}-{i:02d}"))
        envs.append(env)
    return tasks, envs


# Synonym/antonym lexicon used by the mock proposer; the ground-truth
# labeler understands every name here (see FAMILIES above).
_LEXICON = {
    "cooked": (("grilled", "seared", "browned"),
               ("raw", "uncooked", "unprepared")),
    "chopped": (("sliced", "diced", "cut"), ("whole", "intact", "uncut")),
    "holding": (("grasping", "carrying", "gripping"),
                ("released", "detached", "free_of")),
    "empty_hands": (("hand_free", "unoccupied"),
                    ("busy_hands", "full_hands")),
    "on": (("atop", "stacked_on"), ("off", "under")),
}


def mock_propose(demo: Demonstration, k_synonyms: int = 2,
                 k_antonyms: int = 2, seed: int = 0, j_junk: int = 0) -> str:
    """Emit an Appendix-E-shaped proposal response: ground-truth concept
    atoms per action, plus synonym/antonym distractors and optional junk."""
    rng = np.random.default_rng(seed)
    by = {o.name: o for o in demo.objects}
    robot = by["robot"]

    def syn_ant(concept: str, args: str) -> List[str]:
        syns, ants = _LEXICON[concept]
        lines = []
        if k_synonyms:
            lines.append("   - Synonyms: " + ", ".join(
                f"{s}({args})" for s in syns[:k_synonyms]))
        if k_antonyms:
            lines.append("   - Antonyms: " + ", ".join(
                f"{a}({args})" for a in ants[:k_antonyms]))
        return lines

    sections = ["Predicates for Each Action", ""]
    for i, action in enumerate(demo.actions):
        skill = action.skill.name
        args = [o.name for o in action.objects]
        sections.append(f"{i + 1}. {action}")
        if skill == "Pick":
            item = args[1]
            support = _support_of(demo.states[i], by[item])
            before = [f"empty_hands({robot.name})"]
            if support is not None:
                before.append(f"on({item}, {support})")
            sections.append("   - Before: " + ", ".join(before))
            sections.append(f"   - After: holding({robot.name}, {item})")
            sections += syn_ant("holding", f"{robot.name}, {item}")
            sections += syn_ant("empty_hands", robot.name)
        elif skill == "Place":
            item, target = args[1], args[2]
            sections.append(f"   - Before: holding({robot.name}, {item})")
            sections.append(f"   - After: on({item}, {target}), "
                            f"empty_hands({robot.name})")
            sections += syn_ant("on", f"{item}, {target}")
        elif skill == "Cook":
            patty = args[1]
            sections.append(f"   - Before: raw({patty})")
            sections.append(f"   - After: cooked({patty})")
            sections += syn_ant("cooked", patty)
        elif skill == "Chop":
            lettuce = args[1]
            sections.append(f"   - Before: whole({lettuce})")
            sections.append(f"   - After: chopped({lettuce})")
            sections += syn_ant("chopped", lettuce)
        sections.append("")
    if j_junk > 0:
        sections.append("Other Important Predicates")
        sections.append("")
        names = sorted(o.name for o in demo.objects if o is not robot)
        for j in range(j_junk):
            if j % 3 == 2:
                sections.append(f"- near(apple{j}, room{j})")
            else:
                target = names[int(rng.integers(len(names)))]
                sections.append(f"- near({robot.name}, {target})")
        sections.append("")
    return "\n".join(sections)


def _support_of(state: State, obj: ObjectRef) -> Optional[str]:
    r, c, z = (state.get(obj, "row"), state.get(obj, "col"),
               state.get(obj, "z"))
    if z <= 0:
        return None
    for other in state.data:
        if other is obj or other.type.is_a(T_ROBOT):
            continue
        if (state.get(other, "row"), state.get(other, "col"),
                state.get(other, "z")) == (r, c, z - 1):
            return other.name
    return None


def spawn_env(state: State, objects: Sequence[ObjectRef]) -> BurgerEnv:
    """Rebuild a deterministic environment instance from a recorded state."""
    token = state.images[-1]
    cooked, chopped = _parse_token(token)
    parts = urlparse(token).path.strip("/").split("/")
    dist, instance, t_part = parts[0], parts[1], parts[2]
    robot = next(o for o in objects if o.type.is_a(T_ROBOT))
    positions = {}
    held = None
    for obj in objects:
        if obj is robot:
            continue
        r, c, z = (int(state.get(obj, "row")), int(state.get(obj, "col")),
                   int(state.get(obj, "z")))
        positions[obj.name] = (r, c, z)
        if z < 0:
            held = obj.name
    env = BurgerEnv(objects, positions,
                    (int(state.get(robot, "row")),
                     int(state.get(robot, "col"))),
                    dist=dist, instance=instance,
                    fingers=int(state.get(robot, "fingers")), held=held,
                    cooked=cooked, chopped=chopped,
                    t=int(t_part.lstrip("t")),
                    dir_=int(state.get(robot, "dir")))
    return env


def render_ascii(state: State) -> str:
    """Debug grid dump: stacks rendered bottom-up per cell."""
    cells: Dict[Tuple[int, int], List[Tuple[float, str]]] = {}
    for obj in sorted(state.data):
        if "z" not in obj.type.feature_names:
            continue
        z = state.get(obj, "z")
        if z < 0:
            continue
        key = (int(state.get(obj, "row")), int(state.get(obj, "col")))
        cells.setdefault(key, []).append((z, obj.name))
    lines = []
    for r in range(GRID):
        row = []
        for c in range(GRID):
            stack = [n for _, n in sorted(cells.get((r, c), []))]
            row.append("|".join(n[:2] for n in stack) or ".")
        lines.append(" ".join(f"{cell:>8}" for cell in row))
    return "\n".join(lines)


def _make_domain(dist: str, init_preds: List[Predicate],
                 goal_preds: List[Predicate], demos_fn, tests_fn) -> Domain:
    return Domain(
        name=dist,
        types=TYPES,
        skills=SKILLS,
        init_predicates=init_preds,
        goal_predicates=goal_preds,
        make_labeler=BurgerGroundTruthLabeler,
        generate_demos=demos_fn,
        generate_test_tasks=tests_fn,
        spawn_env=spawn_env,
        mock_propose=mock_propose,
        defaults={"j_thresh": 2000.0, "h_pre_frac": 0.8,
                  "h_data_frac": 0.05, "n_demo": 12},
        use_mock_proposals=True,
    )


MORE_STACKS = register_domain(_make_domain(
    "more_stacks",
    [P_ON, P_ON_GROUND, P_CLEAR, P_HOLDING, P_SAP_BB_PATTY],
    [P_ON, P_SAP_BB_PATTY],
    _more_stacks_demos, _more_stacks_tests))

BIGGER_BURGER = register_domain(_make_domain(
    "bigger_burger",
    [P_ON, P_ON_GROUND, P_CLEAR, P_HOLDING, P_SAP_BB_PATTY,
     P_RAP_CB_PATTY, P_RAP_GRILL_PATTY, P_RAP_PATTY_PATTY],
    [P_ON, P_SAP_BB_PATTY, P_RAP_CB_PATTY, P_RAP_GRILL_PATTY,
     P_RAP_PATTY_PATTY],
    _bigger_demos, _bigger_tests))

COMBO_BURGER = register_domain(_make_domain(
    "combo_burger",
    [P_ON, P_ON_GROUND, P_CLEAR, P_HOLDING, P_SAP_BB_PATTY,
     P_SAP_BB_LETTUCE, P_SAP_PATTY_LETTUCE],
    [P_ON, P_SAP_BB_PATTY, P_SAP_BB_LETTUCE, P_SAP_PATTY_LETTUCE],
    _combo_demos, _combo_tests))


def reset(dist: str, seed: int) -> Tuple[Task, Environment]:
    """One test task + its environment; seed parity picks the variant."""
    tests = {"more_stacks": _more_stacks_tests,
             "bigger_burger": _bigger_tests,
             "combo_burger": _combo_tests}[dist]
    tasks, envs = tests(2, seed)
    pick = seed % 2
    return tasks[pick], envs[pick]
