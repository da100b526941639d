"""Domain and environment interfaces shared by the simulators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

from ..labeling import Labeler
from ..structs import (Action, Demonstration, GroundAtom, ObjectRef,
                       ObjectType, Predicate, Skill, State, Task)


class Environment:
    """A deterministic, exclusively-owned simulator instance."""

    @property
    def state(self) -> State:
        raise NotImplementedError

    def step(self, action: Action) -> State:
        raise NotImplementedError

    @property
    def last_action_failed(self) -> bool:
        raise NotImplementedError

    def goal_reached(self, goal: FrozenSet[GroundAtom]) -> bool:
        raise NotImplementedError


@dataclass
class Domain:
    """Everything the pipeline needs to know about a simulated domain."""
    name: str
    types: Dict[str, ObjectType]
    skills: Dict[str, Skill]
    init_predicates: List[Predicate]
    goal_predicates: List[Predicate]
    make_labeler: Callable[[], Labeler]
    generate_demos: Callable[[int, int], List[Demonstration]]
    generate_test_tasks: Callable[[int, int], Tuple[List[Task],
                                                    List[Environment]]]
    spawn_env: Callable[[State, Sequence[ObjectRef]], Environment]
    mock_propose: Optional[Callable[..., str]] = None
    defaults: Dict[str, float] = field(default_factory=dict)
    use_mock_proposals: bool = True


_REGISTRY: Dict[str, Domain] = {}


def register_domain(domain: Domain) -> Domain:
    _REGISTRY[domain.name] = domain
    return domain


def get_domain(name: str) -> Domain:
    if name not in _REGISTRY:
        raise KeyError(
            f"unknown domain {name!r}; known: {sorted(_REGISTRY)}")
    return _REGISTRY[name]


def known_domains() -> List[str]:
    return sorted(_REGISTRY)
