"""Desk-scale simulation domains with ground-truth labelers, scripted
demonstrations, task generators, and a mock proposer."""

from .base import Domain, Environment, get_domain, register_domain
from . import burger, kitchen  # noqa: F401  (registration side effects)

__all__ = ["Domain", "Environment", "get_domain", "register_domain"]
