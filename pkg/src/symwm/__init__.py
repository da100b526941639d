"""symwm: symbolic world model learning and planning from demonstrations."""

__version__ = "0.1.0"
