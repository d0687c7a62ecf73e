"""Conflict-aware universal constructions over generalized commit-adopt.

Subpackages are imported on demand; the most used names are re-exported.
"""

from cfuc.objects import Command, SequentialSpec, get_spec
from cfuc.traces import ConflictRelation, Trace, compatible, glb, is_prefix, lub, normalize

__version__ = "0.1.0"

__all__ = [
    "Command",
    "ConflictRelation",
    "SequentialSpec",
    "Trace",
    "compatible",
    "get_spec",
    "glb",
    "is_prefix",
    "lub",
    "normalize",
]
