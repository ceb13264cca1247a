"""Thinging Machine models, a token-flow simulator and an Event-B-lite interpreter."""

from .core import Model, StageKind, adjacency_legal, validate_static
from .errors import TmkitError
from .lang import parse, parse_file, serialize

__all__ = [
    "Model",
    "StageKind",
    "TmkitError",
    "adjacency_legal",
    "parse",
    "parse_file",
    "serialize",
    "validate_static",
]
__version__ = "0.1.0"
