"""Canonical JSON and DOT serialisation."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import InputError

FORMATS = ("json", "dot")


def _default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (set, frozenset)):
        return sorted(x, key=repr)
    if hasattr(x, "to_json"):
        return x.to_json()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _keys_to_str(x):
    if isinstance(x, dict):
        return {str(k) if not isinstance(k, str) else k: _keys_to_str(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_keys_to_str(v) for v in x]
    if hasattr(x, "to_json") and not isinstance(x, (str, bytes)):
        return _keys_to_str(x.to_json())
    return x


def canonical_json(obj):
    """Sorted keys, fixed separators, trailing newline: byte-stable."""
    return json.dumps(_keys_to_str(obj), sort_keys=True, separators=(",", ":"), default=_default) + "\n"


def to_dot(obj):
    if not hasattr(obj, "to_dot"):
        raise InputError(f"{type(obj).__name__} has no DOT rendering")
    return obj.to_dot()


def export(obj, fmt, path=None):
    """Serialise `obj` as json or dot; write to `path` when given and return
    the text."""
    if fmt == "json":
        text = canonical_json(obj)
    elif fmt == "dot":
        text = to_dot(obj)
    else:
        raise InputError(f"unsupported format {fmt!r}; choose from {', '.join(FORMATS)}")
    if path is not None:
        Path(path).write_text(text)
    return text
