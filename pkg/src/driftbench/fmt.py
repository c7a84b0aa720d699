"""Text formatting helpers that keep floats bit-exact on reload."""

from __future__ import annotations

import json
import math
from typing import Any


def f17(x: float) -> str:
    """Format a float with 17 significant digits (round-trips exactly)."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return format(x, ".17g")


def dumps(obj: Any, indent: int | None = 1) -> str:
    """JSON encoder writing every float with :func:`f17`.

    Dict key order is preserved, so equal inputs give byte-identical text.
    """
    return _encode(obj, indent, 0) + "\n"


def _encode(obj: Any, indent: int | None, level: int) -> str:
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return f17(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if hasattr(obj, "tolist"):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return _join("{", "}", items, indent, level)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [_encode(v, indent, level + 1) for v in obj]
        # Short numeric vectors stay on one line.
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(items) + "]"
        return _join("[", "]", items, indent, level)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _join(open_: str, close: str, items: list[str], indent: int | None, level: int) -> str:
    if indent is None:
        return open_ + ", ".join(items) + close
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    return open_ + "\n" + ",\n".join(pad + it for it in items) + "\n" + end + close
