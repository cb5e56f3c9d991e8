"""Deterministic JSON and CSV writers.

Floats are written with 17 significant digits. The only non-reproducible
content of a run (wall-clock time and duration) lives under the
``run_info`` key of JSON files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

RUN_INFO_KEY = "run_info"


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _plain(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    return x


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(isinstance(_plain(v), (int, float, bool)) or v is None for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(dumps(payload) + "\n")
    return path


def _cell(x) -> str:
    x = _plain(x)
    if isinstance(x, float):
        return "" if not math.isfinite(x) else format(x, ".17g")
    if x is None:
        return ""
    return str(x)


def write_csv(path, header, rows, meta: dict | None = None) -> Path:
    """CSV with ``# key=json`` metadata lines, then one header row."""
    path = Path(path)
    lines = []
    for k, v in (meta or {}).items():
        lines.append(f"# {k}={dumps(v, indent=0).replace(chr(10), '')}")
    lines.append(",".join(header))
    for r in rows:
        lines.append(",".join(_cell(c) for c in r))
    path.write_text("\n".join(lines) + "\n")
    return path


def strip_run_info(text: str) -> dict:
    """Parse a JSON output and drop its run_info key (for comparisons)."""
    d = json.loads(text)
    d.pop(RUN_INFO_KEY, None)
    return d
