"""Bit-stable output: 17-significant-digit JSON and CSV with a config header."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import __version__

TOOL = "bandgap_forge"


def fmt(x) -> str:
    """Fixed float formatting: 17 significant digits, 'nan' / 'inf' spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _plain(obj):
    """Recursively convert to JSON-ready builtins; complex numbers become [re, im]."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def _dump(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _dump(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        s = fmt(obj)
        return s if s not in ("nan", "inf", "-inf") else json.dumps(s)
    return json.dumps(obj)


def dumps(obj, indent: int = 1) -> str:
    return _dump(_plain(obj), indent, 0) + "\n"


def metadata(config: dict) -> dict:
    return {"tool": TOOL, "version": __version__, "config": _plain(config)}


def write_json(path, payload: dict, config: dict) -> Path:
    """JSON whose first member is the metadata block."""
    path = Path(path)
    doc = {"metadata": metadata(config)}
    doc.update(payload)
    path.write_text(dumps(doc))
    return path


def write_csv(path, columns, rows, config: dict) -> Path:
    """CSV preceded by '#' comment lines holding the resolved config."""
    path = Path(path)
    lines = [f"# tool: {TOOL} {__version__}",
             "# config: " + json.dumps(_plain_sorted(config), separators=(",", ":"))]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _plain_sorted(config):
    # floats inside the one-line header use the same 17-digit format
    return json.loads(dumps(config))


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def read_csv(path):
    """(columns, rows as lists of strings, header comment lines)."""
    header, body = [], []
    for line in Path(path).read_text().splitlines():
        (header if line.startswith("#") else body).append(line)
    cols = body[0].split(",")
    return cols, [b.split(",") for b in body[1:]], header


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
