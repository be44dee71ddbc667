"""Delimited and JSON output with a self-describing header.

Every CSV starts with one ``# {json}`` line holding the schema name,
schema version, package version and any config echo; floats are written
with 17 significant digits so that replays can be compared bit for bit.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import __version__

SCHEMA_VERSION = 1


def fmt(value) -> str:
    """Format one cell; floats get 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if value is None:
        return ""
    return str(value)


def header(schema: str, **meta) -> dict:
    return {"schema": schema, "schema_version": SCHEMA_VERSION,
            "package_version": __version__, **meta}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan; keep them readable as strings
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """JSON text; floats round-trip exactly through ``repr``."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False)


def write_csv(path_or_stream, meta: dict, columns, rows):
    """Write ``rows`` under a ``# {json}`` header and a column line."""
    lines = ["# " + json.dumps(_jsonable(meta)), ",".join(columns)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_stream, "write"):
        path_or_stream.write(text)
    else:
        Path(path_or_stream).write_text(text, encoding="utf-8")


def read_csv(path):
    """Return ``(meta, columns, data)`` with ``data`` as a float array."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError("missing JSON header line")
        meta = json.loads(first[2:])
        columns = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return meta, columns, data


def write_json(path_or_stream, obj):
    text = dumps(obj) + "\n"
    if hasattr(path_or_stream, "write"):
        path_or_stream.write(text)
    else:
        Path(path_or_stream).write_text(text, encoding="utf-8")
