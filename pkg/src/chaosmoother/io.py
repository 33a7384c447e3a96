"""CSV/JSON writers that carry a provenance header."""

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def config_hash(config):
    """Short SHA-256 of the canonical JSON form of ``config``."""
    blob = json.dumps(config, sort_keys=True, default=_jsonable).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def metadata(cfg=None, seed=None, **extra):
    """Provenance header: version tag, config hash and seed (plus ``extra``)."""
    meta = {"version": f"v{__version__}", "config_hash": config_hash(cfg or {}),
            "seed": seed}
    meta.update(extra)
    return meta


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if hasattr(x, "__dict__"):
        return {k: v for k, v in vars(x).items() if not k.startswith("_")}
    return str(x)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v).lower()
    return str(v)


def write_csv(path, rows, columns, header=None):
    """Write ``rows`` (dicts) to ``path``; ``header`` lines are prefixed with ``#``.

    ``path="-"`` is not supported here; callers handle stdout themselves.
    """
    with open(path, "w", newline="") as fh:
        dump_csv(fh, rows, columns, header)


def dump_csv(fh, rows, columns, header=None):
    for key, val in (header or {}).items():
        fh.write(f"# {key}: {json.dumps(val, default=_jsonable)}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])


def read_csv(path):
    """Inverse of :func:`write_csv`; returns ``(header, rows)`` with string values."""
    header, lines = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            header[key] = json.loads(val)
        elif line:
            lines.append(line)
    return header, list(csv.DictReader(lines))


def write_json(path, payload, header=None):
    doc = dict(payload)
    if header is not None:
        doc["meta"] = header
    Path(path).write_text(json.dumps(doc, indent=2, default=_jsonable))
