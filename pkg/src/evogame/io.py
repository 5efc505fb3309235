"""Deterministic CSV/JSON writers with provenance headers."""
from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from . import __version__


def config_hash(cfg):
    """SHA-256 of the canonical JSON of a config (``output_dir`` and ``_meta`` excluded)."""
    data = {k: v for k, v in cfg.items() if k not in ("output_dir", "_meta")}
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


def fmt(x):
    """17 significant digits for floats so values round-trip exactly."""
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")




class Provenance:
    """Header metadata shared by every file written in one run."""

    def __init__(self, cfg, seed, command, extra=None):
        self.hash = config_hash(cfg)
        self.seed = int(seed)
        self.command = command
        self.extra = dict(extra or {})

    def lines(self):
        out = [f"evogame {__version__} command={self.command} config_sha256={self.hash} seed={self.seed}"]
        if self.extra:
            out.append(" ".join(f"{k}={fmt(v)}" for k, v in self.extra.items()))
        return out

    def as_dict(self):
        d = {"tool": "evogame", "version": __version__, "command": self.command,
             "config_sha256": self.hash, "seed": self.seed}
        d.update(self.extra)
        return d


def write_csv(path, columns, rows, prov):
    with open(path, "w", newline="") as fh:
        for line in prov.lines():
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj


def write_json(path, payload, prov):
    """JSON has no comments, so provenance goes in a leading ``_meta`` field."""
    doc = {"_meta": prov.as_dict(), **_plain(payload)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
