"""CSV/JSON export for trajectories, certificates and stability reports."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .spectral import pair_to_dict


def fmt(x: float) -> str:
    """Round-trippable float text; identical inputs give identical bytes."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def digest(obj: Any) -> str:
    """sha256 of canonical JSON (sorted keys)."""
    text = json.dumps(obj, sort_keys=True, default=_jsonable, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _finite_or_none(x: float):
    return float(x) if math.isfinite(x) else None


def write_json(path: Path, doc: Mapping) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable, allow_nan=False) + "\n")
    return path


def _write_rows(path: Path, header: list[str], columns: list[np.ndarray]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([fmt(x) for x in row])
    return path


def trajectory_csv(traj, path: Path) -> Path:
    orders = sorted(traj.norms)
    return _write_rows(path, ["t"] + [f"norm_{p!r}" for p in orders], [traj.times] + [traj.norms[p] for p in orders])


def trajectory_json(traj, path: Path, config_digest: str | None = None, include_states: bool = True) -> Path:
    doc = {
        "times": [float(t) for t in traj.times],
        "norms": {repr(p): [float(x) for x in v] for p, v in sorted(traj.norms.items())},
        "config_digest": config_digest,
    }
    if include_states:
        doc["states"] = [{"t": float(t), "pair": pair_to_dict(s)} for t, s in zip(traj.state_times, traj.states)]
    return write_json(path, doc)


def certificate_csv(cert, path: Path) -> Path:
    ps = sorted(cert.Rp)
    return _write_rows(path, ["t", "Rn"] + [f"Rp_{p!r}" for p in ps], [cert.times, cert.Rn] + [cert.Rp[p] for p in ps])


def certificate_json(cert, path: Path, config_digest: str | None = None) -> Path:
    doc = cert.to_dict()
    doc["config_digest"] = config_digest
    return write_json(path, doc)


def report_json(report: Mapping, path: Path, config_digest: str | None = None) -> Path:
    doc = dict(report)
    doc["config_digest"] = config_digest
    return write_json(path, _sanitize(doc))


def _sanitize(obj):
    if isinstance(obj, float):
        return _finite_or_none(obj)
    if isinstance(obj, Mapping):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return _sanitize(obj.item())
    return obj
