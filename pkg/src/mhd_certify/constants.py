"""Inequality constants K_pn, G_pn for the bilinear maps and their MHD counterparts.

Sharp values are not computed here.  Tables are supplied by the user or taken
from ``data/default_constants.json``, whose entries are generous multiples of
empirical floors (see ``scripts/estimate_constants.py``); they are not proven
upper bounds and correctness of any certificate is conditional on them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

try:  # python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

SQRT2 = math.sqrt(2.0)


class ConstantsError(ValueError):
    pass


def _key(x: float) -> float:
    return round(float(x), 9)


@dataclass(frozen=True)
class ConstantsTable:
    """K_pn and G_pn indexed by (p, n); hatted values are sqrt(2) times the base ones."""

    d: int
    entries: Mapping[tuple[float, float], tuple[float, float]] = field(default_factory=dict)
    source: str = "user"

    def __post_init__(self):
        clean = {}
        for (p, n), (k, g) in self.entries.items():
            if not (k > 0 and g > 0) or not (math.isfinite(k) and math.isfinite(g)):
                raise ConstantsError(f"constants for (p={p}, n={n}) must be positive and finite")
            clean[(_key(p), _key(n))] = (float(k), float(g))
        object.__setattr__(self, "entries", clean)

    def _lookup(self, p: float, n: float) -> tuple[float, float]:
        if p < n - 1e-12:
            raise ConstantsError(f"constants need p >= n, got p={p}, n={n}")
        try:
            return self.entries[(_key(p), _key(n))]
        except KeyError:
            raise ConstantsError(f"no constants for (p={p}, n={n}) in d={self.d} table") from None

    def K(self, p: float, n: float | None = None) -> float:
        n = p if n is None else n
        if not n > self.d / 2:
            raise ConstantsError(f"K_pn requires n > d/2 = {self.d / 2}, got n={n}")
        return self._lookup(p, n)[0]

    def G(self, p: float, n: float | None = None) -> float:
        n = p if n is None else n
        if not n > self.d / 2 + 1:
            raise ConstantsError(f"G_pn requires n > d/2 + 1 = {self.d / 2 + 1}, got n={n}")
        return self._lookup(p, n)[1]

    def K_hat(self, p: float, n: float | None = None) -> float:
        return SQRT2 * self.K(p, n)

    def G_hat(self, p: float, n: float | None = None) -> float:
        return SQRT2 * self.G(p, n)

    def to_dict(self) -> dict:
        rows = [{"p": p, "n": n, "K": k, "G": g} for (p, n), (k, g) in sorted(self.entries.items())]
        return {"d": self.d, "entries": rows}

    def digest_items(self) -> list:
        return [self.d, sorted((p, n, k, g) for (p, n), (k, g) in self.entries.items())]


def table_from_dict(doc: Mapping, source: str = "user") -> ConstantsTable:
    try:
        d = int(doc["d"])
        entries = {}
        for row in doc["entries"]:
            key = (float(row["p"]), float(row["n"]))
            entries[key] = (float(row["K"]), float(row["G"]))
    except (KeyError, TypeError) as exc:
        raise ConstantsError(f"malformed constants document: {exc}") from None
    return ConstantsTable(d, entries, source=source)


def load_table(path: str | Path) -> ConstantsTable:
    """Read a JSON or TOML constants file."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        doc = tomllib.loads(text)
    else:
        doc = json.loads(text)
    return table_from_dict(doc, source=str(path))


def default_table(d: int) -> ConstantsTable:
    """Shipped non-sharp defaults for d in {2, 3}."""
    raw = resources.files("mhd_certify").joinpath("data/default_constants.json").read_text()
    doc = json.loads(raw)
    for block in doc["tables"]:
        if int(block["d"]) == d:
            return table_from_dict(block, source=f"default(d={d})")
    raise ConstantsError(f"no default constants for d={d}")
