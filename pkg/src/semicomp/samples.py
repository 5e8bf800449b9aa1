"""Container for retained MCMC draws and its on-disk format.

Each chain is a mapping from column name to a 1-D array of retained draws.
Quantities evaluated on time grids (posterior log-hazards) are stored as 2-D
arrays under ``grids`` with the grid points recorded in ``meta["grids"]``.

On disk a sample set is a directory with ``chain<c>.csv`` per chain,
``chain<c>_<grid>.csv`` per grid quantity and ``meta.json``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["PosteriorSamples", "retained_count"]


def retained_count(num_reps: int, thin: int, burnin_perc: float) -> int:
    """Number of draws kept per chain: stored scans minus the burn-in share."""
    stored = num_reps // thin
    return stored - int(stored * burnin_perc)


def _fmt(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Inf" if v > 0 else "-Inf"
    return repr(v)


def _write_table(path: Path, header, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])


def _read_table(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    return header, data


@dataclass
class PosteriorSamples:
    chains: list
    meta: dict = field(default_factory=dict)
    grids: list = field(default_factory=list)

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    @property
    def names(self) -> list[str]:
        return list(self.chains[0]) if self.chains else []

    @property
    def n_draws(self) -> int:
        if not self.chains or not self.chains[0]:
            return 0
        return len(next(iter(self.chains[0].values())))

    def column(self, name: str) -> np.ndarray:
        """Draws of ``name`` as an ``(n_chains, n_draws)`` array."""
        return np.vstack([c[name] for c in self.chains])

    def pooled(self, name: str) -> np.ndarray:
        return np.concatenate([c[name] for c in self.chains])

    def grid(self, name: str) -> np.ndarray:
        """Grid evaluations pooled over chains, shape ``(draws, len(grid))``."""
        return np.vstack([g[name] for g in self.grids])

    def write(self, directory) -> list[Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for c, chain in enumerate(self.chains):
            p = out / f"chain{c + 1}.csv"
            _write_table(p, list(chain), list(chain.values()))
            paths.append(p)
            for gname, arr in (self.grids[c].items() if self.grids else []):
                p = out / f"chain{c + 1}_{gname}.csv"
                t = self.meta["grids"][gname]
                _write_table(p, [_fmt(v) for v in t], list(np.asarray(arr).T))
                paths.append(p)
        p = out / "meta.json"
        p.write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        paths.append(p)
        return paths

    @classmethod
    def read(cls, directory) -> "PosteriorSamples":
        src = Path(directory)
        meta = json.loads((src / "meta.json").read_text(encoding="utf-8"))
        n_chains = int(meta["n_chains"])
        chains, grids = [], []
        for c in range(1, n_chains + 1):
            header, data = _read_table(src / f"chain{c}.csv")
            chains.append({h: data[:, j].copy() for j, h in enumerate(header)})
            g = {}
            for gname in meta.get("grids", {}):
                _, arr = _read_table(src / f"chain{c}_{gname}.csv")
                g[gname] = arr
            grids.append(g)
        return cls(chains, meta, grids)
