"""Node-set quality metrics: local regularity statistics and the comparative
local regularity (CLR) measures used to score subsampling fidelity."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import CollocationError, SizeError, ValidationError
from .nodeset import NodeSet, knn


@dataclass(frozen=True)
class LocalRegularity:
    delta_bar: np.ndarray  # per-node mean distance to the k nearest neighbors
    sigma: np.ndarray  # per-node population SD of those distances
    k: int


@dataclass(frozen=True)
class ClrReport:
    clr_avg: float
    clr_sd: float
    k: int
    coarse_to_fine: np.ndarray  # collocation index map used

    def to_json(self):
        return json.dumps(
            {"k": self.k, "clr_avg": self.clr_avg, "clr_sd": self.clr_sd}
        )


def local_regularity(nodes: NodeSet, k: int) -> LocalRegularity:
    """Mean and population standard deviation of each node's distances to its
    k nearest neighbors."""
    tbl = knn(nodes, k)
    d = tbl.distances[:, 1:]
    delta_bar = d.mean(axis=1)
    sigma = d.std(axis=1)
    return LocalRegularity(delta_bar=delta_bar, sigma=sigma, k=k)


def _minmax(v):
    lo = v.min()
    rng = v.max() - lo
    if rng == 0.0:
        return np.zeros_like(v)  # perfectly uniform distribution
    return (v - lo) / rng


def _collocate(fine: NodeSet, coarse: NodeSet):
    lookup = fine.index_of()
    missing = []
    c2f = np.empty(len(coarse), dtype=int)
    for i, (x, y) in enumerate(coarse.coords):
        j = lookup.get((x, y))
        if j is None:
            missing.append((x, y))
        else:
            c2f[i] = j
    if missing:
        raise CollocationError(
            f"{len(missing)} coarse nodes missing from fine set "
            f"(first few: {missing[:5]})",
            offending=missing,
        )
    return c2f


def clr(fine: NodeSet, coarse: NodeSet, k: int) -> ClrReport:
    """Comparative local regularity between a fine node set and a coarse
    subset of it. Per-node neighbor-distance statistics are computed on each
    set (fine-side statistics only at the collocated nodes, with neighbors
    drawn from the full fine set), min-max normalized to [0, 1], and the
    plain L2 norm of their difference over the coarse nodes is reported."""
    if len(coarse) == 0:
        raise ValidationError("coarse node set is empty")
    if k >= len(coarse):
        raise SizeError(f"k={k} must be smaller than the coarse node count {len(coarse)}")
    c2f = _collocate(fine, coarse)

    # fine-side statistics, evaluated only at the collocated nodes
    tree = cKDTree(fine.coords)
    _, idx = tree.query(coarse.coords, k=k + 1)
    dx = fine.coords[idx, 0] - coarse.coords[:, None, 0]
    dy = fine.coords[idx, 1] - coarse.coords[:, None, 1]
    d = np.sqrt(dx * dx + dy * dy)
    d = np.sort(d, axis=1)[:, 1:]  # drop the collocated self
    fine_avg = d.mean(axis=1)
    fine_sd = d.std(axis=1)

    reg_c = local_regularity(coarse, k)
    clr_avg = float(np.linalg.norm(_minmax(fine_avg) - _minmax(reg_c.delta_bar)))
    clr_sd = float(np.linalg.norm(_minmax(fine_sd) - _minmax(reg_c.sigma)))
    return ClrReport(clr_avg=clr_avg, clr_sd=clr_sd, k=k, coarse_to_fine=c2f)
