"""Subsampling algorithms for variable-density node sets.

Three coarsening routines (moving front, weighted elimination, Poisson disk
thinning), a boundary-aware pipeline, and the multilevel hierarchy builder.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import SizeError, ValidationError
from .nodeset import NeighborTable, NodeSet, SortOrder, knn, sort_nodes


@dataclass(frozen=True)
class MovingFrontParams:
    c: float = 1.5
    k: int = 10
    order: SortOrder = field(default_factory=SortOrder)

    def __post_init__(self):
        if not self.c > 1:
            raise ValidationError(f"moving front needs c > 1, got {self.c}")
        if self.k < 1:
            raise ValidationError(f"moving front needs k >= 1, got {self.k}")


@dataclass(frozen=True)
class PoissonDiskParams:
    c: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise ValidationError(f"Poisson disk needs c > 0, got {self.c}")


@dataclass(frozen=True)
class WeightedParams:
    target_count: int
    k: int = 10
    alpha: float = 8.0

    def __post_init__(self):
        if self.target_count < 1:
            raise ValidationError("target_count must be >= 1")
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if not self.alpha > 0:
            raise ValidationError("alpha must be > 0")


@dataclass(frozen=True)
class BoundaryPipelineParams:
    mode: str = "separate"  # or "naive"
    clearance_factor: float = 0.7
    alternate_direction: bool = False

    def __post_init__(self):
        if self.mode not in ("separate", "naive"):
            raise ValidationError(f"unknown boundary mode {self.mode!r}")
        if not self.clearance_factor > 0:
            raise ValidationError("clearance_factor must be > 0")


@dataclass(frozen=True)
class LevelHierarchy:
    """Nested node subsets, level 0 finest. inject[j][i] is the position in
    level j of the i-th node of level j+1 (exact coordinate identity)."""

    levels: list
    inject: list

    @property
    def depth(self):
        return len(self.levels)


def moving_front(nodes: NodeSet, params: MovingFrontParams) -> NodeSet:
    """Directional sweep elimination: sort, then for every surviving node mark
    each of its k nearest neighbors that is closer than c times the node's
    nearest-neighbor distance and lies strictly later in the sort. Marked
    nodes are dropped; output follows the sorted order."""
    n = len(nodes)
    if params.k >= n:
        raise SizeError(f"k={params.k} must be smaller than the node count {n}")
    snodes, _ = sort_nodes(nodes, params.order)
    tbl = knn(snodes, params.k)
    idx = tbl.indices[:, 1:]
    dist = tbl.distances[:, 1:]
    # each row's markable neighbors never change during the scan, so gather
    # them up front; the scan itself is inherently sequential
    cand = (dist < params.c * dist[:, :1]) & (idx > np.arange(n)[:, None])
    flat = idx[cand]
    indptr = np.concatenate([[0], np.cumsum(cand.sum(axis=1))])
    alive = np.ones(n, dtype=bool)
    for i in range(n):
        if alive[i]:
            a, b = indptr[i], indptr[i + 1]
            if a != b:
                alive[flat[a:b]] = False
    return snodes.take(np.flatnonzero(alive))


def poisson_disk(nodes: NodeSet, params: PoissonDiskParams) -> NodeSet:
    """Variable-radius Poisson disk thinning. Each node carries an exclusion
    radius c times its fine-set nearest-neighbor distance; candidates are
    visited in seeded-random order and accepted iff their disk is disjoint
    from every previously accepted disk."""
    n = len(nodes)
    if n == 0:
        return nodes
    if n == 1:
        return nodes.take([0])
    radii = params.c * knn(nodes, 1).distances[:, 1]
    rng = np.random.default_rng(params.seed)
    visit = rng.permutation(n)
    tree = cKDTree(nodes.coords)
    coords = nodes.coords
    accepted = np.zeros(n, dtype=bool)
    r_max = 0.0
    kept = []
    for i in visit:
        ri = radii[i]
        ok = True
        for j in tree.query_ball_point(coords[i], ri + r_max):
            if not accepted[j]:
                continue
            dx = coords[i, 0] - coords[j, 0]
            dy = coords[i, 1] - coords[j, 1]
            if np.sqrt(dx * dx + dy * dy) < ri + radii[j]:
                ok = False
                break
        if ok:
            accepted[i] = True
            kept.append(i)
            if ri > r_max:
                r_max = ri
    return nodes.take(sorted(kept))


def _elimination_scale(coords, target_count):
    """Global crowding cutoff 2*r_max, with r_max the radius of equal disks
    that tile the node set's bounding box when target_count of them remain
    (hexagonal packing). Degenerate (collinear) sets fall back to the 1-D
    analogue along the bounding-box diagonal."""
    span = coords.max(axis=0) - coords.min(axis=0)
    area = span[0] * span[1]
    if area > 0.0:
        return 2.0 * np.sqrt(area / (2.0 * np.sqrt(3.0) * target_count))
    return 2.0 * float(np.hypot(span[0], span[1])) / target_count


def _weights_from_table(tbl: NeighborTable, alpha, d_max, alive):
    """Weight of every node over its surviving fine-set neighbors."""
    n = tbl.indices.shape[0]
    w = np.empty(n)
    for i in range(n):
        w[i] = _node_weight(tbl, alpha, d_max, alive, i)
    return w


def _node_weight(tbl, alpha, d_max, alive, i):
    s = 0.0
    for j, d in zip(tbl.indices[i, 1:], tbl.distances[i, 1:]):
        if alive[j]:
            t = 1.0 - d / d_max
            if t > 0.0:
                s += t**alpha
    return s


def weighted(nodes: NodeSet, params: WeightedParams) -> NodeSet:
    """Greedy weighted elimination: repeatedly remove the node whose neighbors
    crowd it the most (ties by smaller index), updating affected weights,
    until target_count nodes remain.

    The weight of node i is the sum over its k fine-set nearest neighbors j
    still surviving of (1 - d_ij / d_max)_+^alpha, where d_max is a single
    global crowding cutoff derived from the bounding-box area and the target
    count. The global cutoff follows the classic elimination scheme; it tends
    to even out strongly variable densities rather than preserve them.
    """
    n = len(nodes)
    if params.target_count > n:
        raise SizeError(f"target_count={params.target_count} exceeds node count {n}")
    if params.target_count == n:
        return nodes.take(np.arange(n))
    k = min(params.k, n - 1)
    tbl = knn(nodes, k)
    d_max = _elimination_scale(nodes.coords, params.target_count)
    alive = np.ones(n, dtype=bool)
    # reverse adjacency: nodes whose weight references i
    rev = [[] for _ in range(n)]
    for i in range(n):
        for j in tbl.indices[i, 1:]:
            rev[j].append(i)
    w = _weights_from_table(tbl, params.alpha, d_max, alive)
    heap = [(-w[i], i) for i in range(n)]
    heapq.heapify(heap)
    remaining = n
    while remaining > params.target_count:
        nw, i = heapq.heappop(heap)
        if not alive[i] or -nw != w[i]:
            continue  # stale entry
        alive[i] = False
        remaining -= 1
        for j in rev[i]:
            if alive[j]:
                w[j] = _node_weight(tbl, params.alpha, d_max, alive, j)
                heapq.heappush(heap, (-w[j], j))
    return nodes.take(np.flatnonzero(alive))


def _arc_positions(coords):
    gaps = np.hypot(
        np.diff(coords[:, 0], append=coords[0, 0]),
        np.diff(coords[:, 1], append=coords[0, 1]),
    )
    t = np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    return t, gaps


def moving_front_curve(coords, c):
    """Moving front restricted to a closed curve: nodes are assumed ordered
    along the loop, the sort key is cumulative arc length, and neighbors are
    the curve-adjacent nodes. Returns surviving indices in curve order."""
    n = coords.shape[0]
    if n <= 2:
        return np.arange(n)
    t, gaps = _arc_positions(coords)
    prev_gap = np.roll(gaps, 1)
    d1 = np.minimum(prev_gap, gaps)
    alive = np.ones(n, dtype=bool)
    for i in range(n):
        if not alive[i]:
            continue
        limit = c * d1[i]
        j = i + 1
        while j < n and t[j] - t[i] < limit:
            alive[j] = False
            j += 1
    return np.flatnonzero(alive)


def subsample_with_boundary(
    domain: NodeSet,
    boundary: NodeSet,
    params: BoundaryPipelineParams,
    mf: MovingFrontParams,
):
    """Boundary-aware coarsening. mode="separate": coarsen the boundary along
    its arc, clear domain nodes within clearance_factor of the local coarse
    boundary spacing, then coarsen the domain. mode="naive": coarsen boundary
    and domain together (kept for demonstrating why that fails near
    boundaries). Returns (coarse domain, coarse boundary)."""
    if params.mode == "naive":
        merged = domain.merged_with(boundary) if len(domain) else boundary
        coarse = moving_front(merged, mf)
        dom_idx = np.flatnonzero(~coarse.boundary)
        bnd_idx = np.flatnonzero(coarse.boundary)
        return coarse.take(dom_idx), coarse.take(bnd_idx)

    if len(boundary) == 0:
        raise ValidationError("separate boundary pipeline needs boundary nodes")
    keep_b = moving_front_curve(boundary.coords, mf.c)
    coarse_b = boundary.take(keep_b)

    if len(domain) == 0:
        return domain, coarse_b

    # clearance band: drop domain nodes closer to a surviving boundary node
    # than clearance_factor times that node's local coarse spacing
    if len(coarse_b) >= 2:
        spacing = knn(coarse_b, 1).distances[:, 1]
    else:
        spacing = np.array([np.inf])
    tree = cKDTree(coarse_b.coords)
    d, nearest = tree.query(domain.coords, k=1)
    keep_d = d >= params.clearance_factor * spacing[nearest]
    inner = domain.take(np.flatnonzero(keep_d))
    if len(inner) == 0:
        return inner, coarse_b
    if mf.k >= len(inner):
        mf = MovingFrontParams(c=mf.c, k=max(2, len(inner) - 1), order=mf.order)
    if len(inner) <= 2:
        return inner, coarse_b
    coarse_d = moving_front(inner, mf)
    return coarse_d, coarse_b


def mlmfsub(
    domain: NodeSet,
    boundary: NodeSet,
    n_min: int,
    mf: MovingFrontParams,
    pipeline: BoundaryPipelineParams = BoundaryPipelineParams(),
) -> LevelHierarchy:
    """Build the nested level hierarchy for the multilevel solver by repeated
    boundary-aware coarsening. Stops before a level whose boundary count
    would drop below n_min. Levels store domain nodes first, then boundary
    nodes; injection maps are recorded by exact coordinate identity."""
    if len(boundary) < n_min:
        raise ValidationError(
            f"boundary has {len(boundary)} nodes, fewer than n_min={n_min}"
        )
    levels = [domain.merged_with(boundary)]
    cur_d, cur_b = domain, boundary
    order = mf.order
    inject = []
    while True:
        mf_j = MovingFrontParams(c=mf.c, k=mf.k, order=order)
        try:
            nxt_d, nxt_b = subsample_with_boundary(cur_d, cur_b, pipeline, mf_j)
        except SizeError:
            break
        if len(nxt_b) < n_min:
            break
        if len(nxt_d) + len(nxt_b) >= len(cur_d) + len(cur_b):
            break  # coarsening stalled
        combined = nxt_d.merged_with(nxt_b)
        lookup = levels[-1].index_of()
        inject.append(
            np.array([lookup[(x, y)] for x, y in combined.coords], dtype=int)
        )
        levels.append(combined)
        cur_d, cur_b = nxt_d, nxt_b
        if pipeline.alternate_direction:
            order = order.reversed()
    return LevelHierarchy(levels=levels, inject=inject)


def moving_front_to_count(
    nodes: NodeSet,
    target: int,
    k: int = 10,
    order: SortOrder = SortOrder(),
    rel_tol: float = 0.01,
    c_max: float = 8.0,
    max_iter: int = 60,
):
    """Bisection on the coarsening factor c to hit a survivor count within
    rel_tol of target. Returns (coarse set, c). Convenience extension; the
    survivor count is only approximately monotone in c, so the closest
    bracketing c is returned if the tolerance cannot be met exactly."""
    if target > len(nodes):
        raise SizeError("target exceeds node count")
    lo, hi = 1.0 + 1e-9, c_max
    best = None
    for _ in range(max_iter):
        c = 0.5 * (lo + hi)
        out = moving_front(nodes, MovingFrontParams(c=c, k=k, order=order))
        err = abs(len(out) - target)
        if best is None or err < best[0]:
            best = (err, out, c)
        if err <= rel_tol * target:
            return out, c
        if len(out) > target:
            lo = c
        else:
            hi = c
    return best[1], best[2]


def poisson_disk_to_count(
    nodes: NodeSet,
    target: int,
    seed: int = 0,
    rel_tol: float = 0.01,
    c_max: float = 8.0,
    max_iter: int = 60,
):
    """Bisection on the exclusion-radius factor c to hit a target count."""
    if target > len(nodes):
        raise SizeError("target exceeds node count")
    lo, hi = 1e-9, c_max
    best = None
    for _ in range(max_iter):
        c = 0.5 * (lo + hi)
        out = poisson_disk(nodes, PoissonDiskParams(c=c, seed=seed))
        err = abs(len(out) - target)
        if best is None or err < best[0]:
            best = (err, out, c)
        if err <= rel_tol * target:
            return out, c
        if len(out) > target:
            lo = c
        else:
            hi = c
    return best[1], best[2]
