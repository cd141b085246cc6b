"""Core 2-D node set representation, nearest-neighbor tables, and CSV I/O."""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import FileFormatError, SizeError, ValidationError

INTERIOR = "interior"
BOUNDARY = "boundary"


def _pairwise_distinct(coords):
    order = np.lexsort((coords[:, 1], coords[:, 0]))
    c = coords[order]
    same = np.all(c[1:] == c[:-1], axis=1)
    return not np.any(same)


@dataclass(frozen=True)
class NodeSet:
    """Ordered collection of 2-D points with a per-node interior/boundary tag.

    Coordinates must be finite and pairwise distinct.
    """

    coords: np.ndarray
    boundary: np.ndarray = None  # bool mask, True = boundary node

    def __post_init__(self):
        coords = np.ascontiguousarray(np.asarray(self.coords, dtype=float))
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValidationError(f"coords must be (N, 2), got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValidationError("coords contain NaN/Inf")
        if coords.shape[0] and not _pairwise_distinct(coords):
            raise ValidationError("duplicate coordinates in node set")
        bnd = self.boundary
        if bnd is None:
            bnd = np.zeros(coords.shape[0], dtype=bool)
        bnd = np.asarray(bnd, dtype=bool)
        if bnd.shape != (coords.shape[0],):
            raise ValidationError("boundary mask length mismatch")
        coords.setflags(write=False)
        bnd.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "boundary", bnd)

    def __len__(self):
        return self.coords.shape[0]

    @property
    def roles(self):
        return np.where(self.boundary, BOUNDARY, INTERIOR)

    def take(self, idx):
        """Subset (or reorder) by integer indices, keeping role tags."""
        idx = np.asarray(idx, dtype=int)
        return NodeSet(self.coords[idx], self.boundary[idx])

    def merged_with(self, other):
        return NodeSet(
            np.vstack([self.coords, other.coords]),
            np.concatenate([self.boundary, other.boundary]),
        )

    def index_of(self):
        """Dict mapping exact coordinate pairs to positions."""
        return {(x, y): i for i, (x, y) in enumerate(self.coords)}


@dataclass(frozen=True)
class NeighborTable:
    """Per-node k nearest neighbors. Column 0 is the node itself; each row's
    distances are non-decreasing, equidistant neighbors ordered by index."""

    indices: np.ndarray  # (N, k+1) int
    distances: np.ndarray  # (N, k+1) float
    k: int


@dataclass(frozen=True)
class SortOrder:
    """Sweep direction for directional sorting; stored with unit norm."""

    direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float).reshape(2)
        norm = float(np.hypot(d[0], d[1]))
        if norm == 0.0 or not np.isfinite(norm):
            raise ValidationError("sort direction must be a nonzero finite vector")
        d = d / norm
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)

    def keys(self, coords):
        """(projection, orthogonal projection) sort keys for each node."""
        d = self.direction
        t = coords[:, 0] * d[0] + coords[:, 1] * d[1]
        s = coords[:, 0] * d[1] - coords[:, 1] * d[0]
        return t, s

    def reversed(self):
        return SortOrder(-self.direction)


def _exact_distances(coords, idx, rows):
    dx = coords[idx, 0] - coords[rows, None, 0]
    dy = coords[idx, 1] - coords[rows, None, 1]
    return np.sqrt(dx * dx + dy * dy)


def _sort_tied_rows(d, idx, partial):
    """Stable per-row (distance, index) sort, in place. With partial=True only
    rows whose distances are not already strictly increasing are touched;
    strictly increasing rows have a unique order and need no work."""
    if d.shape[1] < 2:
        return
    if partial:
        rows = np.flatnonzero(~np.all(d[:, 1:] > d[:, :-1], axis=1))
        if rows.size == 0:
            return
        db, ib = d[rows], idx[rows]
    else:
        rows = slice(None)
        db, ib = d, idx
    o = np.argsort(ib, axis=1, kind="stable")
    db = np.take_along_axis(db, o, axis=1)
    ib = np.take_along_axis(ib, o, axis=1)
    o = np.argsort(db, axis=1, kind="stable")
    d[rows] = np.take_along_axis(db, o, axis=1)
    idx[rows] = np.take_along_axis(ib, o, axis=1)


def knn(nodes: NodeSet, k: int) -> NeighborTable:
    """k nearest neighbors of every node, self included in column 0.

    Ties in distance are broken by smaller node index, which makes the
    result deterministic and independent of kd-tree internals.
    """
    n = len(nodes)
    if n == 0:
        raise ValidationError("knn on empty node set")
    if k >= n:
        raise SizeError(f"k={k} must be smaller than the node count {n}")
    if k < 0:
        raise ValidationError("k must be non-negative")
    coords = nodes.coords
    tree = cKDTree(coords)
    m = min(n, k + 2)
    _, idx = tree.query(coords, k=m)
    if m == 1:
        idx = idx[:, None]
    d = _exact_distances(coords, idx, np.arange(n))
    _sort_tied_rows(d, idx, partial=True)
    out_idx = idx[:, : k + 1].copy()
    out_d = d[:, : k + 1].copy()
    # rows whose (k+1)-th distance ties the query cut may be missing the
    # index-preferred member of the tie; re-query just those rows wider
    pending = np.flatnonzero(d[:, m - 1] <= d[:, k]) if m < n else np.empty(0, int)
    while pending.size:
        m = min(n, 2 * m)
        _, idx = tree.query(coords[pending], k=m)
        d = _exact_distances(coords, idx, pending)
        _sort_tied_rows(d, idx, partial=False)
        done = (d[:, m - 1] > d[:, k]) if m < n else np.ones(len(pending), bool)
        out_idx[pending[done]] = idx[done, : k + 1]
        out_d[pending[done]] = d[done, : k + 1]
        pending = pending[~done]
    return NeighborTable(indices=out_idx, distances=out_d, k=k)


def sort_nodes(nodes: NodeSet, order: SortOrder):
    """Sort by ascending projection onto order.direction; ties broken by the
    orthogonal coordinate, then by original index. Returns (sorted set,
    permutation new -> old)."""
    t, s = order.keys(nodes.coords)
    perm = np.lexsort((np.arange(len(nodes)), s, t))
    return nodes.take(perm), perm


def read_nodes(path) -> NodeSet:
    """Read a CSV node file with header ``x,y,role`` (role optional)."""
    coords = []
    bnd = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if len(row) < 2 or row[0].strip() != "x" or row[1].strip() != "y":
                    raise FileFormatError(
                        f"{path}: expected header starting with 'x,y', got {row!r}",
                        line=1,
                    )
                continue
            if not row:
                continue
            if len(row) < 2:
                raise FileFormatError(f"{path}: line {lineno}: expected at least x,y", line=lineno)
            try:
                x = float(row[0])
                y = float(row[1])
            except ValueError:
                raise FileFormatError(
                    f"{path}: line {lineno}: could not parse coordinates {row[:2]!r}",
                    line=lineno,
                ) from None
            role = row[2].strip() if len(row) > 2 and row[2].strip() else INTERIOR
            if role not in (INTERIOR, BOUNDARY):
                raise FileFormatError(
                    f"{path}: line {lineno}: unknown role {role!r}", line=lineno
                )
            coords.append((x, y))
            bnd.append(role == BOUNDARY)
    return NodeSet(np.array(coords, dtype=float).reshape(-1, 2), np.array(bnd, dtype=bool))


def write_nodes(nodes: NodeSet, path) -> None:
    """Write a CSV node file; coordinates round-trip bit-exactly (17 sig digits).
    The file is written atomically (temp file + rename)."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write("x,y,role\n")
            for (x, y), b in zip(nodes.coords, nodes.boundary):
                fh.write(f"{x:.17g},{y:.17g},{BOUNDARY if b else INTERIOR}\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
