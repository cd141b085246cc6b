"""RBF-FD stencil weights with polyharmonic spline kernels and polynomial
augmentation, plus sparse operator assembly (difference, interpolation,
injection restriction). Operators are scipy CSR matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse
from scipy.spatial import cKDTree

from .errors import CollocationError, ConditioningError, SizeError, ValidationError
from .nodeset import NodeSet

RCOND_FLOOR = 1e-14


@dataclass(frozen=True)
class StencilConfig:
    """PHS kernel phi(r) = r^(2 k_phs + 1), augmentation degree m_poly,
    stencil size n_stencil."""

    k_phs: int = 1
    m_poly: int = 2
    n_stencil: int = 12

    def __post_init__(self):
        if self.k_phs < 0:
            raise ValidationError("k_phs must be >= 0")
        if self.m_poly < 0:
            raise ValidationError("m_poly must be >= 0")
        if self.n_stencil < 1:
            raise ValidationError("n_stencil must be >= 1")

    @property
    def ell(self):
        return (self.m_poly + 1) * (self.m_poly + 2) // 2

    @property
    def phs_exponent(self):
        return 2 * self.k_phs + 1


def laplacian_config(m_l: int) -> StencilConfig:
    """Difference-operator parameters: phi = r^3, n = 2 ell."""
    ell = (m_l + 1) * (m_l + 2) // 2
    return StencilConfig(k_phs=1, m_poly=m_l, n_stencil=2 * ell)


def interpolation_config() -> StencilConfig:
    """Interpolation-operator parameters: constant augmentation, phi = r, n = 5."""
    return StencilConfig(k_phs=0, m_poly=0, n_stencil=5)


def monomial_powers(m):
    """Bivariate monomial exponent pairs up to total degree m, by degree."""
    return [(a, deg - a) for deg in range(m + 1) for a in range(deg, -1, -1)]


def _phi_laplacian(r, q):
    # 2-D Laplacian of r^q is q^2 r^(q-2) for radial PHS
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (q * q) * r ** (q - 2.0)
    return out


def _saddle_system(center, pts, config: StencilConfig, operator):
    """Dense (n+ell) saddle matrix and right-hand side for one stencil.
    Monomials are shifted to the evaluation point and scaled by the stencil
    radius to keep the system well conditioned."""
    q = config.phs_exponent
    n = pts.shape[0]
    ell = config.ell
    diff = pts[:, None, :] - pts[None, :, :]
    r = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2)
    d = pts - center
    scale = float(np.max(np.hypot(d[:, 0], d[:, 1]))) or 1.0
    ds = d / scale
    powers = monomial_powers(config.m_poly)
    P = np.empty((n, ell))
    for j, (a, b) in enumerate(powers):
        P[:, j] = ds[:, 0] ** a * ds[:, 1] ** b

    M = np.zeros((n + ell, n + ell))
    M[:n, :n] = r**q
    M[:n, n:] = P
    M[n:, :n] = P.T

    re = np.hypot(d[:, 0], d[:, 1])
    rhs = np.zeros(n + ell)
    if operator == "laplacian":
        rhs[:n] = _phi_laplacian(re, q)
        for j, (a, b) in enumerate(powers):
            # Laplacian of the shifted/scaled monomial evaluated at the center
            if (a, b) == (2, 0) or (a, b) == (0, 2):
                rhs[n + j] = 2.0 / (scale * scale)
    elif operator == "identity":
        rhs[:n] = re**q
        for j, (a, b) in enumerate(powers):
            if (a, b) == (0, 0):
                rhs[n + j] = 1.0
    else:
        raise ValidationError(f"unknown operator {operator!r}")
    if not np.all(np.isfinite(rhs)):
        raise ConditioningError(
            f"non-finite right-hand side at evaluation point {tuple(center)}"
        )
    return M, rhs


def stencil_weights(center, stencil, config: StencilConfig, operator="laplacian"):
    """Solve the augmented saddle system for one stencil and return the n
    nodal weights. Raises ConditioningError for degenerate geometry."""
    pts = stencil.coords if isinstance(stencil, NodeSet) else np.asarray(stencil, dtype=float)
    n = pts.shape[0]
    center = np.asarray(center, dtype=float).reshape(2)
    M, rhs = _saddle_system(center, pts, config, operator)
    if n >= config.ell:
        rcond = 1.0 / np.linalg.cond(M)
        if not np.isfinite(rcond) or rcond < RCOND_FLOOR:
            raise ConditioningError(
                f"saddle system ill conditioned (rcond={rcond:.2e}) "
                f"at evaluation point {tuple(center)}"
            )
        w = scipy.linalg.solve(M, rhs)
    else:
        # underdetermined augmentation: the saddle matrix is singular by
        # construction, so take the minimum-norm solution and insist the
        # constraint rows are actually satisfied
        w, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        res = np.abs(M @ w - rhs).max()
        ref = max(np.abs(rhs).max(), np.abs(M).max() * np.abs(w).max(), 1.0)
        if res > 1e-10 * ref:
            raise ConditioningError(
                f"polynomial constraints unsatisfiable on this stencil "
                f"at evaluation point {tuple(center)}"
            )
    return w[:n]


def _batched_weights(centers, stencil_pts, config, operator):
    """Vectorized saddle solves for many same-size stencils. Rows whose
    batched solve looks unreliable fall back to the careful single-stencil
    path (which raises ConditioningError if truly degenerate)."""
    B, n, _ = stencil_pts.shape
    ell = config.ell
    q = config.phs_exponent
    d = stencil_pts - centers[:, None, :]
    scale = np.max(np.hypot(d[..., 0], d[..., 1]), axis=1)
    scale[scale == 0.0] = 1.0
    ds = d / scale[:, None, None]
    powers = monomial_powers(config.m_poly)

    diff = stencil_pts[:, :, None, :] - stencil_pts[:, None, :, :]
    r = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2)
    M = np.zeros((B, n + ell, n + ell))
    M[:, :n, :n] = r**q
    P = np.empty((B, n, ell))
    for j, (a, b) in enumerate(powers):
        P[:, :, j] = ds[..., 0] ** a * ds[..., 1] ** b
    M[:, :n, n:] = P
    M[:, n:, :n] = np.transpose(P, (0, 2, 1))

    re = np.hypot(d[..., 0], d[..., 1])
    rhs = np.zeros((B, n + ell))
    if operator == "laplacian":
        rhs[:, :n] = _phi_laplacian(re, q)
        for j, (a, b) in enumerate(powers):
            if (a, b) in ((2, 0), (0, 2)):
                rhs[:, n + j] = 2.0 / (scale * scale)
    else:
        rhs[:, :n] = re**q
        for j, (a, b) in enumerate(powers):
            if (a, b) == (0, 0):
                rhs[:, n + j] = 1.0

    try:
        sol = np.linalg.solve(M, rhs[..., None])[..., 0]
        res = np.abs(np.einsum("bij,bj->bi", M, sol) - rhs).max(axis=1)
        ref = np.abs(rhs).max(axis=1) + np.abs(sol).max(axis=1) * np.abs(M).max(axis=(1, 2))
        bad = ~np.isfinite(res) | (res > 1e-8 * ref)
    except np.linalg.LinAlgError:
        sol = np.zeros((B, n + ell))
        bad = np.ones(B, dtype=bool)
    w = sol[:, :n]
    for i in np.flatnonzero(bad):
        w[i] = stencil_weights(centers[i], stencil_pts[i], config, operator)
    return w


def assemble_L(nodes: NodeSet, config: StencilConfig, chunk=4096) -> scipy.sparse.csr_matrix:
    """Global difference operator: Laplacian weights over each interior
    node's n nearest nodes (self included); identity rows at boundary nodes
    for Dirichlet conditions. Acts on full nodal vectors."""
    N = len(nodes)
    n = config.n_stencil
    if n > N:
        raise SizeError(f"stencil size {n} exceeds node count {N}")
    interior = np.flatnonzero(~nodes.boundary)
    tree = cKDTree(nodes.coords)
    rows, cols, vals = [], [], []
    for start in range(0, interior.size, chunk):
        block = interior[start : start + chunk]
        _, idx = tree.query(nodes.coords[block], k=n)
        if n == 1:
            idx = idx[:, None]
        pts = nodes.coords[idx]
        try:
            w = _batched_weights(nodes.coords[block], pts, config, "laplacian")
        except ConditioningError as exc:
            raise ConditioningError(f"difference operator assembly failed: {exc}") from exc
        rows.append(np.repeat(block, n))
        cols.append(idx.ravel())
        vals.append(w.ravel())
    bidx = np.flatnonzero(nodes.boundary)
    rows.append(bidx)
    cols.append(bidx)
    vals.append(np.ones(bidx.size))
    L = scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, N),
    )
    return L


def assemble_I(
    coarse: NodeSet,
    fine: NodeSet,
    config: StencilConfig = None,
    chunk=8192,
) -> scipy.sparse.csr_matrix:
    """Interpolation from coarse to fine nodal vectors: one row per fine
    node with identity-operator weights over its nearest coarse nodes.
    Fine nodes collocated with coarse ones get cardinal (single 1) rows."""
    if config is None:
        config = interpolation_config()
    lookup = coarse.index_of()
    fine_lookup = fine.index_of()
    missing = [xy for xy in map(tuple, coarse.coords) if xy not in fine_lookup]
    if missing:
        raise CollocationError(
            f"{len(missing)} coarse nodes missing from fine set", offending=missing
        )
    n = min(config.n_stencil, len(coarse))
    if n < config.ell:
        raise SizeError("coarse set smaller than the interpolation stencil basis")
    N_f, N_c = len(fine), len(coarse)
    tree = cKDTree(coarse.coords)
    rows, cols, vals = [], [], []
    free = []
    for i, xy in enumerate(map(tuple, fine.coords)):
        j = lookup.get(xy)
        if j is None:
            free.append(i)
        else:
            rows.append(i)
            cols.append(j)
            vals.append(1.0)
    rows, cols, vals = [np.array(rows, int)], [np.array(cols, int)], [np.array(vals)]
    free = np.array(free, dtype=int)
    for start in range(0, free.size, chunk):
        block = free[start : start + chunk]
        _, idx = tree.query(fine.coords[block], k=n)
        if n == 1:
            idx = idx[:, None]
        pts = coarse.coords[idx]
        w = _batched_weights(fine.coords[block], pts, config, "identity")
        rows.append(np.repeat(block, n))
        cols.append(idx.ravel())
        vals.append(w.ravel())
    return scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N_f, N_c),
    )


def assemble_R(inject: np.ndarray, n_fine: int) -> scipy.sparse.csr_matrix:
    """Injection restriction: selection matrix gathering fine values at the
    coarse nodes' fine-level positions."""
    inject = np.asarray(inject, dtype=int)
    n_c = inject.size
    return scipy.sparse.csr_matrix(
        (np.ones(n_c), (np.arange(n_c), inject)), shape=(n_c, n_fine)
    )


def export_matrix_market(op, path):
    """Debug export of a sparse operator to matrix-market text format."""
    scipy.io.mmwrite(str(path), op)
