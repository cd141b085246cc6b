"""Test problems on the unit-diameter disk: analytic Poisson/Laplace
solutions, the radial node-density profile, and a variable-density node
generator producing solver-ready fine node sets."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .errors import CapacityError, ValidationError
from .nodeset import NodeSet

DISK_RADIUS = 0.5


@dataclass(frozen=True)
class DensityProfile:
    """Target node spacing as a function of distance d to the origin: rho1
    inside d_lim, blending linearly to rho2 over the next d_bl."""

    rho1: float
    rho2: float
    d_lim: float
    d_bl: float

    def __post_init__(self):
        if not (self.rho1 > 0 and self.rho2 > 0 and self.d_bl > 0):
            raise ValidationError("rho1, rho2, d_bl must be positive")
        if self.d_lim < 0:
            raise ValidationError("d_lim must be non-negative")

    def scaled(self, s):
        """Same profile with both spacings multiplied by s (node count ~ 1/s^2)."""
        return DensityProfile(self.rho1 * s, self.rho2 * s, self.d_lim, self.d_bl)


def density(d, profile: DensityProfile):
    """Spacing at distance d from the origin (scalar or array)."""
    d = np.asarray(d, dtype=float)
    t = np.clip((d - profile.d_lim) / profile.d_bl, 0.0, 1.0)
    out = profile.rho1 + (profile.rho2 - profile.rho1) * t
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TestProblem:
    kind: str  # "poisson" or "laplace"
    exact: Callable
    forcing: Callable
    dirichlet: Callable
    default_profile: DensityProfile


def _poisson_exact(x, y):
    r = np.hypot(x, y)
    return 2.0 * np.exp(-100.0 * r)


def _poisson_forcing(x, y):
    r = np.hypot(x, y)
    return 200.0 * np.exp(-100.0 * r) * (100.0 * r - 1.0) / r


def _laplace_exact(x, y):
    # 1024 r^10 cos(10 theta) = 1024 Re((x + iy)^10)
    z = (x + 1j * y) ** 10
    return 1024.0 * np.real(z)


def poisson_problem() -> TestProblem:
    """Sharp exponential peak at the origin; forcing singular at r = 0."""
    return TestProblem(
        kind="poisson",
        exact=_poisson_exact,
        forcing=_poisson_forcing,
        dirichlet=_poisson_exact,  # equals 2e^-50 on the boundary circle
        default_profile=DensityProfile(rho1=0.004, rho2=0.02, d_lim=0.05, d_bl=0.15),
    )


def laplace_problem() -> TestProblem:
    """Harmonic solution oscillating along the boundary; zero forcing."""
    return TestProblem(
        kind="laplace",
        exact=_laplace_exact,
        forcing=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        dirichlet=_laplace_exact,
        default_profile=DensityProfile(rho1=0.03, rho2=0.008, d_lim=0.25, d_bl=0.15),
    )


PROBLEMS = {"poisson": poisson_problem, "laplace": laplace_problem}


def evaluate_problem(problem: TestProblem, nodes: NodeSet):
    """Sample (u_exact, f, g) at the nodes. Refuses nodes at the forcing
    singularity rather than returning Inf."""
    x, y = nodes.coords[:, 0], nodes.coords[:, 1]
    if problem.kind == "poisson":
        r = np.hypot(x, y)
        if np.any(r <= 0.0):
            raise ValidationError("node at the forcing singularity r = 0")
    u = problem.exact(x, y)
    f = problem.forcing(x, y)
    g = problem.dirichlet(x, y)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
        raise ValidationError("non-finite problem data at some node")
    return u, f, g


def _hash_key(p, cell):
    return (int(math.floor(p[0] / cell)), int(math.floor(p[1] / cell)))


def generate_disk_nodes(profile: DensityProfile, seed: int, max_nodes: int = 2_000_000):
    """Generate a quasi-uniform variable-density node set on the disk of
    radius 0.5: evenly spaced boundary nodes on the circle, interior filled
    by an advancing front seeded at the boundary (candidates placed at the
    local spacing, accepted when no node is closer than 0.8 of it), then a
    few repulsion sweeps to smooth spacing near the boundary.
    Deterministic for a given seed. Returns (domain, boundary)."""
    rng = np.random.default_rng(seed)

    h_b = density(DISK_RADIUS, profile)
    n_b = max(8, int(round(2.0 * math.pi * DISK_RADIUS / h_b)))
    theta0 = rng.uniform(0.0, 2.0 * math.pi)
    thetas = theta0 + 2.0 * math.pi * np.arange(n_b) / n_b
    bnd = DISK_RADIUS * np.column_stack([np.cos(thetas), np.sin(thetas)])

    # multiresolution spatial hash: with strongly contrasting densities a
    # single cell size makes queries in the coarse region scan huge windows,
    # so keep grids at power-of-two cell sizes and query the matching one
    rho_min = min(profile.rho1, profile.rho2)
    rho_max = max(profile.rho1, profile.rho2)
    base = 0.7 * rho_min
    n_levels = max(1, int(math.ceil(math.log2(rho_max / rho_min))) + 1)
    cells = [base * 2.0**l for l in range(n_levels)]
    grids = [{} for _ in cells]
    pts = []

    def insert(p):
        pts.append(p)
        for cell, grid in zip(cells, grids):
            grid.setdefault(_hash_key(p, cell), []).append(p)

    def too_close(p, radius):
        lvl = min(n_levels - 1, max(0, int(math.ceil(math.log2(max(radius, base) / base)))))
        cell, grid = cells[lvl], grids[lvl]
        reach = int(math.ceil(radius / cell))
        cx, cy = _hash_key(p, cell)
        r2 = radius * radius
        for ix in range(cx - reach, cx + reach + 1):
            for iy in range(cy - reach, cy + reach + 1):
                for q in grid.get((ix, iy), ()):
                    dx = p[0] - q[0]
                    dy = p[1] - q[1]
                    if dx * dx + dy * dy < r2:
                        return True
        return False

    for p in bnd:
        insert((p[0], p[1]))
    n_boundary = len(pts)

    # seed the front at the center of region 1 as well as at the boundary:
    # growing outward from the finest density gives better packing there and
    # keeps the spacing around the center at the local target instead of
    # leaving it to whatever the inward-marching front happens to produce
    ang = rng.uniform(0.0, 2.0 * math.pi)
    r_seed = 0.5 * density(0.0, profile)
    center_seed = (r_seed * math.cos(ang), r_seed * math.sin(ang))
    if not too_close(center_seed, 0.8 * density(r_seed, profile)):
        insert(center_seed)

    front = deque(range(n_boundary, len(pts)))
    front.extend(range(n_boundary))
    n_angles = 10
    while front:
        i = front.popleft()
        x0, y0 = pts[i]
        rho_here = density(math.hypot(x0, y0), profile)
        th0 = rng.uniform(0.0, 2.0 * math.pi)
        for a in range(n_angles):
            th = th0 + 2.0 * math.pi * a / n_angles
            ct, st = math.cos(th), math.sin(th)
            px, py = x0 + rho_here * ct, y0 + rho_here * st
            rho_c = density(math.hypot(px, py), profile)
            px, py = x0 + rho_c * ct, y0 + rho_c * st
            rr = math.hypot(px, py)
            if rr >= DISK_RADIUS - 0.55 * rho_c:
                continue
            rho_c = density(rr, profile)
            if too_close((px, py), 0.8 * rho_c):
                continue
            insert((px, py))
            front.append(len(pts) - 1)
            if len(pts) > max_nodes:
                raise CapacityError(
                    f"node generation exceeded max_nodes={max_nodes}"
                )

    interior = np.array(pts[n_boundary:], dtype=float).reshape(-1, 2)
    interior = _repel_near_boundary(interior, bnd, profile, sweeps=5)

    domain = NodeSet(interior, np.zeros(len(interior), dtype=bool))
    boundary = NodeSet(bnd, np.ones(n_b, dtype=bool))
    return domain, boundary


def _repel_near_boundary(interior, bnd, profile, sweeps):
    """Smooth interior spacing in the band within ~3 local spacings of the
    boundary circle by pushing crowded neighbors apart. Boundary nodes are
    fixed; moved nodes are kept inside the disk."""
    if len(interior) == 0:
        return interior
    interior = interior.copy()
    for _ in range(sweeps):
        rho = density(np.hypot(interior[:, 0], interior[:, 1]), profile)
        band = np.flatnonzero(DISK_RADIUS - np.hypot(interior[:, 0], interior[:, 1]) < 3.0 * rho)
        if band.size == 0:
            break
        all_pts = np.vstack([interior, bnd])
        tree = cKDTree(all_pts)
        shift = np.zeros((band.size, 2))
        for bi, i in enumerate(band):
            p = interior[i]
            rc = 1.4 * rho[i]
            f = np.zeros(2)
            for j in tree.query_ball_point(p, rc):
                q = all_pts[j]
                dx, dy = p[0] - q[0], p[1] - q[1]
                d = math.hypot(dx, dy)
                if d == 0.0:
                    continue
                s = (1.0 - d / rc) / d
                f[0] += dx * s
                f[1] += dy * s
            shift[bi] = 0.3 * rho[i] * f
        interior[band] += shift
        # clamp back inside the disk
        r = np.hypot(interior[:, 0], interior[:, 1])
        rho = density(r, profile)
        cap = DISK_RADIUS - 0.5 * rho
        out = r > cap
        if np.any(out):
            interior[out] *= (cap[out] / r[out])[:, None]
    return interior
