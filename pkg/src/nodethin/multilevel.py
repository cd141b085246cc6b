"""Geometric multilevel solver: preprocessing, Gauss-Seidel smoothing,
V-cycle, and the outer iteration with residual reporting."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg as spla

from .errors import DivergenceError, SmootherError, ValidationError
from .nodeset import NodeSet
from .subsample import BoundaryPipelineParams, LevelHierarchy, MovingFrontParams, mlmfsub
from .rbffd import StencilConfig, assemble_I, assemble_L, assemble_R, interpolation_config

DIVERGENCE_LIMIT = 1e6
STAGNATION_FACTOR = 0.999
STAGNATION_RUN = 5


@dataclass(frozen=True)
class MlSettings:
    nu1: int = 2
    nu2: int = 1
    i_max: int = 50
    tol: float = 1e-16

    def __post_init__(self):
        if self.nu1 < 0 or self.nu2 < 0:
            raise ValidationError("smoothing sweep counts must be >= 0")
        if self.i_max < 1:
            raise ValidationError("i_max must be >= 1")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")


@dataclass
class SolveReport:
    residual_history: list = field(default_factory=list)
    convergence_factors: list = field(default_factory=list)
    iterations: int = 0
    status: str = "converged"
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0
    max_relative_error: float = None

    def to_json(self):
        return json.dumps(
            {
                "iterations": self.iterations,
                "status": self.status,
                "residual_history": self.residual_history,
                "convergence_factors": self.convergence_factors,
                "setup_seconds": self.setup_seconds,
                "solve_seconds": self.solve_seconds,
                "max_relative_error": self.max_relative_error,
            },
            indent=2,
        )

    def residual_csv(self):
        lines = ["iteration,relres,convfactor"]
        for i, rr in enumerate(self.residual_history):
            cf = self.convergence_factors[i] if i < len(self.convergence_factors) else ""
            lines.append(f"{i + 1},{rr:.17g},{cf if cf == '' else format(cf, '.17g')}")
        return "\n".join(lines) + "\n"


class _GaussSeidel:
    """Forward Gauss-Seidel in stored node order, implemented as a cached
    lower-triangular solve: u <- u + tril(L)^-1 (f - L u)."""

    def __init__(self, L):
        diag = L.diagonal()
        zero = np.flatnonzero(diag == 0.0)
        if zero.size:
            raise SmootherError(f"zero diagonal at row {int(zero[0])}")
        M = scipy.sparse.tril(L, format="csc")
        self.L = L.tocsr()
        self.lower = spla.splu(
            M, permc_spec="NATURAL", options={"SymmetricMode": False, "DiagPivotThresh": 0.0}
        )

    def sweep(self, u, f, sweeps):
        for _ in range(sweeps):
            u = u + self.lower.solve(f - self.L @ u)
        return u


def relax(u, f, L, sweeps):
    """`sweeps` forward Gauss-Seidel sweeps in node index order."""
    return _GaussSeidel(scipy.sparse.csr_matrix(L)).sweep(np.asarray(u, float), np.asarray(f, float), sweeps)


@dataclass
class MlOperators:
    hierarchy: LevelHierarchy
    L: list  # difference operator per level
    I: list  # interpolation, level j+1 -> j
    R: list  # injection restriction, level j -> j+1
    coarsest_lu: object
    smoothers: list
    setup_seconds: float = 0.0

    @property
    def depth(self):
        return len(self.L)


def build_operators(hierarchy: LevelHierarchy, config: StencilConfig,
                    interp: StencilConfig = None) -> MlOperators:
    """Assemble difference/interpolation/restriction operators for an
    existing hierarchy and factorize the coarsest difference operator."""
    t0 = time.perf_counter()
    if interp is None:
        interp = interpolation_config()
    levels = hierarchy.levels
    L = [assemble_L(lv, config) for lv in levels]
    I = [
        assemble_I(levels[j + 1], levels[j], interp)
        for j in range(len(levels) - 1)
    ]
    R = [
        assemble_R(hierarchy.inject[j], len(levels[j]))
        for j in range(len(levels) - 1)
    ]
    coarsest_lu = spla.splu(L[-1].tocsc())
    smoothers = [_GaussSeidel(Lj) for Lj in L[:-1]]
    return MlOperators(
        hierarchy=hierarchy,
        L=L,
        I=I,
        R=R,
        coarsest_lu=coarsest_lu,
        smoothers=smoothers,
        setup_seconds=time.perf_counter() - t0,
    )


def mlpre(
    domain: NodeSet,
    boundary: NodeSet,
    n_min: int,
    config: StencilConfig,
    mf: MovingFrontParams,
    pipeline: BoundaryPipelineParams = BoundaryPipelineParams(),
    interp: StencilConfig = None,
) -> MlOperators:
    """Full multilevel preprocessing: build the node hierarchy, then all
    level operators and the coarsest factorization."""
    t0 = time.perf_counter()
    hierarchy = mlmfsub(domain, boundary, n_min, mf, pipeline)
    ops = build_operators(hierarchy, config, interp)
    ops.setup_seconds = time.perf_counter() - t0
    return ops


def mlvcyc(u1, f1, ops: MlOperators, nu1, nu2):
    """One multilevel V-cycle: pre-smooth and restrict residuals down the
    hierarchy, solve the coarsest level directly, then prolong corrections
    and post-smooth back up. With a single level this is a direct solve."""
    p = ops.depth
    u1 = np.asarray(u1, dtype=float)
    f1 = np.asarray(f1, dtype=float)
    if p == 1:
        return ops.coarsest_lu.solve(f1)
    u1 = ops.smoothers[0].sweep(u1, f1, nu1)
    r = {2: ops.R[0] @ (f1 - ops.L[0] @ u1)}
    e = {}
    for j in range(2, p):
        e[j] = ops.smoothers[j - 1].sweep(np.zeros_like(r[j]), r[j], nu1)
        r[j + 1] = ops.R[j - 1] @ (r[j] - ops.L[j - 1] @ e[j])
    e[p] = ops.coarsest_lu.solve(r[p])
    for j in range(p - 1, 1, -1):
        e[j] = e[j] + ops.I[j - 1] @ e[j + 1]
        e[j] = ops.smoothers[j - 1].sweep(e[j], r[j], nu2)
    u1 = u1 + ops.I[0] @ e[2]
    u1 = ops.smoothers[0].sweep(u1, f1, nu2)
    return u1


def mlsolver(u1, f1, ops: MlOperators, settings: MlSettings, exact=None):
    """Outer multilevel iteration: V-cycles until the relative residual drops
    below tol, i_max is reached, or the iteration stagnates. Raises
    DivergenceError (report attached) if the residual blows up."""
    t0 = time.perf_counter()
    u = np.asarray(u1, dtype=float).copy()
    f = np.asarray(f1, dtype=float)
    L1 = ops.L[0]
    report = SolveReport(setup_seconds=ops.setup_seconds)
    r0 = float(np.linalg.norm(f - L1 @ u))
    if r0 == 0.0:
        report.solve_seconds = time.perf_counter() - t0
        if exact is not None:
            report.max_relative_error = _max_rel_error(u, exact)
        return u, report
    prev = r0
    for i in range(settings.i_max):
        u = mlvcyc(u, f, ops, settings.nu1, settings.nu2)
        rn = float(np.linalg.norm(f - L1 @ u))
        relres = rn / r0
        report.residual_history.append(relres)
        report.convergence_factors.append(rn / prev if prev > 0 else 0.0)
        report.iterations = i + 1
        prev = rn
        if relres > DIVERGENCE_LIMIT:
            report.status = "diverged"
            report.solve_seconds = time.perf_counter() - t0
            raise DivergenceError(
                f"relative residual {relres:.3e} exceeded {DIVERGENCE_LIMIT:.0e}",
                report=report,
            )
        if relres < settings.tol:
            report.status = "converged"
            break
        tail = report.convergence_factors[-STAGNATION_RUN:]
        if len(tail) == STAGNATION_RUN and all(cf >= STAGNATION_FACTOR for cf in tail):
            report.status = "stagnated"
            break
    else:
        report.status = "maxiter"
    report.solve_seconds = time.perf_counter() - t0
    if exact is not None:
        report.max_relative_error = _max_rel_error(u, exact)
    return u, report


def _max_rel_error(u, exact):
    exact = np.asarray(exact, dtype=float)
    return float(np.max(np.abs(u - exact)) / np.max(np.abs(exact)))
