"""End-to-end driver: discretize a test problem on a node set, build the
multilevel operators, and run the solver."""

from __future__ import annotations

import numpy as np

from .multilevel import MlSettings, mlpre, mlsolver
from .nodeset import NodeSet
from .problems import TestProblem, evaluate_problem
from .rbffd import laplacian_config
from .subsample import BoundaryPipelineParams, MovingFrontParams


def solve_problem(
    problem: TestProblem,
    domain: NodeSet,
    boundary: NodeSet,
    m_l: int = 2,
    n_min: int = 60,
    settings: MlSettings = MlSettings(),
    mf: MovingFrontParams = MovingFrontParams(),
    pipeline: BoundaryPipelineParams = BoundaryPipelineParams(),
):
    """Returns (solution vector, SolveReport, MlOperators). The solution is
    ordered like the finest hierarchy level (domain nodes, then boundary)."""
    ops = mlpre(domain, boundary, n_min, laplacian_config(m_l), mf, pipeline)
    finest = ops.hierarchy.levels[0]
    u_exact, f, g = evaluate_problem(problem, finest)
    rhs = np.where(finest.boundary, g, f)
    u0 = np.zeros(len(finest))
    u, report = mlsolver(u0, rhs, ops, settings, exact=u_exact)
    return u, report, ops
