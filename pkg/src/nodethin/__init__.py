"""nodethin: variable-density node set subsampling, quality metrics, and a
geometric multilevel RBF-FD solver for Poisson/Laplace problems on a disk."""

from .nodeset import (
    BOUNDARY,
    INTERIOR,
    NeighborTable,
    NodeSet,
    SortOrder,
    knn,
    read_nodes,
    sort_nodes,
    write_nodes,
)
from .subsample import (
    BoundaryPipelineParams,
    LevelHierarchy,
    MovingFrontParams,
    PoissonDiskParams,
    WeightedParams,
    mlmfsub,
    moving_front,
    moving_front_to_count,
    poisson_disk,
    poisson_disk_to_count,
    subsample_with_boundary,
    weighted,
)
from .quality import ClrReport, LocalRegularity, clr, local_regularity
from .problems import (
    DensityProfile,
    TestProblem,
    density,
    evaluate_problem,
    generate_disk_nodes,
    laplace_problem,
    poisson_problem,
)
from .rbffd import (
    StencilConfig,
    assemble_I,
    assemble_L,
    assemble_R,
    interpolation_config,
    laplacian_config,
    stencil_weights,
)
from .multilevel import (
    MlOperators,
    MlSettings,
    SolveReport,
    build_operators,
    mlpre,
    mlsolver,
    mlvcyc,
    relax,
)
from .solve import solve_problem

__version__ = "0.1.0"
