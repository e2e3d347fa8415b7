"""Reduced-basis approximation of the smallest eigenvalues of parameterized plane-strain elasticity."""

from .eigensolve import cluster_spectrum, solve_detailed
from .estimator import OfflineEstimatorData, estimate, offline_build
from .fem import AffineOperator, assemble
from .greedy import GreedyConfig, run_greedy
from .mesh import GeometrySpec, beam3, build_mesh, wallslab
from .parameter import ParameterDomain, sample, theta
from .pod import collect_snapshots, pod_compress
from .rbspace import ReducedBasis, ReducedModel

__version__ = "0.1.0"
