"""Two-dimensional random-cluster (FK) models near criticality.

Exact small-lattice oracles, planar duality, Sweeny heat-bath dynamics
behind swappable connectivity backends, the monotone coupling of all edge
weights with its emerging clouds, the fermionic observable on Dobrushin
domains, and desk-scale estimators of near-critical quantities.
"""

__version__ = "0.1.0"

from .lattice import (BoundaryCondition, LatticeDomain, MedialGraph,
                      TorusDomain, build_box, build_torus, diamond_domain,
                      dual_domain)
from .measure import (Configuration, ExactDistribution, ModelParams,
                      cluster_count, dual_configuration, dual_parameter,
                      exact_distribution, exact_event_probability,
                      self_dual_point, weight)
from .connectivity import bfs_backend, unionfind_rebuild_backend
from .dynamics import HeatBathChain, conditional_open_probability, make_chain, run, step
from .coupling import (Cloud, CouplingChain, Label, LabelState, clouds,
                       project, sample_update, threshold)
from .observable import (LoopDecomposition, MassiveWalkParams,
                         ObservableField, alpha_of_p, loop_decomposition,
                         observable_exact, winding, x_of_p)
from .experiments import (Estimate, ReferenceExponents, SamplingBudget,
                          cloud_statistics, correlation_length,
                          crossing_probability, edge_intensity,
                          edge_intensity_derivative, four_arm_probability,
                          influence, kesten_relation_check,
                          one_arm_probability, pivotal_count,
                          reference_exponents)
