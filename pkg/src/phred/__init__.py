"""phred: structure-preserving model reduction for nonlinear
port-Hamiltonian systems.

Pipelines: POD, H2-interpolatory ("h2eps") and hybrid projection bases;
Petrov-Galerkin reduction that keeps the reduced model port-Hamiltonian;
a DEIM variant for fast nonlinear evaluation that preserves the structure;
and computable a-priori error bounds.
"""

from .basis import (IterationLog, LinearPhModel, ReductionBasis, SnapshotSet,
                    biorthonormalize, collect_snapshots, h2eps_ph_bases,
                    hybrid_bases, interpolatory_basis, linearize, pod_basis,
                    pod_ph_bases, q_orthonormalize, transfer_eval)
from .bounds import (BoundReport, DeimBoundReport, DeimLemmaReport,
                     LipschitzEstimate, deim_lemma_bound,
                     deim_reduction_bound, lipschitz, log_lipschitz,
                     projection_bound_report)
from .deim import (DeimModel, DeimReducedSystem, HamiltonianSplit,
                   build_split, deim_basis_from_snapshots, deim_hamiltonian,
                   deim_indices, deim_project, pod_deim_ph)
from .errors import (ComparisonError, ConfigError, EstimationError,
                     EvaluationError, IntegrationError, LinearizationError,
                     OrientationError, PhredError, RankError, ShiftError,
                     StructureError)
from .integrate import IntegratorConfig, integrate, simulate
from .models import (LadderParams, TodaParams, constant_signal,
                     gaussian_pulse, ladder_network, sinusoid_signal,
                     standard_inputs, toda_lattice)
from .phcore import (NlphSystem, StructureReport, Trajectory, WeightedMetric,
                     dissipation_margin, eval_dynamics, eval_output, q_norm,
                     q_op_norm, validate_structure)
from .reduction import (ErrorMetrics, ReducedSystem, error_metrics,
                        init_reduced_state, project_ph, simulate_reduced)

__version__ = "0.1.0"
