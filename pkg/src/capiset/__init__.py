"""capiset: maximal constraint-admissible invariant sets from PWA neural Lyapunov functions."""

from .geometry import (
    CutResult,
    Halfspace,
    Hyperplane,
    LpResult,
    LpStatus,
    NumericalFailure,
    Polytope,
    hyperplane_cuts,
    is_empty,
    solve_lp,
    split_by_hyperplanes,
)
from .pwanet import (
    ActivationPattern,
    AffinePiece,
    DegenerateNeuron,
    PwaNetwork,
    ReferenceMap,
    activation_pattern,
    affine_piece,
    forward,
    neuron_hyperplane,
    rdlf_value,
)
from .partition import (
    PartitionNode,
    PartitionTree,
    annotate_lower_bounds,
    build_partition_tree,
    locate,
)
from .capi import (
    InfeasibleReference,
    LevelResult,
    PwaConstraint,
    box_constraints,
    find_inactive_hyperplanes,
    grid_oracle_gamma,
    max_admissible_level,
    max_admissible_level_convex,
    pair_lp,
)
from .estimator import (
    EstimatorNet,
    TrainingSet,
    Unverified,
    VerifyResult,
    pretrain_dataset,
    train_estimator,
    verify_estimator,
)
from .systems import (
    LinearPolicy,
    LyapunovReport,
    SystemSpec,
    TrainingFailed,
    cartpole_step,
    cartpole_system,
    check_lyapunov,
    pendulum_step,
    pendulum_system,
    train_lyapunov_fixture,
)
from .erg import (
    ConstraintViolated,
    ErgConfig,
    ErgTrajectory,
    dsm,
    erg_step,
    navigation_field,
    simulate_erg,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
