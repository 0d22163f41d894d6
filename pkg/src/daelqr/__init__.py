"""Linear-quadratic optimal control of single-input DAEs in quasi-Weierstrass form."""

from .augmentation import (
    AssumptionReport,
    AugmentedSystem,
    CostWeights,
    behavioural_stabilizability,
    build_augmented,
    check_assumptions,
)
from .control import (
    FeedbackLaw,
    LQProblem,
    OptimalSolution,
    RegularityCertificate,
    check_closed_loop_regular,
    left_inverse_variant,
    optimal_trajectory,
    optimal_value,
    quadrature_cost,
    simulate_closed_loop,
    synthesize_feedback,
)
from .exceptions import (
    AssumptionError,
    ConvergenceError,
    DAELQRError,
    DimensionError,
    InconsistentInitialValueError,
    IntegrationError,
    InternalConsistencyError,
    NotNilpotentError,
)
from .qwf import (
    ConsistencyBasis,
    QwfSystem,
    ValidationReport,
    consistency_basis,
    input_index,
    is_consistent,
    validate_qwf,
)
from .riccati import PInfinity, RiccatiSolution, are_residual, integrate_dre, p_infinity
from .signal import ControlSignal, eval_derivatives, is_in_u0
from .solution import Trajectory, solve_dae, verify_solution
from .tolerances import Tolerances, default_tolerances

__version__ = "0.1.0"
