"""Motion-compensated compressed sensing for dynamic image sequences.

Reconstruction of undersampled dynamic data with an L1 prior on differences
taken along motion trajectories, including solvers that estimate the motion
separately from or jointly with the signal, plus temporal-difference and
temporal-DFT baselines and a synthetic experiment harness.
"""

from .core import (
    LinearOperator,
    fft2_centered,
    ifft2_centered,
    inner,
    l0_count,
    l1_norm,
    l2_norm,
)
from .datagen import (
    Ellipse,
    MaskSpec,
    PhantomSpec,
    ci_profile,
    full_profile,
    generate_coils,
    generate_mask,
    generate_phantom,
    moving_support,
    noise_epsilon,
    simulate_acquisition,
    suggest_epsilon,
)
from .metrics import EvalReport, Roi, motion_endpoint_error, pixel_traces, rmse_roi
from .motion import (
    RegistrationConfig,
    estimate_global_translation,
    gradient_energy,
    register_pair,
    register_sequence,
    warp,
)
from .operators import (
    MeasurementOperator,
    MotionCompensatedDifference,
    SamplingMask,
    TemporalDFT,
    TemporalDifference,
    build_motion_matrix,
    full_mask,
)
from .solvers import (
    AdmmParams,
    DivergenceError,
    JointParams,
    SolverState,
    cg_solve,
    objective_log,
    project_consistency,
    reconstruct_admm,
    reconstruct_joint,
    reconstruct_separate,
    soft_threshold,
    temporal_prior,
)

__version__ = "0.1.0"
