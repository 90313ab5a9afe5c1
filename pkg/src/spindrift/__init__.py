"""spindrift: exact simulation and bifurcation analysis for type-dependent
mean-field spin-flip systems and their deterministic fluid limits."""

__version__ = "0.1.0"

from .models import (  # noqa: F401
    ConfigurationError,
    CyclicParams,
    MeanFieldSpec,
    TabulatedSpec,
    build_cyclic,
    build_mean_field,
    eval_f_g,
    lipschitz_bound,
    spec_from_dict,
    spec_from_json,
    spec_to_dict,
    spec_to_json,
    velocity,
)
from .dynamics import (  # noqa: F401
    BifurcationResult,
    BracketError,
    FixedPointError,
    NumericalInstabilityError,
    StabilityReport,
    Trajectory,
    bifurcation_scan,
    eigenvalues,
    find_fixed_point,
    integrate,
    jacobian,
    orbit_amplitude,
    stability_at,
)
from .simulate import (  # noqa: F401
    JumpPath,
    ResourceError,
    RngStream,
    SpinConfig,
    mix64,
    rescaling_consistency,
    simulate_density_profile,
    simulate_spin_system,
    snap_to_grid,
    sup_distance,
)
from .coupling import (  # noqa: F401
    AuxiliaryPath,
    CoupledRun,
    InitializationCoupling,
    binomial_marginal_test,
    discrepancy_summary,
    initialization_coupling,
    simulate_auxiliary,
    simulate_coupled,
    validate_coupling_inequality,
    validate_lockstep,
)
from .experiments import (  # noqa: F401
    EnsembleSummary,
    ExperimentConfig,
    run_bifurcation_study,
    run_convergence_study,
    run_coupling_study,
)
