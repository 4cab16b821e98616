"""Adaptive contact process laboratory.

Microscopic dynamics on the discrete torus, graphical constructions,
Monte Carlo estimators for the quantities driving the trait-substitution
scaling limit, a sampler for the limiting jump process, and a harness that
compares the two statistically.
"""

from ._backend import JIT_ENABLED
from ._rng import derive_seed
from .engines import StopRule, Trajectory, run_adaptive, run_one_type, run_two_type
from .errors import (
    ConfigError,
    DomainError,
    EstimationFailedError,
    OracleCapError,
    ProviderGapError,
    ValidationError,
)
from .evolution import (
    MutationKernel,
    RateFunction,
    ScalingSchedule,
    birth_split,
    default_schedule,
    sample_mutant_type,
    validate_schedule,
)
from .limit import (
    AcceptanceTable,
    FddSpec,
    LimitParams,
    RateTable,
    check_nonexplosive,
    compare_paths,
    fdd_weights,
    fdd_weights_mc,
    sample_limit_path,
)
from .observables import (
    EstimatorResult,
    LocalFunction,
    detect_good_box,
    estimate_acceptance,
    estimate_extinction_time,
    estimate_R,
    estimate_Sbox,
    compensator_integral,
    jump_sum,
    q_local_function,
    rejection_mass,
    sample_landscape_at_birth,
    sample_stationary_past_truncated,
)
from .torus import (
    BoxSpec,
    TorusBox,
    TorusSpec,
    box_sites,
    embed,
    in_density_class,
    neighbors,
    shift,
    unembed,
)
from .traits import (
    ProjectionValue,
    RoundRecord,
    TraitPath,
    extract_Z,
    project_phi,
    round_statistics,
    run_rounds,
    star_time_fraction,
    trait_path_from_rounds,
)
from .windows import (
    EventWindow,
    PathQuery,
    dump_window,
    generate_window,
    is_insulated,
    load_window,
    one_type_from_window,
    reaches,
    two_type_from_window,
)

__version__ = "0.1.0"
