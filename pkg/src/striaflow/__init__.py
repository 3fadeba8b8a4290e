"""striaflow: pseudo-spectral 2-D stratified Euler with striated diagnostics."""

__version__ = "0.1.0"

from .grid import (  # noqa: F401
    GridSpec,
    SpectralField,
    VectorField,
    dealias,
    derivative,
    field_from_values,
    inv_neg_laplacian,
    pointwise_product,
    to_physical,
    to_spectral,
)
from .dyadic import (  # noqa: F401
    DyadicLadder,
    NormRequest,
    besov_norm,
    build_ladder,
    holder_norm,
    lebesgue_norm,
)
from .paraproduct import (  # noqa: F401
    derive_along,
    div_along,
    paraproduct,
    paravector,
    remainder,
)
from .pressure import (  # noqa: F401
    ConvergenceError,
    EllipticConfig,
    PressureSolution,
    solve_pressure,
)
from .dynamics import (  # noqa: F401
    FlowMarkers,
    IntegrationError,
    StratifiedState,
    advance_markers,
    biot_savart,
    cfl_dt,
    curl,
    curl_consistency_residual,
    grad_velocity,
    rhs,
    step_rk4,
)
from .diagnostics import (  # noqa: F401
    DegenerateFamilyError,
    DiagnosticsRecord,
    InteriorSampleError,
    LOG_LIPSCHITZ_CALIBRATION,
    LifespanInputs,
    RECORD_COLUMNS,
    VectorFieldFamily,
    lifespan_bound,
    lipschitz_audit,
    nondegeneracy,
    patch_interior_holder,
    striated_norm,
    theta,
    tilde_norm,
    timeseries_sample,
)
from .scenarios import ScenarioBundle, taylor_green, vortex_patch  # noqa: F401
from .config import ConfigError, RunConfig, config_digest, load_config, to_ini  # noqa: F401
from .snapshot_io import (  # noqa: F401
    SnapshotError,
    read_snapshot,
    state_from_snapshot,
    write_snapshot,
)
from .runner import (  # noqa: F401
    InvariantViolation,
    RunResult,
    build_scenario,
    converge,
    diagnose_snapshot,
    run,
    spatial_refinement,
    temporal_refinement,
    validate,
)
