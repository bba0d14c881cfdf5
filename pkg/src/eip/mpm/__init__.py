"""MLS-MPM core: grid, kernels, transfers and the time step."""
from .bspline import STENCIL, bspline_weights, quadratic_bspline, stencil_weights
from .grid import MASS_EPSILON, Grid, apply_constraints, grid_normalize
from .state import (
    DEFAULT_DT,
    EscapeError,
    ParticleInversionError,
    SimState,
    SimulationError,
    check_cfl,
    coefficient_gamma,
    default_threads,
    g2p_update,
    g2p_velocity,
    load_checkpoint,
    make_state,
    p2g_scatter,
    save_checkpoint,
    step,
    stress_term,
    sticky_nodes,
)
