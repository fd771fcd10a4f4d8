"""Exact computation and simulation laboratory for condensation in
supercritical zero range processes on the discrete torus.

Modules: ensemble (single-site quantities), logconv (log-domain tables
and convolutions), canonical (the canonical measure: marginals, exact
sampling, maximum statistics), dynamics (event-driven continuous-time
simulation), analysis (schedules, local limit theorem, event
decomposition, projected total variation), cli (batch runner).
"""

__version__ = "0.1.0"

from . import _kernels
from .analysis import (
    DecompositionReport,
    LltReport,
    Schedule,
    TvReport,
    background_tv_estimate,
    build_schedule,
    condensate_profile,
    event_decomposition,
    llt_ratio,
    order_check,
)
from .canonical import (
    OccupancyConfig,
    SuffixTables,
    build_suffix_tables,
    exact_marginal,
    exact_marginal_table,
    max_law_exact,
    max_site,
    remove_max,
    sample_background_projection,
    sample_canonical,
    sample_canonical_batch,
)
from .dynamics import DynState, TrajectoryStats, enumerate_state_space, simulate, step_event
from .ensemble import (
    TruncatedSiteLaw,
    asymptotic_predictor,
    fugacity_density,
    jump_rate,
    log_stationary_weight,
    rho_c,
    truncated_site_law,
)
from .logconv import (
    LogPmf,
    canonical_partition_log,
    cap_support,
    convolve,
    log_sum_exp,
    power_entry_log,
    self_convolve_power,
    sum_law,
)

kernel_backend = _kernels.BACKEND
