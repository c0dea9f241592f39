"""Buffer-aided relay selection: Monte-Carlo simulation and analytical rates."""

from .channel import FadingModel, SlotRealization, SlotSampler, capacity
from .protocols import (
    Decision,
    Mode,
    NetworkState,
    SelectionWeights,
    apply_decision,
    select_buffer_aided,
    select_conventional,
    select_delay_limited,
    update_lambda,
    update_mu_estimate,
    update_rate_estimates,
)
from .analysis import (
    EffectiveDensityContext,
    MuSolverResult,
    asymptotic_rates,
    closed_form_rate_ba_iid_rayleigh,
    closed_form_rate_conv_iid_rayleigh,
    exp_integral_e1,
    exp_scaled_e1,
    expected_log_rate,
    high_snr_gap,
    iid_max_rate_quadrature,
    low_snr_ratio,
    max_rate_analytical,
    solve_mu_star,
)
from .simulator import (
    BufferAidedAdaptive,
    BufferAidedGenie,
    Conventional,
    DelayLimited,
    MaxLink,
    RateReport,
    SimulationConfig,
    average_delay,
    run_simulation,
    signaling_overhead,
)

__version__ = "0.1.0"
