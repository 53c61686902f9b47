"""Transmission capacity of multi-antenna ad hoc networks with spatial
interference cancellation: Monte Carlo simulator plus analytic bounds."""

from .analytic import (
    BoundReport,
    DerivedConstants,
    TrainingLength,
    capacity_loss_bound,
    delta_moment,
    jp_cdf,
    jp_pdf,
    kappas,
    mean_primary_interference,
    mean_total_interference,
    nu_coefficient,
    pout_lower,
    pout_upper,
    secondary_moments,
    tc_asymptotic_eps,
    tc_scaling_constants,
    training_length,
    training_length_scaling,
    w_neg_moment,
)
from .beamforming import (
    Beamformer,
    CsiEstimate,
    estimate_csi_explicit,
    post_cancellation_gain,
    residual_noise_shortcut,
    zf_mrc,
)
from .errors import (
    DegenerateChannelError,
    NumericalError,
    ParameterError,
    SearchError,
)
from .montecarlo import (
    MODES,
    OutageEstimate,
    TcResult,
    capacity,
    collect_trials,
    estimate_outage,
    invert_density,
    sir_imperfect,
    sir_perfect,
    write_outage_csv,
)
from .network import (
    CancellationSplit,
    Interferer,
    NetworkRealization,
    SystemParams,
    TrialBatch,
    sample_batch,
    sample_network,
    split_interferers,
    write_realization_csv,
)
from .specrand import (
    RngStream,
    log_gamma,
    regularized_gamma_q,
    sample_beta_1_m,
    sample_complex_gaussian_vector,
    sample_gamma_integer_shape,
    sample_poisson,
)

__version__ = "0.1.0"
