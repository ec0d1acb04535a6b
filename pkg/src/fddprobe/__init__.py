"""FDD massive-MIMO downlink probing and uplink feedback simulations."""

from .geometry import (
    ArrayConfig,
    Band,
    ChannelRealization,
    ScatterSpec,
    ScatteringFunction,
    analytic_covariance,
    angular_interval,
    dft_basis,
    dft_domain_variance,
    dl_array_response,
    overcomplete_dft,
    sample_channel,
    sample_common_interval,
    sample_scattering_function,
    ul_array_response,
)
from .harness import (
    ExperimentConfig,
    Method,
    ResultTable,
    TrialResult,
    ccdf,
    desk_config,
    load_config,
    paper_config,
    run_experiment,
    run_trial,
)
from .mmv import MMVProblem, MMVSolution, SolverOptions, prox_l21, solve_mmv
from .precoding import (
    EstimatedChannelSet,
    EstimationMethod,
    PrecoderMatrix,
    SingularChannelError,
    evaluate_sinr,
    jomp_estimate,
    ls_estimate,
    rates,
    zf_precoder,
)
from .probing import (
    ProbingKind,
    ProbingMatrix,
    antenna_selection_probing,
    choose_T,
    common_support,
    gaussian_probing,
    hybrid_probing,
    measure_downlink,
)
from .support import (
    Absolute,
    AngularSupport,
    EnergyCapture,
    SupportGrid,
    SupportSet,
    angular_support_from_ul,
    antenna_selection_matrix,
    dl_support_from_angular,
    estimate_ul_support,
    sketch_uplink,
)

__version__ = "0.1.0"
