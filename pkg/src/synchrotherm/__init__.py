"""Rate-graph analysis of thermalization in partially coupled composite quantum systems."""

from .bath import BathSpec, bose_occupation, rate, spectral_density
from .blockade import BlockadeConfig, BlockadeRun, fit_log_slope, run_blockade
from .dynamics import (
    PopulationVector,
    Trajectory,
    distance_to,
    evolve,
    null_space_steady_state,
    relaxation_rate_estimate,
)
from .errors import ConfigError, IntegrationError, SynchrothermError, TruncationError, ValidationError
from .fock import (
    FockTruncation,
    FranckCondonTable,
    displacement_matrix,
    franck_condon,
    max_fc_element,
    multi_fc_factor,
    oracle_displacement_matrix,
)
from .models import (
    DispersiveSpec,
    NDModelSpec,
    build_dispersive,
    build_generic_composite,
    build_nd_model,
    effective_couplings,
)
from .rate_graph import (
    ConnectivityReport,
    RateMatrix,
    SteadyStatePrediction,
    build_rate_matrix,
    connectivity,
    detailed_balance_violation,
    mixture_state,
    predict_steady_state,
    verify_stationarity,
)
from .spectral_core import (
    CouplingChannel,
    EigenBasis,
    HermitianOperator,
    SpectralComponent,
    eigendecompose,
    spectral_decompose,
)

__version__ = "0.1.0"
