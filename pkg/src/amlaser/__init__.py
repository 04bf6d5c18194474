"""Truncated-Fock simulations of an atom-molecule output coupler."""
from .errors import (
    AmlaserError,
    BasisMismatchError,
    ConfigurationError,
    NonHermitianError,
    NormDriftError,
    UndefinedStatisticError,
    UnknownModeError,
)
from .fock import FockBasis, ModeSet, SparseOperator, TruncationSpec, build_basis
from .models import (
    FIVE_MODES,
    FOUR_MODES,
    THREE_MODES,
    FiveModeParams,
    FourModeParams,
    ThreeModeParams,
    build_h3,
    build_h4,
    build_h5,
    five_mode_basis,
    four_mode_basis,
    three_mode_basis,
)
from .observables import (
    CorrelationReport,
    ObservableSeries,
    SqueezingReport,
    csi_check,
    g2_auto,
    g2_cross,
    mandel_q,
    population,
    series_report,
    squeezing,
)
from .propagator import EvolveConfig, Propagator, TimeGrid, evolve, evolve_series
from .states import (
    CoherentSpec,
    SqueezeSpec,
    StateVector,
    TwoModeSqueezeSpec,
    default_cutoff,
    default_pair_cutoff,
    fock,
    prepare,
)

__version__ = "0.1.0"
