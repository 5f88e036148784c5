"""Cascaded parametric-amplifier simulation in truncated Fock space.

Builds photon-added coherent states by conditioning on single-photon
detection in the idler channels of a chain of two-mode squeezers, and
extracts the N-mode single-excitation (W) state heralded by identifying the
one-photon-added signal.
"""

from .analysis import (
    PhotonStatistics,
    ScalingFit,
    WignerGrid,
    WStateResult,
    extract_w_state,
    fit_power_law,
    photon_statistics,
    w_state_reference,
    wigner,
)
from .detection import (
    IMPOSSIBLE_PROBABILITY,
    ClickPattern,
    ConditionalState,
    DetectorModel,
    PatternOutcome,
    ProjectionResult,
    click_probability_given_n,
    condition_on_pattern,
    enumerate_patterns,
    orthogonalized_reference,
    project_signal,
)
from .dynamics import (
    DEFAULT_AMPLITUDE_BUDGET,
    ChainConfig,
    StageParams,
    orthogonality_defect,
    perturbative_output,
    run_chain_full,
    run_chain_sequential,
    stage_generator,
    stage_unitary,
)
from .errors import (
    DimensionBudgetError,
    ScenarioError,
    StrongCouplingWarning,
    TruncationError,
    TruncationWarning,
)
from .fock import (
    LadderResult,
    ModeSpec,
    MultiMode,
    PureState,
    WeightedEnsemble,
    coherent_state,
    default_signal_dim,
    fidelity_ensemble,
    fidelity_pure,
    fock_state,
    ladder_apply,
    laguerre,
    laguerre_recurrence,
    laguerre_series,
    mean_photon_number,
    pacs_state,
    partial_trace_to_marginal,
    single_mode,
    tensor,
)

__version__ = "0.1.0"
