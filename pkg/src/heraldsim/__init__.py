"""Simulation and analysis of a heralded single-photon source with a quantum memory and feed-forward."""

from .estimators import (
    CountAccumulator,
    EstimateWithError,
    UndefinedEstimate,
    accumulate,
    alpha_estimate,
    g2_estimate,
    herald_fraction,
    merge,
)
from .model import (
    DetectionProbabilities,
    PhysicalParams,
    conditional_feedback_probability,
    cumulative_excitation_probability,
    detection_probabilities,
    g2_cross,
    g2_of_delay,
    pair_number_distribution,
    retrieve_efficiency,
)
from .oracle import ClickPatternDistribution, exact_alpha, exact_click_distribution, feedback_alpha
from .protocol import Mode, ProtocolConfig, ProtocolState, advance, storage_delay
from .sampler import RunConfig, TrialRecord, run_batch, sample_trial

__version__ = "0.1.0"
