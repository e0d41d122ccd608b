"""Position-aided mmWave beam alignment for vehicle-to-infrastructure links."""

from .channel import (
    ArrayOrientation,
    Path,
    PathSet,
    PropagationConfig,
    assemble_channel,
    receive_power,
    trace_paths,
)
from .codebook import (
    AngularSector,
    ArrayGeometry,
    Codebook,
    EmptyCoverageError,
    beam_gain,
    beams_covering_sector,
    build_dft_codebook,
    steering_vector,
)
from .experiment import ExperimentConfig, compute_cdf, load_config, run_experiment
from .prior import CandidatePairs, CellPrior, GridSpec, PriorDatabase, build_prior, candidate_pairs_for_cell, locate_cell
from .scene import Box, Scene, TrafficConfig, antenna_position, sample_snapshot, select_communicating_vehicle
from .search import AlignmentResult, PowerMeter, exhaustive_search, power_loss_db, restricted_search

__version__ = "0.1.0"
