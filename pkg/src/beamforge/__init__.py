"""Learn-to-select design of sparse hybrid analog-digital radar beampatterns."""

from .array import AngleGrid, ArrayGeometry, TargetPattern, pattern_from_intervals, steering_matrix, steering_vector
from .config import ConfigError, ExperimentConfig, load_config
from .forward import (
    DimensionError,
    PhaseNetwork,
    Precoder,
    SnapshotBatch,
    beampattern_error,
    closed_form_power,
    draw_snapshots,
    empirical_power,
    soft_forward,
    total_loss,
)
from .runner import RunResult, emit_outputs, run
from .selection import HardSelection, SoftSelector, harden, hardness_report, orthonormality_penalty, soft_matrix
from .trainer import DivergenceError, NumericalError, Problem, TrainPlan, alpha_at, train

__version__ = "0.1.0"
