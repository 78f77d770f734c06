"""Camera-pulse estimation and shared biofeedback sessions.

The pipeline runs green-channel face traces through a Morlet wavelet ridge
to an instantaneous heart rate, validates estimates against reference beat
recordings, serves live multi-seat sessions with controlled rate visibility,
and scores the accompanying questionnaire study.
"""

from .errors import (
    BoundsError,
    ConfigError,
    DegeneratePairs,
    IncompleteDesign,
    InsufficientData,
    InsufficientOverlap,
    ParseError,
    PipelineError,
    RoutingError,
    SequencingError,
    TimeRegression,
    UndefinedCorrelation,
)
from .estimator import (
    BeatPhase,
    EstimatorConfig,
    HrTrace,
    StreamingEstimator,
    advance_phase,
    estimate_hr,
    extract_ridge,
    fft_hr_baseline,
)
from .frames import Frame, Roi, mean_channel, parse_ppm, serialize_ppm
from .session import (
    Condition,
    SessionState,
    apply_operator_command,
    ingest_estimate,
    new_session,
    push_bpm,
    render_state,
    schedule_conditions,
    visible,
)
from .spgq import (
    DEFAULT_MAPPING,
    SpgqResponse,
    SubscaleMapping,
    condition_report,
    score_subscales,
)
from .stats import TestResult, fdr_adjust, friedman, wilcoxon_signed_rank
from .synth import SynthSpec, noise_sigma_for_snr_db, synth_ppg
from .trace import Trace, detrend, resample_uniform
from .validate import RrSeries, ValidationReport, align_and_compare, pearson, rr_to_hr
from .wavelet import DEFAULT_BAND, CardiacBand, morlet_cwt, scales_for_band

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
