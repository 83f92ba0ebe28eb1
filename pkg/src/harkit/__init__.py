"""harkit: streaming human-activity recognition from a knee-worn stretch
sensor and an accelerometer.

Pipeline: ingest (clock alignment, filtering, normalization) -> non-uniform
motion-driven segmentation -> FFT/DWT feature extraction (117 values) ->
compact softmax classifier -> optional online policy-gradient adaptation of
the output layer.
"""

from .errors import HarError, InputError, NumericError
from .evaluate import ConfusionMatrix, confusion_from_pairs, evaluate, majority_label
from .features import (
    FEATURE_DIM,
    FeaturePipeline,
    StandardizedSegment,
    assemble_features,
    body_accel,
    dwt_level1,
    fft_stretch,
    standardize_segment,
    subsample_smooth,
)
from .ingest import (
    LabelInterval,
    RawRecording,
    SensorStream,
    StreamingNormalizer,
    align_clocks,
    moving_average,
    normalize_stretch,
    parse_recording,
    preprocess,
    write_recording_csv,
)
from .labels import ActivityLabel, N_ACTIVITIES, encode_previous
from .model import (
    NetworkParams,
    Policy,
    SweepPoint,
    TrainConfig,
    TrainReport,
    classify,
    forward,
    init_params,
    load_model,
    save_model,
    sweep_hidden,
    train_supervised,
    weight_bytes,
    weight_count,
)
from .online import (
    EpisodeLog,
    LearnerConfig,
    RewardEvent,
    RewardMode,
    policy_gradient_wrt_outputs,
    run_experiment,
    run_feedback_session,
    session_accuracy,
    update_weights,
)
from .pipeline import PipelineResult, RecognizedActivity, build_labeled_dataset, run_pipeline, run_stream
from .segment import (
    Boundary,
    BoundaryCause,
    Segment,
    Trend,
    TrendState,
    classify_sign,
    derivative5,
    derivative5_series,
    detect_boundaries,
    segment_stream,
)
from .synth import (
    GroundTruthEvent,
    SynthConfig,
    SynthResult,
    UserProfile,
    default_script,
    generate_recording,
    generate_synthetic,
    new_user_profiles,
    training_profiles,
)

__version__ = "0.1.0"
