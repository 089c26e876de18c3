"""Adversarial attacks and defenses for eye-movement document classifiers.

Pipeline: raw gaze streams -> fixation/blink/saccade events -> 54-feature
sliding windows -> RBF SVM (white-box target) and random forest (transfer
target) -> gradient attacks, distance evaluation, adversarial retraining.
"""

from .attacks import (
    AttackConfig,
    AttackResult,
    EpsSelection,
    RawAttackConfig,
    fgsm_minimal,
    fgsm_standard,
    minimal_sweep,
    raw_blackbox_attack,
    select_eps,
)
from .dataset import RecordingMeta, load_dataset, load_recording, save_recording
from .defense import DefenseConfig, RetrainResult, adversarial_retrain, evaluate_defense
from .evaluation import (
    DistanceStats,
    EvaluationReport,
    Fold,
    WelchResult,
    distance_stats,
    emit_report,
    evaluate_attack,
    lopo_folds,
    transfer_evaluate,
    welch_t_test,
)
from .events import (
    Blink,
    EventStream,
    Fixation,
    GazeSample,
    GazeStream,
    Saccade,
    derive_saccades,
    detect_blinks,
    detect_events,
    detect_fixations,
    encode_saccade,
)
from .experiment import ExperimentConfig, ExperimentError, run_experiment
from .features import (
    FEATURE_NAMES,
    FeatureTable,
    FeatureVector,
    WindowConfig,
    Wordbook,
    extract_features,
    extract_table,
    load_features,
    reading_features,
    save_features,
    slide_windows,
    wordbook_features,
)
from .forest import (
    RandomForestModel,
    RfTrainConfig,
    rf_predict,
    rf_predict_batch,
    sweep_rf_grid,
    train_rf,
)
from .serialize import load_model, save_model
from .svm import (
    SvmRbfModel,
    SvmTrainConfig,
    svm_loss_gradient,
    svm_predict,
    svm_predict_batch,
    svm_surrogate_loss,
    train_svm,
)
from .synth import DEFAULT_PROFILES, SynthProfile, generate_stream, synth_generate

__version__ = "0.1.0"
