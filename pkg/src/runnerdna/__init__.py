"""Interpretable movement indicators and random-forest activity/identity models
from smartphone sensor logs."""

from .dna import (
    INDICATORS,
    RawDna,
    RunnerDna,
    approximate_entropy,
    compute_dna_raw,
    fit_polynomial_rmse,
    gaussian_nll,
    normalize_dna,
)
from .evaluation import ConfusionMatrix, TTestResult, accuracy, confusion_matrix, kappa, students_t, t_p_value
from .features import (
    Dataset,
    FeatureVector,
    ImportanceRanking,
    extract_feature_vector,
    mean_decrease_accuracy,
    select_top_features,
    shannon_entropy,
    summary_features,
    zero_crossing_rate,
)
from .forest import Forest, ForestParams, bootstrap_sample, oob_error, predict, train_forest
from .gps import haversine_velocity, point_acceleration, track_kinematics
from .ingest import (
    ActivityRecord,
    Activity,
    AlignPolicy,
    Axis,
    GpsPoint,
    Sensor,
    VolunteerProfile,
    align_series,
    parse_activity_csv,
)

__version__ = "0.1.0"
