"""Weekly load-curve anomaly detection with an LSTM forecaster and Gaussian Naive Bayes,
plus a queueing simulator for comparing edge and cloud serving."""

from .datagen import GeneratorConfig, LabeledSeries, WindowSample, generate, weekly_windows
from .edgesim import DeploymentConfig, ModelProfile, Workload, compare_profiles, delay_curve, simulate
from .lgnb import GnbModel, LgnbModel, fit_lgnb, gnb_fit, gnb_predict, lgnb_detect, train_baseline
from .metrics import ConfusionMatrix, Scores, confusion, kfold_select, scores
from .series import FeatureMatrix, TimeSeries

__version__ = "0.1.0"

__all__ = [
    "GeneratorConfig", "LabeledSeries", "WindowSample", "generate", "weekly_windows",
    "DeploymentConfig", "ModelProfile", "Workload", "compare_profiles", "delay_curve", "simulate",
    "GnbModel", "LgnbModel", "fit_lgnb", "gnb_fit", "gnb_predict", "lgnb_detect", "train_baseline",
    "ConfusionMatrix", "Scores", "confusion", "kfold_select", "scores",
    "FeatureMatrix", "TimeSeries",
]
