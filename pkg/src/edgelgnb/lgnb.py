"""LSTM forecaster + Gaussian Naive Bayes anomaly detector, and the baselines.

Flow for one detector:

1. scale windows to [0, 1] with a single global min/max,
2. train a two-layer LSTM to predict each point of a week from the points
   before it (normal weeks only),
3. run weeks the forecaster never trained on through it and keep the signed
   one-step residuals after a warm-up of ``context`` points,
4. fit a two-class Gaussian Naive Bayes model on those residual vectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .datagen import ANOMALY, NORMAL, WindowSample
from .nn import TrainingConfig, build_network, loss, network_from_dict, network_to_dict, stack_spec
from .nn.network import FORMAT_VERSION, decode_array, dumps, encode_array
from .nn.optim import train
from .series import FeatureMatrix, ScaleParams, minmax_fit, minmax_transform

DEFAULT_CONTEXT = 8
MLP_HIDDEN = (10, 20, 10)


class UntrainedModelError(RuntimeError):
    pass


def as_matrix(samples) -> np.ndarray:
    """Stack window features into ``(n, length)``; all windows must agree in length."""
    samples = list(samples)
    if not samples:
        raise ValueError("no samples")
    length = samples[0].features.shape[0]
    if any(s.features.shape[0] != length for s in samples):
        raise ValueError("all windows must share one feature length")
    return np.stack([np.asarray(s.features, dtype=np.float64) for s in samples])


def labels_of(samples) -> np.ndarray:
    return np.array([s.label for s in samples], dtype=int)


# ----------------------------------------------------------------------
# normalisation
# ----------------------------------------------------------------------

def fit_scale(samples) -> ScaleParams:
    """One min/max pair over every value of every window."""
    return minmax_fit(FeatureMatrix(as_matrix(samples).reshape(-1, 1)))


def apply_scale(samples, params: ScaleParams):
    X = as_matrix(samples)
    scaled = minmax_transform(FeatureMatrix(X.reshape(-1, 1)), params).data.reshape(X.shape)
    return [WindowSample(row, s.label, s.source_id) for row, s in zip(scaled, samples)]


# ----------------------------------------------------------------------
# forecaster
# ----------------------------------------------------------------------

@dataclass
class ForecastModel:
    """Per-step stacked LSTM that predicts ``x[t]`` from ``x[:t]``.

    Predictions for the first ``context`` positions are warm-up and are not
    scored, so a week of ``length`` points yields ``length - context``
    residuals.
    """

    network: object
    context: int
    length: int
    config: TrainingConfig = None
    history: list = field(default_factory=list)

    @property
    def n_residuals(self):
        return self.length - self.context

    def forecast(self, X) -> np.ndarray:
        """Predictions for positions ``context .. length-1`` of each row."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.length:
            raise ValueError(f"expected windows of length {self.length}, got shape {X.shape}")
        out = self.network.predict(X[:, :-1, None])[..., 0]
        return out[:, self.context - 1:]

    def to_dict(self):
        return {
            "network": network_to_dict(self.network),
            "context": self.context,
            "length": self.length,
            "config": self.config.to_dict() if self.config else None,
        }

    @classmethod
    def from_dict(cls, d):
        cfg = TrainingConfig.from_dict(d["config"]) if d.get("config") else None
        return cls(network_from_dict(d["network"]), int(d["context"]), int(d["length"]), cfg)


def forecaster_spec(config: TrainingConfig):
    return stack_spec(1, config.hidden[:2], 1, lstm_layers=2, head="regression",
                      sequence="per_step", dropout_keep=config.dropout_keep)


def train_forecaster(train_samples, config: TrainingConfig = TrainingConfig(),
                     context: int = DEFAULT_CONTEXT) -> ForecastModel:
    """Fit the forecaster on normal, [0, 1]-scaled windows.

    Every window is one training sequence; the MSE is taken over the
    one-step-ahead predictions at positions ``context`` onward.
    """
    samples = list(train_samples)
    if len(samples) < 10:
        raise ValueError(f"need at least 10 training windows, got {len(samples)}")
    if any(s.label != NORMAL for s in samples):
        raise ValueError("forecaster must be trained on normal windows only")
    X = as_matrix(samples)
    if X.min() < -1e-9 or X.max() > 1.0 + 1e-9:
        raise ValueError("training windows must be scaled to [0, 1] first")
    length = X.shape[1]
    if not 1 <= context < length:
        raise ValueError(f"context must be in [1, {length - 1}]")
    if len(config.hidden) < 2:
        raise ValueError("forecaster needs two hidden LSTM widths")

    net = build_network(forecaster_spec(config), seed=config.seed)
    inputs = X[:, :-1, None]
    targets = X[:, 1:, None]
    skip = context - 1

    def step_loss(pred, target):
        value, g = loss("mse", pred[:, skip:], target[:, skip:])
        grad = np.zeros_like(pred)
        grad[:, skip:] = g
        return value, grad

    history = train(net, inputs, targets, step_loss, config)
    return ForecastModel(net, context, length, config, history)


# ----------------------------------------------------------------------
# residuals and Gaussian NB
# ----------------------------------------------------------------------

@dataclass
class ResidualSet:
    residuals: np.ndarray  # (n, n_residuals), prediction minus actual
    labels: np.ndarray

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx):
        idx = np.asarray(idx)
        return ResidualSet(self.residuals[idx], self.labels[idx])


def build_error_set(model, samples) -> ResidualSet:
    """Signed one-step residuals of ``model`` over each window.

    ``model`` needs ``context``, ``length`` and ``forecast(X)``; anything
    with that shape (including a stub) works.
    """
    samples = list(samples)
    X = as_matrix(samples)
    if X.shape[1] != model.length:
        raise ValueError(f"window length {X.shape[1]} does not match forecaster length {model.length}")
    pred = model.forecast(X)
    return ResidualSet(pred - X[:, model.context:], labels_of(samples))


@dataclass
class GnbModel:
    priors: np.ndarray  # (2,) indexed by label
    means: np.ndarray  # (2, n_features)
    variances: np.ndarray  # (2, n_features)
    var_smoothing: float = 1e-9

    @property
    def n_features(self):
        return self.means.shape[1]

    def to_dict(self):
        return {"priors": encode_array(self.priors), "means": encode_array(self.means),
                "variances": encode_array(self.variances), "var_smoothing": float(self.var_smoothing)}

    @classmethod
    def from_dict(cls, d):
        return cls(decode_array(d["priors"]), decode_array(d["means"]),
                   decode_array(d["variances"]), float(d["var_smoothing"]))


def gnb_fit(residuals: ResidualSet, var_smoothing: float = 1e-9) -> GnbModel:
    """Per-class mean and population variance of each residual position.

    Variances are floored at ``var_smoothing`` times the largest per-feature
    variance over all records (or at ``var_smoothing`` itself when every
    record is identical). Priors are class frequencies.
    """
    if var_smoothing < 0:
        raise ValueError("var_smoothing must be nonnegative")
    R = np.asarray(residuals.residuals, dtype=np.float64)
    y = np.asarray(residuals.labels)
    if R.shape[0] == 0:
        raise ValueError("empty residual set")
    counts = [int(np.sum(y == c)) for c in (NORMAL, ANOMALY)]
    if min(counts) < 2:
        raise ValueError(f"need at least 2 records of each class, got {counts}")
    top = float(R.var(axis=0).max())
    floor = var_smoothing * top if top > 0 else var_smoothing
    means = np.stack([R[y == c].mean(axis=0) for c in (NORMAL, ANOMALY)])
    variances = np.stack([R[y == c].var(axis=0) for c in (NORMAL, ANOMALY)])
    variances = np.maximum(variances, floor)
    priors = np.array(counts, dtype=np.float64) / R.shape[0]
    return GnbModel(priors, means, variances, var_smoothing)


def gnb_log_posteriors(gnb: GnbModel, R) -> np.ndarray:
    """Unnormalised log posteriors, shape ``(n, 2)``."""
    R = np.atleast_2d(np.asarray(R, dtype=np.float64))
    if R.shape[1] != gnb.n_features:
        raise ValueError(f"expected {gnb.n_features} residual features, got {R.shape[1]}")
    out = np.empty((R.shape[0], 2))
    for c in (NORMAL, ANOMALY):
        var = gnb.variances[c]
        ll = -0.5 * (np.log(2.0 * np.pi * var) + (R - gnb.means[c]) ** 2 / var)
        out[:, c] = np.log(gnb.priors[c]) + ll.sum(axis=1)
    return out


def decide(log_post) -> np.ndarray:
    """Anomaly only on strictly larger evidence; ties go to normal."""
    log_post = np.atleast_2d(log_post)
    return np.where(log_post[:, ANOMALY] > log_post[:, NORMAL], ANOMALY, NORMAL)


def gnb_predict(gnb: GnbModel, residual):
    """Label and the two log posteriors for one residual vector."""
    residual = np.asarray(residual, dtype=np.float64)
    if residual.ndim != 1:
        raise ValueError("gnb_predict takes a single residual vector")
    lp = gnb_log_posteriors(gnb, residual[None, :])
    return int(decide(lp)[0]), lp[0]


# ----------------------------------------------------------------------
# composed detector
# ----------------------------------------------------------------------

@dataclass
class LgnbModel:
    forecaster: ForecastModel
    gnb: GnbModel
    scale: ScaleParams
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.forecaster is None or self.gnb is None or self.scale is None:
            raise UntrainedModelError("LGNB needs a trained forecaster, a fitted GNB and scale params")
        if self.forecaster.n_residuals != self.gnb.n_features:
            raise ValueError("forecaster residual length does not match GNB feature count")

    def normalize(self, samples):
        return apply_scale(samples, self.scale)

    def residuals(self, samples) -> ResidualSet:
        return build_error_set(self.forecaster, self.normalize(samples))

    def predict(self, samples) -> np.ndarray:
        return decide(gnb_log_posteriors(self.gnb, self.residuals(samples).residuals))

    def to_dict(self):
        return {"format": "edgelgnb.lgnb", "version": FORMAT_VERSION,
                "forecaster": self.forecaster.to_dict(), "gnb": self.gnb.to_dict(),
                "scale": self.scale.to_dict(), "meta": self.meta}

    @classmethod
    def from_dict(cls, d):
        return cls(ForecastModel.from_dict(d["forecaster"]), GnbModel.from_dict(d["gnb"]),
                   ScaleParams.from_dict(d["scale"]), d.get("meta", {}))


def lgnb_detect(model: LgnbModel, window: WindowSample):
    """Classify one raw (unscaled) window: ``(label, log_posteriors, residual)``."""
    if not isinstance(model, LgnbModel):
        raise UntrainedModelError("lgnb_detect needs a trained LgnbModel")
    rs = model.residuals([window])
    label, lp = gnb_predict(model.gnb, rs.residuals[0])
    return label, lp, rs.residuals[0]


def stratified_split(labels, fractions, seed):
    """Partition indices into len(fractions) groups keeping class ratios.

    Within each class the shuffled indices are cut at the rounded
    cumulative fractions.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    bounds = np.cumsum(fractions) / np.sum(fractions)
    groups = [[] for _ in fractions]
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        cuts = np.rint(bounds * idx.size).astype(int)
        start = 0
        for g, stop in enumerate(cuts):
            groups[g].extend(idx[start:stop].tolist())
            start = stop
    return [np.sort(np.array(g, dtype=int)) for g in groups]


def fit_lgnb(samples, config: TrainingConfig = TrainingConfig(), var_smoothing: float = 1e-9,
             context: int = DEFAULT_CONTEXT, holdout_fraction: float = 0.25,
             gnb_samples=None) -> LgnbModel:
    """Train the full detector on raw labelled windows.

    The scale is fitted on all of ``samples``. Normal windows are split
    (seeded by ``config.seed``) into a forecaster share and a
    ``holdout_fraction`` share; the GNB is fitted on residuals of the
    held-out normals, every anomalous window and any extra ``gnb_samples``,
    none of which the forecaster has seen.
    """
    samples = list(samples)
    y = labels_of(samples)
    scale = fit_scale(samples)
    scaled = apply_scale(samples, scale)
    normal_idx = np.flatnonzero(y == NORMAL)
    rng = np.random.default_rng([config.seed, 1])
    perm = rng.permutation(normal_idx)
    n_hold = int(round(holdout_fraction * perm.size))
    fore_idx = np.sort(perm[n_hold:])
    gnb_idx = np.sort(np.concatenate([perm[:n_hold], np.flatnonzero(y == ANOMALY)]))
    forecaster = train_forecaster([scaled[i] for i in fore_idx], config, context)
    gnb_windows = [scaled[i] for i in gnb_idx]
    if gnb_samples:
        gnb_windows += apply_scale(list(gnb_samples), scale)
    gnb = gnb_fit(build_error_set(forecaster, gnb_windows), var_smoothing)
    meta = {"seed": int(config.seed), "var_smoothing": float(var_smoothing),
            "holdout_fraction": float(holdout_fraction),
            "forecaster_windows": int(fore_idx.size), "gnb_windows": len(gnb_windows)}
    return LgnbModel(forecaster, gnb, scale, meta)


def save_lgnb(model: LgnbModel, path):
    with open(path, "w") as fh:
        fh.write(dumps(model.to_dict()))


def load_lgnb(path) -> LgnbModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "edgelgnb.lgnb":
        raise ValueError(f"{path}: not an LGNB model document")
    return LgnbModel.from_dict(doc)


# ----------------------------------------------------------------------
# baselines
# ----------------------------------------------------------------------

class Classifier:
    """Softmax network classifier over scaled windows."""

    def __init__(self, kind, network, scale, config=None, history=None):
        self.kind = kind
        self.network = network
        self.scale = scale
        self.config = config
        self.history = history or []

    def _inputs(self, samples):
        X = as_matrix(apply_scale(list(samples), self.scale))
        return X[:, :, None] if self.kind == "lstm_classifier" else X

    def predict_proba(self, samples):
        return self.network.predict(self._inputs(samples))

    def predict(self, samples):
        p = self.predict_proba(samples)
        return np.where(p[:, ANOMALY] > p[:, NORMAL], ANOMALY, NORMAL)

    def to_dict(self):
        return {"format": "edgelgnb.classifier", "version": FORMAT_VERSION, "kind": self.kind,
                "network": network_to_dict(self.network), "scale": self.scale.to_dict(),
                "config": self.config.to_dict() if self.config else None}

    @classmethod
    def from_dict(cls, d):
        cfg = TrainingConfig.from_dict(d["config"]) if d.get("config") else None
        return cls(d["kind"], network_from_dict(d["network"]), ScaleParams.from_dict(d["scale"]), cfg)


def baseline_spec(kind, n_features, config: TrainingConfig):
    if kind == "mlp":
        return stack_spec(n_features, MLP_HIDDEN, 2, head="classification",
                          activation="relu", dropout_keep=config.dropout_keep)
    if kind == "lstm_classifier":
        return stack_spec(1, config.hidden[:2], 2, lstm_layers=2, head="classification",
                          sequence="last_step", dropout_keep=config.dropout_keep)
    raise ValueError(f"unknown baseline kind {kind!r}")


def train_baseline(kind, samples, config: TrainingConfig = TrainingConfig()) -> Classifier:
    """Cross-entropy classifier: MLP with 10/20/10 hidden units, or 2-layer LSTM."""
    samples = list(samples)
    y = labels_of(samples)
    if len(np.unique(y)) < 2:
        raise ValueError("baseline training needs both classes present")
    scale = fit_scale(samples)
    X = as_matrix(apply_scale(samples, scale))
    if kind == "lstm_classifier":
        X = X[:, :, None]
    net = build_network(baseline_spec(kind, X.shape[-1] if kind == "mlp" else 1, config),
                        seed=config.seed)
    history = train(net, X, y, lambda p, t: loss("cross_entropy", p, t), config)
    return Classifier(kind, net, scale, config, history)


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(dumps(model.to_dict()))


def load_model(path):
    """Load either an LGNB document or a baseline classifier document."""
    with open(path) as fh:
        doc = json.load(fh)
    fmt = doc.get("format")
    if fmt == "edgelgnb.lgnb":
        return LgnbModel.from_dict(doc)
    if fmt == "edgelgnb.classifier":
        return Classifier.from_dict(doc)
    raise ValueError(f"{path}: unrecognised model document format {fmt!r}")
