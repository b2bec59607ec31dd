"""End-to-end synthetic benchmark: LGNB against the MLP baseline.

Protocol: a multi-user corpus is split 80/10/10 (stratified) into train,
validation and test. For each model, 5-fold cross-validation on the train
split picks among candidate training configs. The chosen LGNB is refitted
on the train split, with the validation split added to its GNB stage.
The chosen MLP is refitted on train plus validation. Both are scored on
the untouched test split.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .datagen import GeneratorConfig, generate_population, weekly_windows
from .lgnb import fit_lgnb, labels_of, stratified_split, train_baseline
from .metrics import confusion, kfold_select, scores
from .nn import TrainingConfig

LGNB_CANDIDATES = (
    TrainingConfig(learning_rate=0.1, epochs=300, batch_size=128, l2_coeff=1e-5, dropout_keep=1.0),
    TrainingConfig(learning_rate=0.05, epochs=300, batch_size=128, l2_coeff=1e-5, dropout_keep=1.0),
)
MLP_CANDIDATES = (
    TrainingConfig(learning_rate=0.05, epochs=1000, batch_size=32, l2_coeff=1e-4, dropout_keep=1.0),
    TrainingConfig(learning_rate=0.05, epochs=1000, batch_size=32, l2_coeff=1e-4, dropout_keep=0.9),
    TrainingConfig(learning_rate=0.01, epochs=1000, batch_size=32, l2_coeff=1e-4, dropout_keep=1.0),
)


@dataclass
class BenchmarkResult:
    lgnb: object  # Scores
    mlp: object
    lgnb_cm: object
    mlp_cm: object
    lgnb_config: TrainingConfig
    mlp_config: TrainingConfig
    lgnb_cv: object
    mlp_cv: object
    sizes: dict
    seconds: dict = field(default_factory=dict)
    model: object = None


def build_corpus(users=4, weeks_per_user=50, seed=2024, **generator):
    cfg = GeneratorConfig(weeks=weeks_per_user, seed=seed, **generator)
    corpora = generate_population(cfg, users)
    return [w for u, ls in enumerate(corpora) for w in weekly_windows(ls, 4, f"user{u}")]


def run_benchmark(samples=None, seed=2024, cv_seed=7, lgnb_candidates=LGNB_CANDIDATES,
                  mlp_candidates=MLP_CANDIDATES, log=print):
    if samples is None:
        samples = build_corpus(seed=seed)
    y = labels_of(samples)
    tr, va, te = stratified_split(y, [0.8, 0.1, 0.1], seed)
    train = [samples[i] for i in tr]
    val = [samples[i] for i in va]
    test = [samples[i] for i in te]
    sizes = {"train": len(train), "validation": len(val), "test": len(test),
             "test_anomalies": int(y[te].sum()), "anomalies": int(y.sum())}
    log(f"corpus {len(samples)} weeks, splits {sizes}")
    seconds = {}

    t0 = time.perf_counter()
    lgnb_cv = kfold_select(lgnb_candidates, train, lambda c, s: fit_lgnb(s, c), k=5, seed=cv_seed)
    lgnb_model = fit_lgnb(train, lgnb_cv.best, gnb_samples=val)
    lgnb_cm = confusion(lgnb_model.predict(test), y[te])
    seconds["lgnb"] = time.perf_counter() - t0
    log(f"LGNB cv means {lgnb_cv.mean_scores} -> candidate {lgnb_cv.best_index}; "
        f"test {lgnb_cm} ({seconds['lgnb']:.0f}s)")

    t0 = time.perf_counter()
    mlp_cv = kfold_select(mlp_candidates, train,
                          lambda c, s: train_baseline("mlp", s, c), k=5, seed=cv_seed)
    mlp_model = train_baseline("mlp", train + val, mlp_cv.best)
    mlp_cm = confusion(mlp_model.predict(test), y[te])
    seconds["mlp"] = time.perf_counter() - t0
    log(f"MLP cv means {mlp_cv.mean_scores} -> candidate {mlp_cv.best_index}; "
        f"test {mlp_cm} ({seconds['mlp']:.0f}s)")

    return BenchmarkResult(scores(lgnb_cm), scores(mlp_cm), lgnb_cm, mlp_cm,
                           lgnb_cv.best, mlp_cv.best, lgnb_cv, mlp_cv, sizes, seconds, lgnb_model)
