"""
A synthetic year of meter readings
==================================

Generate a labelled corpus, look at its weekly structure and reduce the
weekly samples with PCA.
"""

import numpy as np

from edgelgnb.datagen import GeneratorConfig, generate, shape_ok, weekly_windows
from edgelgnb.series import FeatureMatrix, autocorr, downsample, minmax_fit_transform, pca_fit, pca_project

# 52 weeks of 15-minute readings, about one anomalous week in ten
cfg = GeneratorConfig(weeks=52, seed=7)
ls = generate(cfg)
print(f"{len(ls.series)} readings, {ls.labels.sum()} anomalous weeks")
print("kinds:", sorted(k for k in ls.kinds if k))

# hourly resolution is enough; the load repeats strongly at short lags
hourly = downsample(ls.series, 4)
for lag in (1, 10, 24, 168):
    print(f"autocorrelation at lag {lag:3d}: {autocorr(hourly, lag):+.3f}")

# one sample per week; the shape predicate flags what the generator injected
windows = weekly_windows(ls)
flags = np.array([shape_ok(w.features, cfg) for w in windows])
print("weeks with the normal shape:", int(flags.sum()), "of", len(windows))

# two principal components already separate most anomalous weeks
X, _ = minmax_fit_transform(FeatureMatrix(np.stack([w.features for w in windows])))
pca = pca_fit(X, 2)
Z = pca_project(pca, X).data
print("explained variance ratio:", np.round(pca.explained_variance_ratio, 3))
for label, name in ((0, "normal"), (1, "anomaly")):
    centre = Z[ls.labels == label].mean(axis=0)
    print(f"{name:8s} centroid in PC space: {np.round(centre, 3)}")
