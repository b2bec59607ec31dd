import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgelgnb.datagen import (
    ANOMALY,
    NORMAL,
    SAMPLES_PER_DAY,
    SAMPLES_PER_WEEK,
    GeneratorConfig,
    LabeledSeries,
    generate,
    generate_population,
    read_labels,
    shape_ok,
    weekly_windows,
    write_corpus,
)
from edgelgnb.series import TimeSeries, autocorr, downsample, read_csv


def noiseless(**kw):
    return GeneratorConfig(noise_std=0.0, jitter_minutes=0.0, **kw)


def test_zero_anomaly_rate_is_all_normal():
    ls = generate(GeneratorConfig(weeks=30, anomaly_rate=0.0, seed=1))
    assert np.all(ls.labels == NORMAL)
    assert set(ls.kinds) == {""}


def test_length_and_completeness():
    ls = generate(GeneratorConfig(weeks=3, seed=2))
    assert len(ls.series) == 3 * SAMPLES_PER_WEEK == 3 * 96 * 7
    assert ls.series.complete and np.all(np.isfinite(ls.series.values))
    assert ls.series.interval == 900.0


def test_noiseless_week_has_five_weekday_peaks_exactly():
    cfg = noiseless(weeks=1, anomaly_rate=0.0)
    week = downsample(generate(cfg).series, 4).values
    thr = cfg.base_load + 0.5 * cfg.peak_amplitude
    # direct count of strict local maxima above the threshold
    maxima = [t for t in range(1, week.size - 1)
              if week[t] > thr and week[t] > week[t - 1] and week[t] >= week[t + 1]]
    days = [t // 24 for t in maxima]
    assert days == [0, 1, 2, 3, 4]
    assert not np.any(week[5 * 24:] > thr)
    assert shape_ok(week, cfg)


@pytest.mark.parametrize("kind", ["weekday_trough", "weekend_crest"])
def test_every_anomaly_week_violates_predicate(kind):
    cfg = GeneratorConfig(weeks=40, anomaly_rate=0.5, anomaly_kinds=(kind,), seed=4)
    ls = generate(cfg)
    windows = weekly_windows(ls)
    assert ls.labels.sum() > 5
    for w, kinds in zip(windows, ls.kinds):
        if w.label == ANOMALY:
            assert kinds == kind
            assert not shape_ok(w.features, cfg)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32), rate=st.floats(0, 1))
def test_predicate_separates_noiseless_weeks(seed, rate):
    cfg = GeneratorConfig(weeks=6, noise_std=0.0, anomaly_rate=rate, seed=seed)
    ls = generate(cfg)
    for w in weekly_windows(ls):
        assert shape_ok(w.features, cfg) == (w.label == NORMAL)


def test_anomaly_fraction_close_to_rate():
    for seed in range(5):
        ls = generate(GeneratorConfig(weeks=400, anomaly_rate=0.1, seed=seed))
        assert abs(ls.labels.mean() - 0.1) <= 0.03


def test_same_seed_bitwise_identical():
    a = generate(GeneratorConfig(weeks=5, seed=9))
    b = generate(GeneratorConfig(weeks=5, seed=9))
    assert a.series.values.tobytes() == b.series.values.tobytes()
    assert np.array_equal(a.labels, b.labels) and a.kinds == b.kinds
    c = generate(GeneratorConfig(weeks=5, seed=10))
    assert not np.array_equal(a.series.values, c.series.values)


def test_default_lag10_autocorrelation_above_half():
    ls = generate(GeneratorConfig(seed=0))
    coarse = downsample(ls.series, 4)
    assert autocorr(coarse, 10) > 0.5


def test_weekly_windows_geometry_and_labels():
    ls = generate(GeneratorConfig(weeks=52, seed=3))
    w = weekly_windows(ls, 4)
    assert len(w) == 52 and all(s.features.shape == (168,) for s in w)
    assert [s.label for s in w] == ls.labels.tolist()


def test_weekly_windows_drops_partial_week():
    ls = generate(GeneratorConfig(weeks=52, seed=3))
    extra = np.concatenate([ls.series.values, np.ones(3 * SAMPLES_PER_DAY)])
    longer = LabeledSeries(TimeSeries(ls.series.start_time, 900.0, extra), ls.labels, ls.kinds)
    assert len(weekly_windows(longer, 4)) == 52


def test_weekly_windows_rejects_bad_factor():
    ls = generate(GeneratorConfig(weeks=1))
    with pytest.raises(ValueError):
        weekly_windows(ls, 5)


def test_population_users_differ_and_are_seeded():
    a = generate_population(GeneratorConfig(weeks=2, seed=5), users=3)
    b = generate_population(GeneratorConfig(weeks=2, seed=5), users=3)
    assert len(a) == 3
    for x, y in zip(a, b):
        assert np.array_equal(x.series.values, y.series.values)
    assert a[0].config.base_load != a[1].config.base_load


def test_config_validation():
    for bad in ({"weeks": 0}, {"anomaly_rate": 1.5}, {"noise_std": -1},
                {"anomaly_kinds": ("spike",)}, {"interval": 60.0}):
        with pytest.raises(ValueError):
            GeneratorConfig(**bad)


def test_corpus_roundtrip(tmp_path):
    ls = generate(GeneratorConfig(weeks=4, anomaly_rate=0.5, seed=8))
    series_path, labels_path = write_corpus(ls, tmp_path / "c.csv")
    assert labels_path.name == "c.labels.csv"
    back = read_csv(series_path)
    assert np.array_equal(back.values, ls.series.values)
    labels, kinds = read_labels(labels_path)
    assert np.array_equal(labels, ls.labels) and kinds == ls.kinds
