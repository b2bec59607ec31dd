import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgelgnb.edgesim import (
    DeploymentConfig,
    ModelProfile,
    Workload,
    compare_profiles,
    delay_curve,
    load_deployment,
    load_profile,
    simulate,
)


def plain(threads=1, P=100.0, T=50.0, **kw):
    return DeploymentConfig("edge", threads, P, T, **kw)


def time_average_in_system(events):
    t, n = events[:, 0], events[:, 3]
    return float(np.sum(n[:-1] * np.diff(t)) / (t[-1] - t[0]))


def test_single_request_cold_thread():
    dep = DeploymentConfig("cloud", 1, prediction_ms=100, transfer_ms=250,
                           activation_penalty_ms=9, activation_idle_threshold_ms=5)
    trace = simulate(dep, Workload(1.0, 1.0))
    assert trace.generated.size == 1
    assert trace.delays_ms.tolist() == [250 + 9 + 100]


def test_utilisation_matches_rate_times_service():
    dep = plain(threads=2, P=100.0)
    w = Workload(rate_per_thread=5.0, duration_s=400.0)
    trace = simulate(dep, w)
    util = trace.busy_us.sum() / (dep.threads * w.duration_s * 1e6)
    assert util == pytest.approx(5.0 * 0.1, rel=0.02)


def test_overload_delay_grows_with_duration():
    dep = plain(P=100.0)
    means = [simulate(dep, Workload(12.0, d)).delays_ms.mean() for d in (5, 10, 20, 40)]
    assert all(b > a for a, b in zip(means, means[1:]))


def test_contention_free_delay_is_flat():
    dep = plain(threads=3, P=50.0, T=80.0)
    report = delay_curve(dep, [1, 2, 4, 8, 15], duration_s=5)
    assert set(report.column("mean_ms")) == {130.0}
    assert set(report.column("max_ms")) == {130.0}


@settings(max_examples=25, deadline=None)
@given(threads=st.integers(1, 4), P=st.integers(5, 120), T=st.integers(1, 300),
       jitter=st.integers(0, 40), A=st.integers(0, 20), idle=st.integers(0, 50),
       rate=st.floats(0.5, 15.0), arrival=st.sampled_from(["uniform", "poisson"]),
       cap=st.none() | st.integers(1, 5), seed=st.integers(0, 2**32))
def test_trace_invariants(threads, P, T, jitter, A, idle, rate, arrival, cap, seed):
    dep = DeploymentConfig("cloud", threads, P, T, jitter, A, idle, cap)
    trace = simulate(dep, Workload(rate, 3.0, arrival), seed=seed, record_events=True)
    ev = trace.events
    if ev.size:
        # conservation at every event
        assert np.array_equal(ev[:, 1], ev[:, 2] + ev[:, 3] + ev[:, 4])
        assert np.all(np.diff(ev[:, 0]) >= 0)
        assert ev[-1, 3] == 0
    ok = ~trace.dropped
    assert np.all(trace.arrival >= trace.generated)
    assert np.all(trace.start[ok] >= trace.arrival[ok])
    assert np.all(trace.completion[ok] >= trace.start[ok] + P * 1000)
    assert np.all(trace.completion[trace.dropped] == -1)
    for th in range(threads):
        mine = np.flatnonzero((trace.thread == th) & ok)
        order = mine[np.argsort(trace.start[mine], kind="stable")]
        assert np.all(trace.start[order][1:] >= trace.completion[order][:-1])
        # FIFO: service order follows arrival order
        assert np.all(np.diff(trace.arrival[order]) >= 0)
    assert np.all(trace.thread == np.arange(trace.thread.size) % threads)


def test_bounded_queue_drops_are_recorded():
    dep = plain(P=100.0, queue_capacity=2)
    trace = simulate(dep, Workload(30.0, 2.0), record_events=True)
    assert trace.n_dropped > 0
    assert trace.n_dropped + int(np.sum(~trace.dropped)) == trace.generated.size
    assert trace.events[-1, 4] == trace.n_dropped


def test_littles_law_on_long_stable_run():
    dep = plain(threads=2, P=100.0, T=40.0, transfer_jitter_ms=10.0)
    w = Workload(rate_per_thread=6.0, duration_s=9000.0, arrival="poisson", seed=1)
    trace = simulate(dep, w, record_events=True)
    n = trace.generated.size
    assert n >= 100_000
    ev = trace.events
    L = time_average_in_system(ev)
    lam = n / ((ev[-1, 0] - ev[0, 0]) / 1e6)
    W = trace.delays_ms.mean() / 1e3
    assert L == pytest.approx(lam * W, rel=0.05)


def test_same_seed_bitwise_identical():
    dep = load_deployment("cloud_default")
    a = simulate(dep, Workload(9.0, 5.0, "poisson"), seed=4, record_events=True)
    b = simulate(dep, Workload(9.0, 5.0, "poisson"), seed=4, record_events=True)
    for name in ("generated", "arrival", "start", "completion", "thread", "events"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_report_rows_are_ordered():
    report = delay_curve(load_deployment("cloud_default"), range(1, 13), seed=2, arrival="poisson")
    for r in report.rows:
        assert r.p50_ms <= r.p95_ms <= r.max_ms


def test_delay_curve_needs_a_volume():
    with pytest.raises(ValueError):
        delay_curve(plain(), [])


def test_config_validation():
    with pytest.raises(ValueError):
        DeploymentConfig("fog", 1, 1, 1)
    with pytest.raises(ValueError):
        DeploymentConfig("edge", 0, 1, 1)
    with pytest.raises(ValueError):
        DeploymentConfig("edge", 1, 0, 1)
    with pytest.raises(ValueError):
        Workload(0.0, 1.0)
    with pytest.raises(ValueError):
        Workload(1.0, 1.0, "bursty")


# --- calibrated defaults ---------------------------------------------------

@pytest.fixture(scope="module")
def cloud_curve():
    return delay_curve(load_deployment("cloud_default"), range(1, 13), seed=0).column("mean_ms")


def test_cloud_curve_shape(cloud_curve):
    m = cloud_curve
    assert np.all(np.abs(m[:6] - 393.0) <= 0.05 * 393.0)
    assert int(np.argmin(m)) == 7
    assert abs(m[7] - 384.7) <= 0.05 * 384.7
    assert np.all(np.diff(m[7:]) > 0)


def test_edge_curve_flat_near_320():
    m = delay_curve(load_deployment("edge_default"), range(1, 13), seed=0).column("mean_ms")
    assert np.all(np.abs(m - 320.0) <= 0.05 * 320.0)


def test_edge_transfer_below_cloud():
    assert load_deployment("edge_default").transfer_ms < load_deployment("cloud_default").transfer_ms


# --- profiles -------------------------------------------------------------

def test_shipped_profile_deltas():
    rep = compare_profiles(load_profile("lgnb_profile"), load_profile("cinc2017_profile"))
    d = rep["deltas"]
    assert d["model_size_mb"] == -1.65
    assert d["memory_mb"] == -23.0
    assert d["f1"] < 0 and d["prediction_ms"] < 0
    assert rep["winners"]["model_size_mb"] == rep["a"]
    assert rep["winners"]["f1"] == rep["b"]


def test_profile_self_comparison_and_antisymmetry():
    a, b = load_profile("lgnb_profile"), load_profile("cinc2017_profile")
    assert all(v == 0 for v in compare_profiles(a, a)["deltas"].values())
    ab, ba = compare_profiles(a, b)["deltas"], compare_profiles(b, a)["deltas"]
    assert all(ab[k] == -ba[k] for k in ab)


def test_profile_validation():
    with pytest.raises(ValueError):
        ModelProfile("x", 1.2, 1, 1, 1.0)


def test_unknown_config_document():
    with pytest.raises(FileNotFoundError):
        load_deployment("no_such_config")
