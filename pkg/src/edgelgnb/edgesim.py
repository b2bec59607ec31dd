"""Discrete-event simulation of inference serving on a cloud or edge tier.

Requests are generated at the client, spend a transfer time on the
network, then join the FIFO queue of one service thread (round-robin by
request id). A thread that has been idle longer than its activation
threshold pays a wake-up penalty before serving. End-to-end delay runs
from generation to completion.

All times inside the event loop are integer microseconds.
"""

from __future__ import annotations

import csv
import heapq
import json
from collections import deque
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

US_PER_MS = 1000
US_PER_S = 1_000_000

# event kinds, in tie-break order at equal timestamps
_COMPLETE, _GENERATE, _ARRIVE = 0, 1, 2


def _us(ms):
    return int(round(ms * US_PER_MS))


@dataclass(frozen=True)
class DeploymentConfig:
    tier: str
    threads: int
    prediction_ms: float
    transfer_ms: float
    transfer_jitter_ms: float = 0.0  # uniform extra delay in [0, jitter]
    activation_penalty_ms: float = 0.0
    activation_idle_threshold_ms: float = 0.0
    queue_capacity: int | None = None  # waiting slots per thread; None = unbounded
    note: str = ""

    def __post_init__(self):
        if self.tier not in ("cloud", "edge"):
            raise ValueError(f"tier must be 'cloud' or 'edge', got {self.tier!r}")
        if int(self.threads) != self.threads or self.threads < 1:
            raise ValueError("threads must be a positive integer")
        if not self.prediction_ms > 0 or not self.transfer_ms > 0:
            raise ValueError("prediction and transfer times must be positive")
        if min(self.transfer_jitter_ms, self.activation_penalty_ms,
               self.activation_idle_threshold_ms) < 0:
            raise ValueError("jitter, penalty and threshold must be nonnegative")
        if self.queue_capacity is not None and (
                int(self.queue_capacity) != self.queue_capacity or self.queue_capacity < 1):
            raise ValueError("queue_capacity must be a positive integer or None")

    @property
    def capacity_per_thread(self):
        """Requests per second one thread can serve when always busy."""
        return 1000.0 / self.prediction_ms

    def to_dict(self):
        return {"schema_version": 1, **asdict(self)}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class Workload:
    rate_per_thread: float  # requests per thread per second
    duration_s: float
    arrival: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if not self.rate_per_thread > 0 or not self.duration_s > 0:
            raise ValueError("rate and duration must be positive")
        if self.arrival not in ("uniform", "poisson"):
            raise ValueError(f"arrival must be 'uniform' or 'poisson', got {self.arrival!r}")


@dataclass
class SimTrace:
    generated: np.ndarray  # per request, microseconds
    arrival: np.ndarray  # reached the server
    start: np.ndarray  # service start, -1 if dropped
    completion: np.ndarray  # -1 if dropped
    thread: np.ndarray
    dropped: np.ndarray  # bool
    busy_us: np.ndarray  # per-thread busy time within the run
    end_us: int
    events: np.ndarray = None  # (time, arrived, completed, in_system, dropped) per event
    max_queue: int = 0
    mean_queue: float = 0.0  # time-averaged waiting requests over all threads

    @property
    def delays_ms(self):
        ok = ~self.dropped
        return (self.completion[ok] - self.generated[ok]) / US_PER_MS

    @property
    def n_dropped(self):
        return int(self.dropped.sum())

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["request", "thread", "generated_us", "arrival_us", "start_us",
                        "completion_us", "dropped"])
            for i in range(self.generated.shape[0]):
                w.writerow([i, int(self.thread[i]), int(self.generated[i]), int(self.arrival[i]),
                            int(self.start[i]), int(self.completion[i]), int(self.dropped[i])])


def _generation_times(workload, threads, rng):
    rate = workload.rate_per_thread * threads
    horizon = int(round(workload.duration_s * US_PER_S))
    if workload.arrival == "uniform":
        n = int(np.floor(workload.duration_s * rate + 1e-9))
        return np.array([int(round(i * US_PER_S / rate)) for i in range(n)], dtype=np.int64)
    times, t = [], 0.0
    while True:
        t += rng.exponential(US_PER_S / rate)
        if t >= horizon:
            break
        times.append(int(round(t)))
    return np.array(times, dtype=np.int64)


def simulate(deployment: DeploymentConfig, workload: Workload, seed=None,
             record_events=False) -> SimTrace:
    """Run one simulation; ``seed`` overrides ``workload.seed`` when given."""
    rng = np.random.default_rng(workload.seed if seed is None else seed)
    N = deployment.threads
    gen = _generation_times(workload, N, rng)
    n = gen.shape[0]
    jitter = _us(deployment.transfer_jitter_ms)
    transfer = np.full(n, _us(deployment.transfer_ms), dtype=np.int64)
    if jitter:
        transfer += rng.integers(0, jitter + 1, size=n)
    arrive = gen + transfer
    P = _us(deployment.prediction_ms)
    A = _us(deployment.activation_penalty_ms)
    idle_limit = _us(deployment.activation_idle_threshold_ms)
    cap = deployment.queue_capacity

    start = np.full(n, -1, dtype=np.int64)
    done = np.full(n, -1, dtype=np.int64)
    thread_of = np.arange(n, dtype=np.int64) % N
    dropped = np.zeros(n, dtype=bool)
    queues = [deque() for _ in range(N)]
    serving = [None] * N
    last_free = [None] * N  # None = never active
    busy = np.zeros(N, dtype=np.int64)

    heap = [(int(g), _GENERATE, i) for i, g in enumerate(gen)]
    heapq.heapify(heap)
    counts = {"arrived": 0, "completed": 0, "dropped": 0, "transfer": 0, "queued": 0, "service": 0}
    log = [] if record_events else None
    q_area, q_last_t, q_max = 0, 0, 0

    def begin(th, rid, now):
        idle = last_free[th]
        penalty = A if (idle is None or now - idle > idle_limit) else 0
        serving[th] = rid
        start[rid] = now
        finish = now + penalty + P
        busy[th] += penalty + P
        heapq.heappush(heap, (finish, _COMPLETE, rid))

    while heap:
        now, kind, rid = heapq.heappop(heap)
        q_area += counts["queued"] * (now - q_last_t)
        q_last_t = now
        th = int(thread_of[rid])
        if kind == _GENERATE:
            counts["arrived"] += 1
            counts["transfer"] += 1
            heapq.heappush(heap, (int(arrive[rid]), _ARRIVE, rid))
        elif kind == _ARRIVE:
            counts["transfer"] -= 1
            if serving[th] is None:
                counts["service"] += 1
                begin(th, rid, now)
            elif cap is not None and len(queues[th]) >= cap:
                dropped[rid] = True
                counts["dropped"] += 1
            else:
                queues[th].append(rid)
                counts["queued"] += 1
                q_max = max(q_max, counts["queued"])
        else:
            done[rid] = now
            counts["completed"] += 1
            serving[th] = None
            last_free[th] = now
            if queues[th]:
                nxt = queues[th].popleft()
                counts["queued"] -= 1
                begin(th, nxt, now)
            else:
                counts["service"] -= 1
        if log is not None:
            in_system = counts["transfer"] + counts["queued"] + counts["service"]
            log.append((now, counts["arrived"], counts["completed"], in_system, counts["dropped"]))

    end = int(max(done.max(initial=0), arrive.max(initial=0)))
    events = np.array(log, dtype=np.int64) if log is not None else None
    return SimTrace(gen, arrive, start, done, thread_of, dropped, busy, end, events,
                    q_max, q_area / end if end else 0.0)


# ----------------------------------------------------------------------
# sweeps and reports
# ----------------------------------------------------------------------

@dataclass
class DelayRow:
    volume: float
    mean_ms: float
    p50_ms: float
    p95_ms: float
    max_ms: float
    dropped: int
    mean_queue: float = 0.0
    max_queue: int = 0


@dataclass
class DelayReport:
    tier: str
    rows: list = field(default_factory=list)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["volume", "mean_ms", "p50_ms", "p95_ms", "max_ms", "dropped"])
            for r in self.rows:
                w.writerow([_num(r.volume), f"{r.mean_ms:.3f}", f"{r.p50_ms:.3f}",
                            f"{r.p95_ms:.3f}", f"{r.max_ms:.3f}", r.dropped])


def _num(v):
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def delay_curve(deployment: DeploymentConfig, volumes, duration_s=10.0, seed=0,
                arrival="uniform") -> DelayReport:
    """Mean and tail delay for each request volume (requests/thread/second).

    Each volume is an independent run seeded from ``(seed, position)``.
    """
    volumes = list(volumes)
    if not volumes:
        raise ValueError("need at least one volume")
    report = DelayReport(deployment.tier)
    for k, v in enumerate(volumes):
        child = int(np.random.SeedSequence([int(seed), k]).generate_state(1)[0])
        trace = simulate(deployment, Workload(float(v), duration_s, arrival, child))
        d = trace.delays_ms
        if d.size:
            row = DelayRow(v, float(d.mean()), float(np.percentile(d, 50)),
                           float(np.percentile(d, 95)), float(d.max()), trace.n_dropped)
        else:
            row = DelayRow(v, float("nan"), float("nan"), float("nan"), float("nan"), trace.n_dropped)
        row.mean_queue = trace.mean_queue
        row.max_queue = trace.max_queue
        report.rows.append(row)
    return report


# ----------------------------------------------------------------------
# model profiles
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ModelProfile:
    name: str
    f1: float
    model_size_bytes: int
    memory_bytes: int
    prediction_ms: float

    def __post_init__(self):
        if not 0.0 <= self.f1 <= 1.0:
            raise ValueError("f1 must lie in [0, 1]")
        if min(self.model_size_bytes, self.memory_bytes, self.prediction_ms) < 0:
            raise ValueError("profile quantities must be nonnegative")

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def compare_profiles(a: ModelProfile, b: ModelProfile) -> dict:
    """Signed deltas ``a - b`` (sizes in MB, 1 MB = 10**6 bytes) and per-field winners."""
    deltas = {
        "f1": a.f1 - b.f1,
        "model_size_mb": (a.model_size_bytes - b.model_size_bytes) / 1e6,
        "memory_mb": (a.memory_bytes - b.memory_bytes) / 1e6,
        "prediction_ms": a.prediction_ms - b.prediction_ms,
    }
    higher_better = {"f1"}
    winners, lines = {}, []
    for key, d in deltas.items():
        if d == 0:
            winners[key] = "tie"
        elif (d > 0) == (key in higher_better):
            winners[key] = a.name
        else:
            winners[key] = b.name
        lines.append(f"{key}: {a.name} - {b.name} = {d:+.6g} ({winners[key]})")
    return {"a": a.name, "b": b.name, "deltas": deltas, "winners": winners,
            "summary": "\n".join(lines)}


# ----------------------------------------------------------------------
# shipped configuration documents
# ----------------------------------------------------------------------

SHIPPED = ("cloud_default", "edge_default", "lgnb_profile", "cinc2017_profile")


def _load_doc(name_or_path):
    """Read a JSON document from a path, or by bare name from the shipped set."""
    p = Path(name_or_path)
    if p.exists():
        return json.loads(p.read_text())
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    if stem in SHIPPED:
        return json.loads(resources.files("edgelgnb.data").joinpath(f"{stem}.json").read_text())
    raise FileNotFoundError(f"no such config document: {name_or_path}")


def load_deployment(name_or_path) -> DeploymentConfig:
    return DeploymentConfig.from_dict(_load_doc(name_or_path))


def load_profile(name_or_path) -> ModelProfile:
    return ModelProfile.from_dict(_load_doc(name_or_path))
