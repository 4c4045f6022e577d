"""Sequential, synchronous-batch and asynchronous-batch optimization loops.

Evaluations run on a pool of ``B`` workers. The default backend is a
discrete-event simulation: each evaluation takes a duration drawn from the
problem's duration model and completions are processed one at a time in
simulated-time order, ties broken by worker id. :class:`ThreadBackend` runs
the same loops on real threads for demonstrations.
"""

from __future__ import annotations

import heapq
import time
from collections import deque
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .acq_optimizer import InnerOptConfig, maximize_acq, sobol_points
from .acquisition import (
    AcqKind,
    AcquisitionSpec,
    acq_ei,
    acq_pbo,
    acq_phcbo,
    acq_ucb,
    easybo_evaluator,
    sample_weight,
    slot_weights,
)
from .gp import Dataset, KernelHyperparams, NumericalFailure, condition, fit

SEQUENTIAL = "sequential"
SYNC = "sync"
ASYNC = "async"


class RunFailure(RuntimeError):
    """An optimization run aborted; ``context`` says where."""

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = dict(context or {})


@dataclass(frozen=True)
class SchedulerOptions:
    """Knobs shared by all regimes.

    ``refit_every`` is the number of new observations after which the kernel
    hyperparameters are refit; in between, the previous hyperparameters are
    reused and the posterior is recomputed on all data.
    """

    inner: InnerOptConfig = field(default_factory=InnerOptConfig)
    refit_every: int = 1
    fit_restarts: int = 8
    fit_maxiter: int = 200
    init_design: str = "sobol"

    def __post_init__(self):
        if self.refit_every < 1 or self.fit_restarts < 1:
            raise ValueError("refit_every and fit_restarts must be >= 1")
        if self.init_design not in ("sobol", "uniform"):
            raise ValueError("init_design must be 'sobol' or 'uniform'")


# --------------------------------------------------------------------------
# Clock, pool and record types
# --------------------------------------------------------------------------


class SimClock:
    """Monotone simulated wall clock (seconds)."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    @property
    def now(self) -> float:
        return self._now

    def advance_to(self, t: float) -> None:
        if t < self._now:
            raise ValueError(f"clock cannot move backwards from {self._now} to {t}")
        self._now = float(t)


class WorkerPool:
    """Book-keeping of which worker runs which evaluation."""

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("pool size must be >= 1")
        self.size = size
        self.in_flight: dict[int, int] = {}

    def free_workers(self) -> list[int]:
        return [w for w in range(self.size) if w not in self.in_flight]

    def assign(self, worker: int, index: int) -> None:
        if worker in self.in_flight:
            raise RuntimeError(f"worker {worker} is busy")
        self.in_flight[worker] = index
        assert len(self.in_flight) <= self.size

    def release(self, worker: int) -> int:
        return self.in_flight.pop(worker)

    def running(self) -> list[int]:
        return sorted(self.in_flight.values())


@dataclass
class Event:
    """One evaluation, from issue to completion.

    ``in_flight`` lists the indices of evaluations still running when this
    one was issued; ``hallucinated`` is the subset the acquisition
    conditioned on. ``issue_seq``/``complete_seq`` share one counter, so
    they totally order all issues and completions of a run.
    """

    index: int
    worker: int
    kind: str
    regime: str
    point: list
    unit_point: list
    issue_time: float
    issue_seq: int
    weight: float | None = None
    in_flight: list = field(default_factory=list)
    hallucinated: list = field(default_factory=list)
    duration: float | None = None
    completion_time: float | None = None
    complete_seq: int | None = None
    value: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> Event:
        return cls(**d)


@dataclass
class RunRecord:
    events: list
    best_curve: list
    total_sim_time: float
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.events], dtype=float)

    @property
    def best_value(self) -> float:
        return float(np.max(self.values))

    def completion_order(self) -> list:
        return sorted(self.events, key=lambda e: e.complete_seq)

    def replay_best_curve(self) -> list:
        return best_curve_from_events(self.events)


def best_curve_from_events(events) -> list:
    """Running maximum ``(completion_time, best)`` in completion order."""
    curve = []
    best = -np.inf
    for e in sorted(events, key=lambda e: e.complete_seq):
        best = max(best, e.value)
        curve.append((e.completion_time, best))
    return curve


# --------------------------------------------------------------------------
# Backends
# --------------------------------------------------------------------------


class SimulatedBackend:
    """Discrete-event evaluation: completions come off a heap keyed by
    ``(completion_time, worker)``."""

    def __init__(self, problem):
        self.problem = problem
        self.clock = SimClock()
        self._heap = []

    @property
    def now(self) -> float:
        return self.clock.now

    def submit(self, index: int, worker: int, x, duration: float) -> None:
        heapq.heappush(self._heap, (self.clock.now + duration, worker, index, x))

    def pending(self) -> int:
        return len(self._heap)

    def next_completion(self):
        t, worker, index, x = heapq.heappop(self._heap)
        self.clock.advance_to(t)
        return t, worker, index, self.problem.evaluate(x)

    def close(self) -> None:
        pass


class ThreadBackend:
    """Real concurrent evaluation on a thread pool.

    Each job sleeps ``duration * time_scale`` seconds and then evaluates the
    objective. Times reported are real elapsed seconds divided by
    ``time_scale`` so they are comparable with simulated durations.
    Completions are handed back one at a time.
    """

    def __init__(self, problem, workers: int, time_scale: float = 0.001):
        self.problem = problem
        self.time_scale = time_scale
        self._pool = ThreadPoolExecutor(max_workers=workers)
        self._futures = {}
        self._t0 = time.perf_counter()
        self._last = 0.0

    @property
    def now(self) -> float:
        return max(self._last, self._elapsed())

    def _elapsed(self) -> float:
        return (time.perf_counter() - self._t0) / self.time_scale

    def _job(self, x, duration):
        time.sleep(duration * self.time_scale)
        value = self.problem.evaluate(x)
        return self._elapsed(), value

    def submit(self, index: int, worker: int, x, duration: float) -> None:
        fut = self._pool.submit(self._job, x, duration)
        self._futures[fut] = (worker, index)

    def pending(self) -> int:
        return len(self._futures)

    def next_completion(self):
        done, _ = wait(list(self._futures), return_when=FIRST_COMPLETED)
        fut = min(done, key=lambda f: (f.result()[0], self._futures[f][0]))
        worker, index = self._futures.pop(fut)
        t, value = fut.result()
        self._last = max(self._last, t)
        return self._last, worker, index, value

    def close(self) -> None:
        self._pool.shutdown(wait=True)


# --------------------------------------------------------------------------
# Proposal logic
# --------------------------------------------------------------------------

_FALLBACK_HYPERPARAMS = dict(signal_variance=1.0, noise_variance=1e-6)


class _Proposer:
    """Holds the surrogate and the random streams used to pick new points."""

    def __init__(self, problem, acq: AcquisitionSpec, batch_size: int, options, streams):
        self.problem = problem
        self.acq = acq
        self.batch_size = batch_size
        self.options = options
        self.rng_weight, self.rng_inner, self.rng_fit = streams
        self.model = None
        self.hyperparams: KernelHyperparams | None = None
        self._count_at_fit = 0
        self._model_count = -1
        if acq.kind in (AcqKind.PBO, AcqKind.PHCBO):
            self._weights = slot_weights(batch_size) if batch_size > 1 else np.array([acq.weight])
        history_slots = batch_size if acq.hc_per_slot else 1
        self._history = [deque(maxlen=acq.history_window) for _ in range(history_slots)]

    def _update_model(self, data: Dataset):
        if data.count == self._model_count:
            return
        due = data.count - self._count_at_fit >= self.options.refit_every
        if data.count >= 2 and (self.hyperparams is None or due):
            seed = int(self.rng_fit.integers(2**63))
            self.model = fit(
                data,
                seed=seed,
                previous=self.hyperparams,
                n_starts=self.options.fit_restarts,
                maxiter=self.options.fit_maxiter,
            )
            self.hyperparams = self.model.hyperparams
            self._count_at_fit = data.count
        else:
            h = self.hyperparams or KernelHyperparams(
                np.full(data.dim, 0.2), **_FALLBACK_HYPERPARAMS
            )
            self.model = condition(data, h)
        self._model_count = data.count

    def _slot(self, slot: int) -> int:
        return slot % len(self._weights)

    def _history_for(self, slot: int):
        return self._history[slot % len(self._history)]

    def propose(self, data: Dataset, pending_units, slot: int):
        """Return ``(unit_point, weight, used_pending)`` for one idle worker."""
        self._update_model(data)
        spec = self.acq
        kind = self.acq.kind
        m = self.model
        weight = None
        used_pending = False
        if kind in (AcqKind.UCB, AcqKind.LCB):
            # the LCB baseline minimizes -f; in the maximization convention
            # that is the upper bound on f
            kappa = self.acq.kappa
            f = lambda Q: acq_ucb(m, Q, kappa)  # noqa: E731
        elif kind is AcqKind.EI:
            best = float(data.y.max())
            f = lambda Q: acq_ei(m, Q, best)  # noqa: E731
        elif kind is AcqKind.PBO:
            weight = float(self._weights[self._slot(slot)])
            f = lambda Q: acq_pbo(m, Q, weight)  # noqa: E731
        elif kind is AcqKind.PHCBO:
            weight = float(self._weights[self._slot(slot)])
            history = np.array(self._history_for(slot))
            f = lambda Q: acq_phcbo(m, Q, weight, history, spec)  # noqa: E731
        else:
            weight = float(sample_weight(self.acq.lam, self.rng_weight))
            used_pending = self.acq.hallucinate and len(pending_units) > 0
            f = easybo_evaluator(m, pending_units, weight, use_pending=used_pending)
        inner = replace(self.options.inner, seed=int(self.rng_inner.integers(2**63)))
        u = maximize_acq(f, self.problem.domain, inner)
        if kind is AcqKind.PHCBO:
            self._history_for(slot).append(u)
        return u, weight, used_pending


# --------------------------------------------------------------------------
# Engine
# --------------------------------------------------------------------------


def _streams(seed):
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(5)]


def _initial_design(problem, n_init, rng, how) -> np.ndarray:
    if how == "uniform":
        return rng.random((n_init, problem.dim))
    return sobol_points(n_init, problem.dim, int(rng.integers(2**63)))


class _Run:
    def __init__(self, problem, budget, n_init, B, acq, seed, regime, options, backend):
        if budget < n_init:
            raise ValueError("budget must be >= n_init")
        if n_init < 1:
            raise ValueError("n_init must be >= 1")
        self.problem = problem
        self.budget = budget
        self.n_init = n_init
        self.B = B
        self.seed = seed
        self.regime = regime
        self.options = options or SchedulerOptions()
        rng_init, rng_dur, *rest = _streams(seed)
        self.rng_dur = rng_dur
        self.init = _initial_design(problem, n_init, rng_init, self.options.init_design)
        self.proposer = _Proposer(problem, acq, B, self.options, rest)
        self.backend = backend if backend is not None else SimulatedBackend(problem)
        self.pool = WorkerPool(B)
        self.events: list[Event] = []
        self.data = Dataset(np.empty((0, problem.dim)), np.empty(0))
        self.seq = 0
        self.acq = acq

    def context(self) -> dict:
        return {
            "regime": self.regime,
            "seed": self.seed,
            "issued": len(self.events),
            "completed": self.data.count,
            "problem": self.problem.name,
        }

    def issue(self, worker: int, slot: int) -> None:
        index = len(self.events)
        running = self.pool.running()
        weight = None
        hallucinated = []
        if index < self.n_init:
            u, kind = self.init[index], "init"
        else:
            pending = np.array([self.events[i].unit_point for i in running]).reshape(-1, self.problem.dim)
            u, weight, used = self.proposer.propose(self.data, pending, slot)
            kind = "suggest"
            hallucinated = list(running) if used else []
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        x = self.problem.domain.from_unit(u)
        duration = float(self.problem.duration_model(u, self.rng_dur))
        if not (np.isfinite(duration) and duration > 0):
            raise ValueError(f"duration model returned {duration!r}")
        self.events.append(
            Event(
                index=index,
                worker=worker,
                kind=kind,
                regime=self.regime,
                point=[float(v) for v in x],
                unit_point=[float(v) for v in u],
                issue_time=float(self.backend.now),
                issue_seq=self.seq,
                weight=weight,
                in_flight=list(running),
                hallucinated=hallucinated,
                duration=duration,
            )
        )
        self.seq += 1
        self.pool.assign(worker, index)
        self.backend.submit(index, worker, x, duration)

    def complete_one(self) -> int:
        t, worker, index, value = self.backend.next_completion()
        value = float(value)
        if not np.isfinite(value):
            raise ValueError(f"objective returned non-finite value {value!r}")
        released = self.pool.release(worker)
        assert released == index
        e = self.events[index]
        e.completion_time = float(t)
        e.complete_seq = self.seq
        e.value = value
        self.seq += 1
        self.data = self.data.append(np.array(e.unit_point), value)
        return worker

    def run_async(self) -> None:
        for w in range(min(self.B, self.budget)):
            self.issue(w, w)
        while self.backend.pending():
            worker = self.complete_one()
            if len(self.events) < self.budget:
                self.issue(worker, worker)

    def run_sync(self) -> None:
        while len(self.events) < self.budget:
            size = min(self.B, self.budget - len(self.events))
            for slot in range(size):
                self.issue(slot, slot)
            while self.backend.pending():
                self.complete_one()

    def record(self) -> RunRecord:
        meta = {
            "problem": self.problem.name,
            "regime": self.regime,
            "batch_size": self.B,
            "budget": self.budget,
            "n_init": self.n_init,
            "acquisition": self.acq.kind.value,
            "hallucinate": self.acq.hallucinate,
        }
        total = max((e.completion_time for e in self.events), default=0.0)
        return RunRecord(
            events=self.events,
            best_curve=best_curve_from_events(self.events),
            total_sim_time=float(total),
            seed=self.seed,
            meta=meta,
        )


def _execute(run: _Run, sync: bool) -> RunRecord:
    try:
        if sync:
            run.run_sync()
        else:
            run.run_async()
    except (NumericalFailure, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        raise RunFailure(f"{run.regime} run failed: {exc}", run.context()) from exc
    finally:
        run.backend.close()
    return run.record()


def run_sequential(problem, budget, n_init, acq, seed, options=None, backend=None) -> RunRecord:
    """One evaluation at a time: fit, maximize the acquisition, evaluate."""
    run = _Run(problem, budget, n_init, 1, acq, seed, SEQUENTIAL, options, backend)
    return _execute(run, sync=False)


def run_sync_batch(problem, budget, n_init, B, acq, seed, options=None, backend=None) -> RunRecord:
    """Issue rounds of ``B`` points and wait for the whole round to finish.

    Within a round, slot ``i`` (0-based) uses weight ``i / (B - 1)`` for the
    pBO family. The randomized-weight acquisition draws a fresh weight per
    pick and, when hallucination is on, conditions each pick on the earlier
    picks of the same round.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    run = _Run(problem, budget, n_init, B, acq, seed, SYNC, options, backend)
    return _execute(run, sync=True)


def run_async(problem, budget, n_init, B, acq, seed, options=None, backend=None) -> RunRecord:
    """Keep all ``B`` workers busy, proposing a new point on every completion.

    Initial-design points are issued first; each later completion updates
    the data, refreshes the surrogate, hallucinates the still-running points
    (if the acquisition asks for it) and sends the idle worker a new point.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    if n_init < B:
        raise ValueError("n_init must be >= B so the initial design fills the pool")
    run = _Run(problem, budget, n_init, B, acq, seed, ASYNC, options, backend)
    return _execute(run, sync=False)
