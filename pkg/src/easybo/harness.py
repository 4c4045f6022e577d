"""Repeated-run experiments, persistence and comparison reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import benchmarks
from .acq_optimizer import InnerOptConfig
from .acquisition import AcqKind, AcquisitionSpec
from .scheduler import (
    ASYNC,
    SEQUENTIAL,
    SYNC,
    Event,
    RunFailure,
    RunRecord,
    SchedulerOptions,
    best_curve_from_events,
    run_async,
    run_sequential,
    run_sync_batch,
)

log = logging.getLogger(__name__)

REGIMES = (SEQUENTIAL, SYNC, ASYNC)

# variant -> (acquisition kind, hallucinate, allowed regimes)
VARIANTS = {
    "EI": (AcqKind.EI, False, {SEQUENTIAL}),
    "LCB": (AcqKind.LCB, False, {SEQUENTIAL}),
    "PBO": (AcqKind.PBO, False, {SYNC}),
    "PHCBO": (AcqKind.PHCBO, False, {SYNC}),
    "EASYBO": (AcqKind.EASYBO, True, {SEQUENTIAL, ASYNC}),
    "EASYBO_A": (AcqKind.EASYBO, False, {ASYNC}),
    "EASYBO_S": (AcqKind.EASYBO, False, {SYNC}),
    "EASYBO_SP": (AcqKind.EASYBO, True, {SYNC}),
}

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One output of the SplitMix64 generator seeded at ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def run_seed(base_seed: int, i: int) -> int:
    return (int(base_seed) ^ splitmix64(i)) & _MASK64


@dataclass
class ExperimentConfig:
    problem: str = "branin"
    regime: str = ASYNC
    variant: str = "EASYBO"
    B: int = 5
    budget: int = 150
    n_init: int = 20
    repeats: int = 20
    base_seed: int = 0
    # acquisition overrides
    lam: float = 6.0
    kappa: float = 2.0
    hc_distance: float | None = None
    hc_scale: float | None = None
    window: int = 5
    hc_per_slot: bool = True
    # duration model, e.g. {"kind": "lognormal", "median": 10.0, "sigma": 0.5}
    duration: dict = field(default_factory=lambda: {"kind": "lognormal", "median": 10.0, "sigma": 0.5})
    # custom weighted composite, see ``benchmarks.METRICS``
    fom: dict | None = None
    # scheduler / surrogate knobs
    refit_every: int = 1
    fit_restarts: int = 8
    fit_maxiter: int = 200
    inner: dict = field(default_factory=dict)
    init_design: str = "sobol"
    jobs: int = 1
    out: str | None = None

    def __post_init__(self):
        self.variant = self.variant.upper()
        self.regime = self.regime.lower()
        if self.regime == SEQUENTIAL:
            self.B = 1

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> ExperimentConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {sorted(VARIANTS)}")
        allowed = VARIANTS[self.variant][2]
        if self.regime not in allowed:
            raise ValueError(f"variant {self.variant} runs in {sorted(allowed)}, not {self.regime}")
        if self.B < 1 or (self.regime != SEQUENTIAL and self.B < 2):
            raise ValueError("batch regimes need B >= 2")
        floor = max(2, self.B) if self.regime == ASYNC else 2
        if not self.budget >= self.n_init >= floor:
            raise ValueError(f"need budget >= n_init >= {floor}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        self.acquisition()
        self.options()
        self.build_problem()

    def acquisition(self) -> AcquisitionSpec:
        kind, hallucinate, _ = VARIANTS[self.variant]
        return AcquisitionSpec(
            kind=kind,
            kappa=self.kappa,
            lam=self.lam,
            hc_distance=self.hc_distance,
            hc_scale=self.hc_scale,
            history_window=self.window,
            hc_per_slot=self.hc_per_slot,
            hallucinate=hallucinate,
        )

    def options(self) -> SchedulerOptions:
        return SchedulerOptions(
            inner=InnerOptConfig(**self.inner),
            refit_every=self.refit_every,
            fit_restarts=self.fit_restarts,
            fit_maxiter=self.fit_maxiter,
            init_design=self.init_design,
        )

    def build_problem(self) -> benchmarks.Problem:
        params = dict(self.duration)
        kind = params.pop("kind", "lognormal")
        dm = benchmarks.make_duration_model(kind, **params)
        if self.fom is not None:
            return benchmarks.custom_fom_problem(self.problem, dm, **self.fom)
        return benchmarks.get_problem(self.problem, dm)


@dataclass
class SummaryStats:
    problem: str
    variant: str
    regime: str
    B: int
    budget: int
    n_runs: int
    n_failed: int
    best: float
    worst: float
    mean: float
    std: float
    mean_time: float
    total_time: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summary: SummaryStats
    records: list
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def summarize(cfg: ExperimentConfig, records, n_failed: int = 0) -> SummaryStats:
    """Best/worst/mean/std of final values (population std) and simulated times."""
    finals = np.array([r.best_value for r in records], dtype=float)
    times = np.array([r.total_sim_time for r in records], dtype=float)
    nan = float("nan")
    if finals.size:
        best, worst = float(finals.max()), float(finals.min())
        # guard against last-ulp drift of the mean outside [worst, best]
        mean = float(min(max(finals.mean(), worst), best))
        std = float(finals.std())
        mean_time, total_time = float(times.mean()), float(times.sum())
    else:
        best = worst = mean = std = mean_time = nan
        total_time = 0.0
    return SummaryStats(
        problem=cfg.problem,
        variant=cfg.variant,
        regime=cfg.regime,
        B=cfg.B,
        budget=cfg.budget,
        n_runs=int(finals.size),
        n_failed=int(n_failed),
        best=best,
        worst=worst,
        mean=mean,
        std=std,
        mean_time=mean_time,
        total_time=total_time,
    )


def run_one(cfg: ExperimentConfig, i: int) -> RunRecord:
    """Run repeat ``i`` of ``cfg`` (seed ``base_seed ^ splitmix64(i)``)."""
    problem = cfg.build_problem()
    acq = cfg.acquisition()
    opts = cfg.options()
    seed = run_seed(cfg.base_seed, i)
    if cfg.regime == SEQUENTIAL:
        record = run_sequential(problem, cfg.budget, cfg.n_init, acq, seed, opts)
    elif cfg.regime == SYNC:
        record = run_sync_batch(problem, cfg.budget, cfg.n_init, cfg.B, acq, seed, opts)
    else:
        record = run_async(problem, cfg.budget, cfg.n_init, cfg.B, acq, seed, opts)
    record.meta.update(variant=cfg.variant, repeat=i)
    return record


def _safe_run(cfg, i):
    try:
        return i, run_one(cfg, i), None
    except RunFailure as exc:
        return i, None, f"{exc} {json.dumps(exc.context, sort_keys=True)}"


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Execute ``cfg.repeats`` runs and optionally persist everything under ``cfg.out``.

    Failed runs are recorded and excluded from the summary statistics.
    """
    cfg.validate()
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(_safe_run, [cfg] * cfg.repeats, range(cfg.repeats)))
    else:
        outcomes = [_safe_run(cfg, i) for i in range(cfg.repeats)]

    records, failures = [], []
    for i, record, error in outcomes:
        if error is None:
            records.append(record)
        else:
            log.warning("run %d failed: %s", i, error)
            failures.append({"repeat": i, "seed": run_seed(cfg.base_seed, i), "error": error})
    summary = summarize(cfg, records, n_failed=len(failures))
    result = ExperimentResult(cfg, summary, records, failures)
    if write and cfg.out:
        write_experiment(result, cfg.out)
    return result


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=True)


def record_to_jsonl(record: RunRecord) -> str:
    header = {
        "type": "run",
        "seed": record.seed,
        "meta": record.meta,
        "total_sim_time": record.total_sim_time,
    }
    lines = [_dumps(header)]
    lines += [_dumps({"type": "event", **e.to_dict()}) for e in record.events]
    return "\n".join(lines) + "\n"


def record_from_jsonl(text: str) -> RunRecord:
    header = None
    events = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        kind = obj.pop("type")
        if kind == "run":
            header = obj
        elif kind == "event":
            events.append(Event.from_dict(obj))
    if header is None:
        raise ValueError("run file has no header line")
    return RunRecord(
        events=events,
        best_curve=best_curve_from_events(events),
        total_sim_time=header["total_sim_time"],
        seed=header["seed"],
        meta=header["meta"],
    )


def curve_to_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "value"])
    for t, v in curve:
        w.writerow([repr(float(t)), repr(float(v))])
    return buf.getvalue()


def summary_to_csv(summary: SummaryStats) -> str:
    buf = io.StringIO()
    row = summary.to_dict()
    w = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
    w.writeheader()
    w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def write_experiment(result: ExperimentResult, out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    for record in result.records:
        i = record.meta["repeat"]
        (out / f"run_{i}.jsonl").write_text(record_to_jsonl(record))
        (out / f"curve_{i}.csv").write_text(curve_to_csv(record.best_curve))
        runs.append(
            {
                "repeat": i,
                "seed": record.seed,
                "final_value": record.best_value,
                "total_sim_time": record.total_sim_time,
            }
        )
    # the output location is not part of the experiment's identity
    config = {k: v for k, v in result.config.to_dict().items() if k != "out"}
    doc = {
        "config": config,
        "summary": result.summary.to_dict(),
        "runs": runs,
        "failures": result.failures,
    }
    (out / "summary.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    (out / "summary.csv").write_text(summary_to_csv(result.summary))
    return out


def load_experiment(out) -> ExperimentResult:
    """Reload a persisted experiment; the summary is recomputed from the run files."""
    out = Path(out)
    doc = json.loads((out / "summary.json").read_text())
    cfg = ExperimentConfig.from_dict(doc["config"])
    records = []
    for run in doc["runs"]:
        records.append(record_from_jsonl((out / f"run_{run['repeat']}.jsonl").read_text()))
    summary = summarize(cfg, records, n_failed=len(doc["failures"]))
    return ExperimentResult(cfg, summary, records, doc["failures"])


# --------------------------------------------------------------------------
# Comparison
# --------------------------------------------------------------------------


def mean_best_curve(records):
    """Average best-so-far over runs, as a step function on the union of completion times.

    Returns ``(times, values)``; values are ``-inf`` until every run has at
    least one completion.
    """
    times = np.unique(np.concatenate([[t for t, _ in r.best_curve] for r in records]))
    stacked = []
    for r in records:
        t = np.array([p[0] for p in r.best_curve])
        v = np.array([p[1] for p in r.best_curve])
        idx = np.searchsorted(t, times, side="right") - 1
        stacked.append(np.where(idx >= 0, v[np.maximum(idx, 0)], -np.inf))
    return times, np.mean(stacked, axis=0)


def time_to_reach(records, target: float) -> float:
    times, values = mean_best_curve(records)
    hit = np.flatnonzero(values >= target)
    return float(times[hit[0]]) if hit.size else math.inf


def _label(summary: SummaryStats) -> str:
    return f"{summary.variant}-{summary.regime}-{summary.B}"


@dataclass
class ComparisonReport:
    rows: list
    target: float
    ratios: dict

    def format_table(self) -> str:
        head = f"{'variant':<28}{'mean final':>14}{'mean time':>14}{'time@target':>14}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r['label']:<28}{r['mean_final']:>14.6g}{r['mean_time']:>14.6g}{r['time_to_target']:>14.6g}"
            )
        lines.append(f"matched-quality target: {self.target:.6g}")
        for (a, b), rat in self.ratios.items():
            lines.append(
                f"{a} / {b}: time ratio {rat['time_ratio']:.4f}, "
                f"matched-quality ratio {rat['matched_time_ratio']:.4f}"
            )
        return "\n".join(lines)


def compare_report(results) -> ComparisonReport:
    """Mean final value, mean simulated time and pairwise time ratios.

    ``time_ratio`` compares mean total simulated time. The matched-quality
    ratio compares the times at which each mean best-so-far curve first
    reaches the lowest mean final value among the compared results.
    """
    results = list(results)
    if not results:
        raise ValueError("nothing to compare")
    first = results[0].summary
    for r in results[1:]:
        if r.summary.problem != first.problem or r.summary.budget != first.budget:
            raise ValueError("summaries must share a problem and budget")
    target = min(r.summary.mean for r in results)
    rows = []
    for r in results:
        rows.append(
            {
                "label": _label(r.summary),
                "mean_final": r.summary.mean,
                "mean_time": r.summary.mean_time,
                "time_to_target": time_to_reach(r.records, target),
            }
        )
    ratios = {}
    for i, a in enumerate(rows):
        for b in rows[i + 1 :] if len(rows) > 1 else rows:
            ratios[(a["label"], b["label"])] = {
                "time_ratio": a["mean_time"] / b["mean_time"],
                "matched_time_ratio": a["time_to_target"] / b["time_to_target"],
            }
    return ComparisonReport(rows, target, ratios)


def time_reduction(sync_time: float, async_time: float) -> float:
    """Fractional time saved by the asynchronous run, ``1 - async / sync``."""
    return 1.0 - async_time / sync_time
