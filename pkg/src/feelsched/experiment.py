"""Multi-trial experiments: chained rounds, fairness state, optional toy FL, outputs.

A trial draws a fresh client placement and (when training) a fresh non-iid partition,
then simulates ``rounds`` rounds, feeding each round's scheduled set into the ages and
participation counts used by the next round. Per-trial random streams are derived from
the master seed and the trial index, so a trial is reproducible on its own.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .channel import D_MIN_KM, NOISE_WATTS
from .compute import ComputeProfile
from .engine import Population, build_round_snapshot, run_round, write_trace
from .fl import (
    SGDConfig,
    aggregate,
    evaluate,
    local_sgd,
    make_synthetic_task,
    partition_noniid,
)
from .scheduling import FairnessState, PolicyParams, get_policy, update_ages

__all__ = [
    "ExperimentConfig",
    "MetricsRecord",
    "ExperimentResult",
    "load_config",
    "run_experiment",
    "mean_std",
    "summarize",
    "emit_outputs",
    "read_rounds_csv",
    "summarize_csv",
    "CSV_HEADER",
]

log = logging.getLogger(__name__)

CSV_HEADER = ["trial", "round", "wallclock_s", "latency_s", "accuracy", "scheduled_ids"]

# trial sub-streams
_PLACEMENT, _CHANNEL, _POLICY, _DATA, _SGD = range(5)


@dataclass(frozen=True)
class ExperimentConfig:
    # population and schedule
    n_clients: int = 100
    n_select: int = 20
    rounds: int = 100
    trials: int = 1
    seed: int = 0
    policy: str = "of_mrtp"
    alpha: float = 0.5
    age_threshold: int = 5
    gamma_min: float = 1.0
    f_max: float = 0.4
    # radio
    radius_km: float = 0.5
    d_min_km: float = D_MIN_KM
    tx_power_ps_dbm: float = 15.0
    tx_power_client_dbm: float = 10.0
    noise_ps_watts: float = NOISE_WATTS
    noise_client_watts: float = NOISE_WATTS
    bandwidth_hz: float = 1e6
    fountain_overhead: float = 1.0
    model_bits: Optional[float] = None
    fixed_placement_seed: Optional[int] = None
    # local computation
    tau: int = 4
    t_min_s: float = 0.005
    t_mean_s: float = 0.010
    # toy learning task
    batch_size: int = 32
    learning_rate: float = 0.05
    n_features: int = 100
    n_classes: int = 10
    classes_per_client: int = 4
    samples_per_client: int = 40
    test_per_class: int = 1000
    class_separation: float = 0.25
    eval_every: int = 1
    # output
    out_dir: str = "results"
    trace: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_clients < 1:
            raise ValueError("n_clients must be >= 1")
        if not 1 <= self.n_select <= self.n_clients:
            raise ValueError(f"n_select must lie in [1, n_clients={self.n_clients}], got {self.n_select}")
        if self.rounds < 1 or self.trials < 1:
            raise ValueError("rounds and trials must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if not self.radius_km > self.d_min_km:
            raise ValueError("radius_km must exceed d_min_km")
        if self.model_bits is not None and not self.model_bits > 0:
            raise ValueError("model_bits must be positive")
        get_policy(self.policy)
        self.policy_params()
        self.compute_profile()
        self.sgd_config()

    def policy_params(self) -> PolicyParams:
        return PolicyParams(self.alpha, self.age_threshold, self.gamma_min, self.f_max)

    def compute_profile(self) -> ComputeProfile:
        return ComputeProfile(self.tau, self.t_min_s, self.t_mean_s)

    def sgd_config(self) -> SGDConfig:
        return SGDConfig(self.tau, self.batch_size, self.learning_rate)

    @property
    def model_dim(self) -> int:
        return self.n_features * self.n_classes + self.n_classes

    @property
    def bits(self) -> float:
        """Uploaded/downloaded model size; 32-bit floats by default."""
        return float(self.model_bits) if self.model_bits is not None else 32.0 * self.model_dim

    def replace(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)


def _coerce(name: str, raw: str):
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    if name not in fields:
        raise ValueError(f"unknown config key {name!r}")
    default = fields[name].default
    raw = raw.strip()
    if name in ("model_bits", "fixed_placement_seed"):
        if raw.lower() in ("", "none"):
            return None
        return float(raw) if name == "model_bits" else int(raw)
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def load_config(path) -> ExperimentConfig:
    """Read ``key = value`` lines (``#`` comments, optional ``[experiment]`` header)."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if not text.lstrip().startswith("["):
        text = "[experiment]\n" + text
    parser.read_string(text)
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            values[key] = _coerce(key, raw)
    return ExperimentConfig(**values)


@dataclass
class MetricsRecord:
    trial: int
    round: int
    wallclock_s: float
    latency_s: float
    accuracy: Optional[float]
    scheduled_ids: tuple
    picked_ids: tuple = ()
    ages: Optional[np.ndarray] = field(default=None, repr=False)
    frequencies: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    series: list  # one list of MetricsRecord per trial
    summary: dict
    traces: list = field(default_factory=list)
    participation: list = field(default_factory=list)  # final counts per trial


def mean_std(values) -> tuple:
    """Mean and sample standard deviation (0 for a single value)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def _trial_streams(seed: int, trial: int):
    ss = np.random.SeedSequence(seed, spawn_key=(trial,))
    return [np.random.default_rng(s) for s in ss.spawn(5)]


def _train_per_class(config: ExperimentConfig) -> int:
    # just enough whole single-class shards for every client
    shard = max(config.samples_per_client // config.classes_per_client, 1)
    shards_per_class = math.ceil(config.n_clients * config.classes_per_client / config.n_classes)
    return shard * shards_per_class


def _run_trial(config: ExperimentConfig, trial: int, train: bool):
    streams = _trial_streams(config.seed, trial)
    placement_rng = (np.random.default_rng(config.fixed_placement_seed)
                     if config.fixed_placement_seed is not None else streams[_PLACEMENT])
    population = Population.random_disk(
        config.n_clients, placement_rng, config.radius_km, config.bandwidth_hz,
        config.tx_power_ps_dbm, config.tx_power_client_dbm,
        config.noise_ps_watts, config.noise_client_watts, config.d_min_km,
    )
    policy = get_policy(config.policy)
    params = config.policy_params()
    profile = config.compute_profile()
    fairness = FairnessState.initial(config.n_clients)

    if train:
        task = make_synthetic_task(
            streams[_DATA], config.n_classes, config.n_features,
            train_per_class=_train_per_class(config),
            test_per_class=config.test_per_class, separation=config.class_separation,
        )
        clients = partition_noniid(task.x_train, task.y_train, config.n_clients,
                                   config.classes_per_client, config.samples_per_client, streams[_DATA])
        sgd = config.sgd_config()
        theta = task.model.zeros()

    records, traces = [], []
    wallclock = 0.0
    for n in range(1, config.rounds + 1):
        snap = build_round_snapshot(population, profile, config.bits, streams[_CHANNEL],
                                    config.fountain_overhead)
        out = run_round(snap, policy, fairness, config.n_select, params,
                        rng=streams[_POLICY], trace=config.trace)
        wallclock += out.completion_time_s
        accuracy = None
        if train:
            local = [local_sgd(theta, clients[k], sgd, streams[_SGD], task.model)
                     for k in out.scheduled_ids]
            theta = aggregate(local)
            if n % config.eval_every == 0 or n == config.rounds:
                accuracy = evaluate(theta, task.x_test, task.y_test, task.model)
        picked = tuple(sorted({k for _, k in out.decisions if k is not None}))
        records.append(MetricsRecord(
            trial=trial, round=n, wallclock_s=wallclock, latency_s=out.completion_time_s,
            accuracy=accuracy, scheduled_ids=tuple(out.scheduled_ids), picked_ids=picked,
            ages=fairness.age.copy(), frequencies=fairness.frequencies(),
        ))
        if config.trace:
            traces.append((n, out.trace))
        fairness = update_ages(fairness, out.scheduled_ids)
    return records, traces, fairness.participation_count.copy()


def summarize(series) -> dict:
    """Across-trial mean and sample std of per-round latency and final accuracy."""
    latencies = [np.mean([r.latency_s for r in recs]) for recs in series if recs]
    finals = [next((r.accuracy for r in reversed(recs) if r.accuracy is not None), None)
              for recs in series]
    finals = [a for a in finals if a is not None]
    lat_mean, lat_std = mean_std(latencies)
    summary = {
        "trials": len(series),
        "rounds": max((len(r) for r in series), default=0),
        "latency_mean_s": lat_mean,
        "latency_std_s": lat_std,
        "trial_latency_means_s": [float(v) for v in latencies],
    }
    if finals:
        acc_mean, acc_std = mean_std(finals)
        summary.update(accuracy_mean=acc_mean, accuracy_std=acc_std,
                       trial_final_accuracies=[float(a) for a in finals])
    return summary


def run_experiment(config: ExperimentConfig, train: bool = False) -> ExperimentResult:
    config.validate()
    series, traces, counts = [], [], []
    for trial in range(config.trials):
        log.info("trial %d/%d: policy=%s rounds=%d", trial + 1, config.trials, config.policy, config.rounds)
        recs, tr, cnt = _run_trial(config, trial, train)
        series.append(recs)
        traces.append(tr)
        counts.append(cnt)
    summary = summarize(series)
    summary["policy"] = config.policy
    return ExperimentResult(config, series, summary, traces, counts)


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def emit_outputs(result: ExperimentResult, out_dir=None) -> dict:
    """Write ``rounds.csv``, ``summary.jsonl``, ``plot.csv`` and (if traced) ``trace.jsonl``."""
    out = Path(out_dir if out_dir is not None else result.config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"rounds": out / "rounds.csv", "summary": out / "summary.jsonl", "plot": out / "plot.csv"}

    with open(paths["rounds"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for recs in result.series:
            for r in recs:
                w.writerow([r.trial, r.round, _fmt(r.wallclock_s), _fmt(r.latency_s),
                            _fmt(r.accuracy), " ".join(map(str, r.scheduled_ids))])

    with open(paths["summary"], "w") as fh:
        fh.write(json.dumps({"kind": "summary", **result.summary}, sort_keys=True) + "\n")
        for recs in result.series:
            if not recs:
                continue
            accs = [r.accuracy for r in recs if r.accuracy is not None]
            fh.write(json.dumps({
                "kind": "trial",
                "policy": result.config.policy,
                "trial": recs[0].trial,
                "latency_mean_s": float(np.mean([r.latency_s for r in recs])),
                "wallclock_s": recs[-1].wallclock_s,
                "final_accuracy": accs[-1] if accs else None,
            }, sort_keys=True) + "\n")

    with open(paths["plot"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy", "trial", "wallclock_s", "accuracy"])
        for recs in result.series:
            for r in recs:
                if r.accuracy is not None:
                    w.writerow([result.config.policy, r.trial, _fmt(r.wallclock_s), _fmt(r.accuracy)])

    if result.config.trace:
        paths["trace"] = out / "trace.jsonl"
        with open(paths["trace"], "w") as fh:
            for trial, rounds in enumerate(result.traces):
                for n, records in rounds:
                    write_trace(records, fh, trial=trial, round=n)
    return paths


def read_rounds_csv(path) -> list:
    """Parse ``rounds.csv`` back into per-trial lists of ``MetricsRecord``."""
    by_trial: dict = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            trial = int(row["trial"])
            by_trial.setdefault(trial, []).append(MetricsRecord(
                trial=trial,
                round=int(row["round"]),
                wallclock_s=float(row["wallclock_s"]),
                latency_s=float(row["latency_s"]),
                accuracy=float(row["accuracy"]) if row["accuracy"] else None,
                scheduled_ids=tuple(int(k) for k in row["scheduled_ids"].split()),
            ))
    return [by_trial[t] for t in sorted(by_trial)]


def summarize_csv(path) -> dict:
    return summarize(read_rounds_csv(path))
