"""Event-driven simulation of one communication round.

The global model reaches each client after ``Q / R_dl`` seconds (ideal fountain-coded
multicast), the client then computes for a random time and joins the idle set.
The uplink is time-shared: one client transmits at a time, a scheduling rule is
consulted whenever the idle set changes, and a preempted client keeps the bits it
has already delivered. The round ends when ``N`` uploads have completed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional

import numpy as np

from .channel import (
    D_MIN_KM,
    NOISE_WATTS,
    RadioGeometry,
    ergodic_spectral_efficiency,
    place_clients,
    sample_fading,
)
from .compute import ComputeProfile, sample_compute_latency
from .scheduling import DecisionContext, FairnessState, IdleCandidate, Policy, PolicyParams

__all__ = [
    "RATE_FLOOR_BPS",
    "Population",
    "RoundSnapshot",
    "RoundOutcome",
    "build_round_snapshot",
    "run_round",
    "conservation_check",
    "write_trace",
]

RATE_FLOOR_BPS = 1e-6


@dataclass(frozen=True)
class Population:
    """Static radio state of all clients, with per-link SNR arrays cached."""

    geometries: tuple
    bandwidth_hz: float
    dl_mean_snr: np.ndarray
    ul_mean_snr: np.ndarray
    ul_avg_rate_bps: np.ndarray

    @classmethod
    def from_geometries(cls, geometries: Iterable[RadioGeometry], bandwidth_hz: float = 1e6):
        geometries = tuple(geometries)
        if not geometries:
            raise ValueError("population needs at least one client")
        if not bandwidth_hz > 0:
            raise ValueError("bandwidth must be positive")
        dl = np.array([g.mean_snr("dl") for g in geometries])
        ul = np.array([g.mean_snr("ul") for g in geometries])
        avg = bandwidth_hz * np.array([ergodic_spectral_efficiency(s) for s in ul])
        return cls(geometries, bandwidth_hz, dl, ul, avg)

    @classmethod
    def random_disk(
        cls,
        n_clients: int,
        rng: np.random.Generator,
        radius_km: float = 0.5,
        bandwidth_hz: float = 1e6,
        tx_power_ps_dbm: float = 15.0,
        tx_power_client_dbm: float = 10.0,
        noise_ps_watts: float = NOISE_WATTS,
        noise_client_watts: float = NOISE_WATTS,
        d_min: float = D_MIN_KM,
    ) -> "Population":
        distances = place_clients(n_clients, radius_km, rng, d_min)
        geoms = [
            RadioGeometry.from_distance(float(d), tx_power_ps_dbm, tx_power_client_dbm,
                                        noise_ps_watts, noise_client_watts, d_min)
            for d in distances
        ]
        return cls.from_geometries(geoms, bandwidth_hz)

    @property
    def n_clients(self) -> int:
        return len(self.geometries)

    @property
    def distances_km(self) -> np.ndarray:
        return np.array([g.distance_km for g in self.geometries])


@dataclass(frozen=True)
class RoundSnapshot:
    """Per-round realization for every client; arrays are indexed by client id."""

    model_bits: float
    dl_latency_s: np.ndarray
    compute_latency_s: np.ndarray
    ul_rate_bps: np.ndarray
    gamma: np.ndarray
    dl_rate_bps: Optional[np.ndarray] = None

    @classmethod
    def from_arrays(cls, arrival_time_s, ul_rate_bps, model_bits: float, gamma=None):
        """Snapshot with given arrival times (all attributed to computation)."""
        arrival = np.asarray(arrival_time_s, dtype=float)
        ul = np.asarray(ul_rate_bps, dtype=float)
        if arrival.shape != ul.shape:
            raise ValueError("arrival and rate arrays differ in length")
        if gamma is None:
            gamma = np.ones_like(ul)
        return cls(float(model_bits), np.zeros_like(arrival), arrival, ul, np.asarray(gamma, float))

    @property
    def n_clients(self) -> int:
        return len(self.ul_rate_bps)

    @property
    def arrival_time_s(self) -> np.ndarray:
        return self.dl_latency_s + self.compute_latency_s

    @property
    def arrival_order(self) -> np.ndarray:
        """Client ids sorted by arrival time, ties by id."""
        return np.argsort(self.arrival_time_s, kind="stable")


def build_round_snapshot(
    population: Population,
    compute_profile: ComputeProfile,
    model_bits: float,
    rng: np.random.Generator,
    overhead_factor: float = 1.0,
    dl_fading=None,
    ul_fading=None,
) -> RoundSnapshot:
    """Draw one round of block fading and compute latencies.

    ``dl_fading``/``ul_fading`` override the random fading powers (e.g. all ones);
    draws are consumed from ``rng`` either way so seeded streams stay aligned.
    """
    if not model_bits > 0:
        raise ValueError("model_bits must be positive")
    if overhead_factor < 1:
        raise ValueError("fountain-code overhead factor must be >= 1")
    k = population.n_clients
    h_dl = sample_fading(rng, k)
    h_ul = sample_fading(rng, k)
    compute = np.asarray(sample_compute_latency(compute_profile, rng, k), dtype=float)
    if dl_fading is not None:
        h_dl = np.broadcast_to(np.asarray(dl_fading, float), (k,))
    if ul_fading is not None:
        h_ul = np.broadcast_to(np.asarray(ul_fading, float), (k,))
    w = population.bandwidth_hz
    dl_rate = np.maximum(w * np.log2(1.0 + population.dl_mean_snr * h_dl), RATE_FLOOR_BPS)
    ul_rate = np.maximum(w * np.log2(1.0 + population.ul_mean_snr * h_ul), RATE_FLOOR_BPS)
    return RoundSnapshot(
        model_bits=float(model_bits),
        dl_latency_s=overhead_factor * model_bits / dl_rate,
        compute_latency_s=compute,
        ul_rate_bps=ul_rate,
        gamma=ul_rate / population.ul_avg_rate_bps,
        dl_rate_bps=dl_rate,
    )


@dataclass
class RoundOutcome:
    completion_time_s: float
    scheduled: list  # (client id, upload finish time) in completion order
    intervals: dict  # client id -> list of (start, end) upload segments
    idle_waiting_time_s: float
    remaining_bits: np.ndarray
    decisions: list  # (time, picked client or None)
    n_events: int
    n_preemptions: int
    trace: list = field(default_factory=list)

    @property
    def scheduled_ids(self) -> list:
        return [k for k, _ in self.scheduled]

    def finish_times(self, n_clients: int) -> np.ndarray:
        """``t_k`` per client, ``inf`` for clients that did not finish."""
        t = np.full(n_clients, math.inf)
        for k, tk in self.scheduled:
            t[k] = tk
        return t


def run_round(
    snapshot: RoundSnapshot,
    policy: Policy,
    fairness: FairnessState,
    n_select: int,
    params: Optional[PolicyParams] = None,
    rng: Optional[np.random.Generator] = None,
    trace: bool = False,
) -> RoundOutcome:
    k_total = snapshot.n_clients
    if not 1 <= n_select <= k_total:
        raise ValueError(f"need 1 <= N <= K, got N={n_select}, K={k_total}")
    arrival = snapshot.arrival_time_s
    if not np.all(np.isfinite(arrival)):
        raise ValueError("all arrival times must be finite")
    order = snapshot.arrival_order
    rate = snapshot.ul_rate_bps
    q = snapshot.model_bits
    rem = np.full(k_total, q)
    ages = fairness.age
    freqs = fairness.frequencies()
    gamma = snapshot.gamma
    ctx = DecisionContext(fairness=fairness, params=params or PolicyParams(),
                          n_select=n_select, rng=rng)

    cand: dict[int, IdleCandidate] = {}
    completed: list = []
    intervals: dict = {}
    decisions: list = []
    log: list = []
    t = 0.0
    ptr = 0
    current = None
    idle_wait = 0.0
    n_events = 0
    n_preempt = 0

    def record(kind, client):
        if trace:
            log.append({"time": t, "event": kind, "client": client,
                        "remaining_bits": None if client is None else float(rem[client])})

    def admit():
        nonlocal ptr, n_events
        while ptr < k_total and arrival[order[ptr]] <= t:
            c = int(order[ptr])
            cand[c] = IdleCandidate(c, float(rem[c]), float(rate[c]), float(gamma[c]),
                                    int(ages[c]), float(freqs[c]))
            ptr += 1
            n_events += 1
            record("arrival", c)

    def transmit(client, until):
        seg = intervals.setdefault(client, [])
        if seg and seg[-1][1] == t:
            seg[-1] = (seg[-1][0], until)
        else:
            seg.append((t, until))

    def decide():
        nonlocal current, n_preempt
        if not cand:
            current = None
            return
        ctx.uploads_completed = len(completed)
        ctx.arrivals_pending = ptr < k_total
        pick = policy([cand[c] for c in sorted(cand)], ctx)
        if pick is not None and pick not in cand:
            raise RuntimeError(f"policy picked client {pick} that is not idle")
        decisions.append((t, pick))
        if current is not None and pick != current:
            n_preempt += 1
            record("preempt", current)
        if pick is not None and pick != current:
            record("schedule", pick)
        current = pick

    while len(completed) < n_select:
        if current is None:
            if ptr >= k_total:
                raise RuntimeError("round cannot complete: no pending arrivals and no client scheduled")
            nxt = float(arrival[order[ptr]])
            if not cand:
                idle_wait += nxt - t
            t = max(t, nxt)
            admit()
            decide()
            continue
        finish = t + rem[current] / rate[current]
        nxt = float(arrival[order[ptr]]) if ptr < k_total else math.inf
        if finish <= nxt:
            transmit(current, finish)
            t = float(finish)
            rem[current] = 0.0
            del cand[current]
            completed.append((current, float(t)))
            n_events += 1
            record("complete", current)
            current = None
            if len(completed) == n_select:
                break
            admit()
            decide()
        else:
            transmit(current, nxt)
            rem[current] = max(rem[current] - rate[current] * (nxt - t), 0.0)
            c = cand[current]
            cand[current] = IdleCandidate(c.client_id, float(rem[current]), c.ul_rate_bps,
                                          c.gamma, c.age, c.frequency)
            t = nxt
            admit()
            decide()

    record("round_end", None)
    return RoundOutcome(
        completion_time_s=t,
        scheduled=completed,
        intervals=intervals,
        idle_waiting_time_s=idle_wait,
        remaining_bits=rem,
        decisions=decisions,
        n_events=n_events,
        n_preemptions=n_preempt,
        trace=log,
    )


def conservation_check(outcome: RoundOutcome, snapshot: RoundSnapshot, rtol: float = 1e-9) -> bool:
    """Delivered bits equal ``Q`` for finished clients; partial clients stay in ``[0, Q]``."""
    q = snapshot.model_bits
    done = set(outcome.scheduled_ids)
    for k in range(snapshot.n_clients):
        sent = snapshot.ul_rate_bps[k] * sum(b - a for a, b in outcome.intervals.get(k, ()))
        if k in done:
            if abs(sent - q) > rtol * q:
                return False
        else:
            left = q - sent
            if not (-rtol * q <= left <= q * (1 + rtol)):
                return False
            if abs(left - outcome.remaining_bits[k]) > rtol * q:
                return False
    return True


def write_trace(records: Iterable[dict], fh: IO[str], **extra) -> None:
    """Write trace records as JSON lines; ``extra`` fields (e.g. trial, round) are prepended."""
    for rec in records:
        fh.write(json.dumps({**extra, **rec}) + "\n")
