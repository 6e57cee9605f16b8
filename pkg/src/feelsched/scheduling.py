"""Uplink client-selection rules and cross-round fairness bookkeeping.

Client ids are 0-based integers. Every rule breaks ties by the lowest id.
A pick is made each time the idle set changes; candidates carry the
state needed by all rules so a rule is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "FairnessState",
    "PolicyParams",
    "IdleCandidate",
    "DecisionContext",
    "update_ages",
    "participation_frequency",
    "mrtp_pick",
    "amrtp_pick",
    "ofmrtp_pick",
    "random_pick",
    "round_robin_pick",
    "POLICIES",
    "get_policy",
]


@dataclass(frozen=True)
class FairnessState:
    """Ages and participation counts entering round ``round_index``."""

    age: np.ndarray
    participation_count: np.ndarray
    round_index: int = 1

    @classmethod
    def initial(cls, n_clients: int) -> "FairnessState":
        return cls(
            age=np.ones(n_clients, dtype=np.int64),
            participation_count=np.zeros(n_clients, dtype=np.int64),
            round_index=1,
        )

    @property
    def n_clients(self) -> int:
        return len(self.age)

    def frequencies(self) -> np.ndarray:
        if self.round_index <= 1:
            return np.zeros(self.n_clients)
        return self.participation_count / (self.round_index - 1)


@dataclass(frozen=True)
class PolicyParams:
    alpha: float = 0.5
    age_threshold: int = 5
    gamma_min: float = 1.0
    f_max: float = 0.4

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.age_threshold < 0:
            raise ValueError("age_threshold must be nonnegative")
        if self.gamma_min < 0:
            raise ValueError("gamma_min must be nonnegative")
        if not 0.0 < self.f_max <= 1.0:
            raise ValueError("f_max must lie in (0, 1]")

    def mrtp_quota(self, n_select: int) -> int:
        """Number of completed uploads before the fairness phase starts."""
        # round before ceil so that e.g. 0.7 * 20 does not become 14.000000000000002
        return math.ceil(round(self.alpha * n_select, 9))


@dataclass(frozen=True)
class IdleCandidate:
    client_id: int
    remaining_bits: float
    ul_rate_bps: float
    gamma: float = 1.0
    age: int = 1
    frequency: float = 0.0

    @property
    def remaining_time(self) -> float:
        return self.remaining_bits / self.ul_rate_bps


def update_ages(state: FairnessState, scheduled_set) -> FairnessState:
    """Advance to the next round: scheduled clients get age 1, the rest age by one."""
    ids = np.fromiter(scheduled_set, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= state.n_clients):
        raise ValueError(f"unknown client id in {sorted(scheduled_set)}")
    if len(np.unique(ids)) != ids.size:
        raise ValueError("duplicate client ids in scheduled set")
    age = state.age + 1
    age[ids] = 1
    count = state.participation_count.copy()
    count[ids] += 1
    return FairnessState(age=age, participation_count=count, round_index=state.round_index + 1)


def participation_frequency(state: FairnessState, k: int) -> float:
    if state.round_index <= 1:
        return 0.0
    return float(state.participation_count[k]) / (state.round_index - 1)


def _require(candidates):
    if not candidates:
        raise ValueError("no idle candidates to schedule")


def _argmin(candidates, key) -> int:
    return min(candidates, key=lambda c: (key(c), c.client_id)).client_id


def mrtp_pick(candidates: Sequence[IdleCandidate]) -> int:
    """Idle client with the least remaining upload time."""
    _require(candidates)
    return _argmin(candidates, lambda c: c.remaining_time)


def amrtp_pick(candidates, state: FairnessState, uploads_completed: int,
               params: PolicyParams, n_select: int) -> int:
    """MRTP for the first ``ceil(alpha N)`` uploads, then min remaining-time / age."""
    _require(candidates)
    if uploads_completed < params.mrtp_quota(n_select):
        return mrtp_pick(candidates)
    return _argmin(candidates, lambda c: c.remaining_time / c.age)


def ofmrtp_pick(candidates, state: FairnessState, uploads_completed: int,
                params: PolicyParams, n_select: int, wait_if_ineligible: bool = False) -> Optional[int]:
    """Opportunistic fair MRTP.

    Clients at or above ``f_max`` are excluded. The first ``ceil(alpha N)`` uploads
    follow MRTP over the remaining clients; afterwards the client with the largest
    relative rate ``gamma`` among those with ``age > a_th`` and ``gamma > gamma_min``
    is picked, falling back to MRTP when none qualifies.

    If every candidate is excluded, MRTP over all candidates is used, unless
    ``wait_if_ineligible`` is set, in which case ``None`` is returned and the caller
    leaves the channel idle until the idle set changes.
    """
    _require(candidates)
    eligible = [c for c in candidates if c.frequency < params.f_max]
    if not eligible:
        return None if wait_if_ineligible else mrtp_pick(candidates)
    if uploads_completed < params.mrtp_quota(n_select):
        return mrtp_pick(eligible)
    opportunistic = [c for c in eligible
                     if c.age > params.age_threshold and c.gamma > params.gamma_min]
    if opportunistic:
        return _argmin(opportunistic, lambda c: -c.gamma)
    return mrtp_pick(eligible)


def random_pick(candidates, rng: np.random.Generator) -> int:
    _require(candidates)
    return candidates[int(rng.integers(len(candidates)))].client_id


def round_robin_pick(candidates, state: Optional[FairnessState] = None) -> int:
    """Oldest idle client first."""
    _require(candidates)
    return _argmin(candidates, lambda c: -c.age)


@dataclass
class DecisionContext:
    """Round-level inputs a rule may consult when the engine asks for a pick."""

    fairness: FairnessState
    params: PolicyParams
    n_select: int
    uploads_completed: int = 0
    arrivals_pending: bool = False
    rng: Optional[np.random.Generator] = field(default=None, repr=False)


Policy = Callable[[Sequence[IdleCandidate], DecisionContext], Optional[int]]


def _mrtp(cands, ctx):
    return mrtp_pick(cands)


def _amrtp(cands, ctx):
    return amrtp_pick(cands, ctx.fairness, ctx.uploads_completed, ctx.params, ctx.n_select)


def _ofmrtp(cands, ctx):
    return ofmrtp_pick(cands, ctx.fairness, ctx.uploads_completed, ctx.params, ctx.n_select,
                       wait_if_ineligible=ctx.arrivals_pending)


def _random(cands, ctx):
    if ctx.rng is None:
        raise ValueError("random policy needs an rng in the decision context")
    return random_pick(cands, ctx.rng)


def _round_robin(cands, ctx):
    return round_robin_pick(cands, ctx.fairness)


POLICIES: dict[str, Policy] = {
    "mrtp": _mrtp,
    "a_mrtp": _amrtp,
    "of_mrtp": _ofmrtp,
    "random": _random,
    "round_robin": _round_robin,
}


def get_policy(name: str) -> Policy:
    key = name.lower().replace("-", "_")
    try:
        return POLICIES[key]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
