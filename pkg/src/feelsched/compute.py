"""Shifted-exponential latency of ``tau`` local SGD steps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["ComputeProfile", "sample_compute_latency", "compute_latency_cdf"]


@dataclass(frozen=True)
class ComputeProfile:
    """Per-step latency law: ``t_min_s`` plus an exponential with mean ``mu_s``.

    The per-step mean is ``t_mean_s = t_min_s + mu_s``.
    """

    tau: int = 4
    t_min_s: float = 0.005
    t_mean_s: float = 0.010

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be a positive integer")
        if not self.t_min_s > 0:
            raise ValueError("t_min_s must be positive")
        if self.t_mean_s < self.t_min_s:
            raise ValueError("t_mean_s must be >= t_min_s")

    @property
    def mu_s(self) -> float:
        return self.t_mean_s - self.t_min_s


def sample_compute_latency(profile: ComputeProfile, rng: np.random.Generator, size=None):
    """Time to finish ``tau`` local steps, ``tau * (t_min + Exp(mean=mu))``."""
    if profile.mu_s == 0:
        extra = np.zeros(size) if size is not None else 0.0
    else:
        extra = rng.exponential(profile.mu_s, size)
    return profile.tau * (profile.t_min_s + extra)


def compute_latency_cdf(profile: ComputeProfile, t):
    """``P(latency <= t)``; zero below ``tau * t_min``."""
    t = np.asarray(t, dtype=float)
    shifted = t / profile.tau - profile.t_min_s
    if profile.mu_s == 0:
        out = (shifted >= 0).astype(float)
    else:
        out = np.where(shifted > 0, -np.expm1(-np.maximum(shifted, 0.0) / profile.mu_s), 0.0)
    return float(out) if out.ndim == 0 else out
