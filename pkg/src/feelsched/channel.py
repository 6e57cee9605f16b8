"""Path loss, block Rayleigh fading and link-rate model for the PS <-> client links.

Rates are spectral efficiencies ``log2(1 + snr)`` scaled by a bandwidth ``W`` so that
latencies come out in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "D_MIN_KM",
    "NOISE_WATTS",
    "RadioGeometry",
    "LinkRates",
    "dbm_to_watts",
    "path_loss",
    "gain_std",
    "sample_fading",
    "spectral_efficiency",
    "instantaneous_rate",
    "long_term_avg_rate",
    "ergodic_spectral_efficiency",
    "scaled_exp1",
    "place_clients",
    "sample_link_rates",
]

D_MIN_KM = 0.001
NOISE_WATTS = 7.96e-14
PL_INTERCEPT_DB = 148.1
PL_SLOPE_DB = 37.6

_EULER_GAMMA = 0.5772156649015329


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def path_loss(distance_km: float, d_min: float = D_MIN_KM) -> float:
    """Path loss in dB, ``148.1 + 37.6 log10(d)`` with ``d`` in km."""
    if not distance_km > 0 or distance_km < d_min:
        raise ValueError(f"distance {distance_km!r} km is below the minimum {d_min} km")
    return PL_INTERCEPT_DB + PL_SLOPE_DB * math.log10(distance_km)


def gain_std(path_loss_db: float) -> float:
    return math.sqrt(10.0 ** (-path_loss_db / 10.0))


@dataclass(frozen=True)
class RadioGeometry:
    """Static radio parameters of one client.

    ``tx_power_ps_watts``/``noise_client_watts`` govern the downlink,
    ``tx_power_client_watts``/``noise_ps_watts`` the uplink.
    """

    distance_km: float
    path_loss_db: float
    gain_std: float
    tx_power_ps_watts: float
    tx_power_client_watts: float
    noise_ps_watts: float
    noise_client_watts: float

    def __post_init__(self):
        for name in ("distance_km", "gain_std", "tx_power_ps_watts", "tx_power_client_watts",
                     "noise_ps_watts", "noise_client_watts"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def from_distance(
        cls,
        distance_km: float,
        tx_power_ps_dbm: float = 15.0,
        tx_power_client_dbm: float = 10.0,
        noise_ps_watts: float = NOISE_WATTS,
        noise_client_watts: float = NOISE_WATTS,
        d_min: float = D_MIN_KM,
    ) -> "RadioGeometry":
        pl = path_loss(distance_km, d_min)
        return cls(
            distance_km=distance_km,
            path_loss_db=pl,
            gain_std=gain_std(pl),
            tx_power_ps_watts=dbm_to_watts(tx_power_ps_dbm),
            tx_power_client_watts=dbm_to_watts(tx_power_client_dbm),
            noise_ps_watts=noise_ps_watts,
            noise_client_watts=noise_client_watts,
        )

    def mean_snr(self, direction: str) -> float:
        """Average SNR of the link, i.e. the SNR at unit fading power."""
        if direction == "dl":
            return self.tx_power_ps_watts * self.gain_std**2 / self.noise_client_watts
        if direction == "ul":
            return self.tx_power_client_watts * self.gain_std**2 / self.noise_ps_watts
        raise ValueError(f"direction must be 'dl' or 'ul', got {direction!r}")


@dataclass(frozen=True)
class LinkRates:
    """One round's fading realization and the resulting rates of a client."""

    dl_fading_power: float
    ul_fading_power: float
    dl_rate_bps: float
    ul_rate_bps: float
    bandwidth_hz: float


def sample_fading(rng: np.random.Generator, size=None):
    """Squared magnitude of a unit-power Rayleigh coefficient, i.e. Exp(1)."""
    return rng.exponential(1.0, size)


def spectral_efficiency(snr):
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("snr must be nonnegative")
    out = np.log2(1.0 + snr)
    return float(out) if out.ndim == 0 else out


def instantaneous_rate(geom: RadioGeometry, direction: str, fading_power, bandwidth_hz: float):
    fading_power = np.asarray(fading_power, dtype=float)
    if np.any(fading_power < 0):
        raise ValueError("fading power must be nonnegative")
    return bandwidth_hz * spectral_efficiency(geom.mean_snr(direction) * fading_power)


def scaled_exp1(x: float) -> float:
    """``exp(x) * E1(x)`` for ``x > 0``, stable for large ``x``.

    Power series below 1, modified Lentz continued fraction above.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    if x <= 1.0:
        # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        total, term, k = 0.0, 1.0, 1
        while True:
            term *= -x / k
            contrib = term / k
            total += contrib
            if abs(contrib) < 1e-17 * max(abs(total), 1e-300):
                break
            k += 1
        return math.exp(x) * (-_EULER_GAMMA - math.log(x) - total)
    # E1(x) e^x = 1/(x+1- 1^2/(x+3- 2^2/(x+5- ...)))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


def long_term_avg_rate(geom: RadioGeometry, direction: str, bandwidth_hz: float) -> float:
    """Ergodic rate ``W E[log2(1 + snr X)]`` with ``X ~ Exp(1)``.

    Closed form ``W exp(1/snr) E1(1/snr) / ln 2``.
    """
    return bandwidth_hz * ergodic_spectral_efficiency(geom.mean_snr(direction))


def ergodic_spectral_efficiency(mean_snr: float) -> float:
    if not mean_snr > 0:
        raise ValueError("mean snr must be positive")
    return scaled_exp1(1.0 / mean_snr) / math.log(2.0)


def place_clients(n_clients: int, radius_km: float, rng: np.random.Generator,
                  d_min: float = D_MIN_KM) -> np.ndarray:
    """Distances of clients dropped uniformly (by area) in a disk around the PS."""
    r = radius_km * np.sqrt(rng.random(n_clients))
    return np.maximum(r, d_min)


def sample_link_rates(geom: RadioGeometry, bandwidth_hz: float, rng: np.random.Generator) -> LinkRates:
    """Draw independent dl/ul block-fading powers for one round and convert to rates."""
    h_dl, h_ul = sample_fading(rng, 2)
    return LinkRates(
        dl_fading_power=float(h_dl),
        ul_fading_power=float(h_ul),
        dl_rate_bps=float(instantaneous_rate(geom, "dl", h_dl, bandwidth_hz)),
        ul_rate_bps=float(instantaneous_rate(geom, "ul", h_ul, bandwidth_hz)),
        bandwidth_hz=bandwidth_hz,
    )
