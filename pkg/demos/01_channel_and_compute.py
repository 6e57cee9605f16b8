"""Link budget, fading and computation delay for the default cell.

Run: python demos/01_channel_and_compute.py
"""
import numpy as np

from feelsched.channel import RadioGeometry, instantaneous_rate, long_term_avg_rate, sample_fading
from feelsched.compute import ComputeProfile, compute_latency_cdf, sample_compute_latency

W = 1e6           # bandwidth, Hz
Q = 32 * 1010     # bits in the toy model

# Path loss grows with 37.6 dB/decade, so SNR spans several orders of magnitude
# between a client next to the PS and one at the 500 m cell edge.
print(f"{'d [km]':>7} {'PL [dB]':>8} {'UL SNR':>10} {'avg UL rate':>12} {'avg upload':>11}")
for d in (0.01, 0.05, 0.1, 0.2, 0.3, 0.5):
    g = RadioGeometry.from_distance(d)
    avg = long_term_avg_rate(g, "ul", W)
    print(f"{d:7.2f} {g.path_loss_db:8.1f} {g.mean_snr('ul'):10.3g} {avg:10.3g}/s {Q / avg:10.3g}s")

# Block Rayleigh fading: one Exp(1) power draw per round and direction.
rng = np.random.default_rng(0)
g = RadioGeometry.from_distance(0.3)
h = sample_fading(rng, 100_000)
inst = instantaneous_rate(g, "ul", h, W)
print(f"\n0.3 km client: mean instantaneous rate {inst.mean():.4g} b/s, "
      f"closed form {long_term_avg_rate(g, 'ul', W):.4g} b/s")
print(f"rounds with rate below 10% of average: {np.mean(inst < 0.1 * inst.mean()):.1%}")

# Local computation: tau steps, each T_min plus an exponential with mean T_bar - T_min.
prof = ComputeProfile(tau=4, t_min_s=0.005, t_mean_s=0.010)
x = sample_compute_latency(prof, rng, 100_000)
print(f"\ncompute latency: min {x.min() * 1e3:.2f} ms (floor {prof.tau * prof.t_min_s * 1e3:.0f} ms), "
      f"mean {x.mean() * 1e3:.2f} ms")
for t in (0.02, 0.03, 0.04, 0.06):
    print(f"  P(done by {t * 1e3:.0f} ms) = {compute_latency_cdf(prof, t):.3f}  empirical {np.mean(x <= t):.3f}")
