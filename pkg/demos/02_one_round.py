"""One communication round under each policy, on the same channel realization.

Shows the overlap of downlink, computation and uplink: clients become idle at
different times and the uplink is time-shared among them.

Run: python demos/02_one_round.py
"""
import numpy as np

from feelsched import ComputeProfile, FairnessState, PolicyParams, Population, build_round_snapshot, get_policy, run_round
from feelsched.engine import conservation_check

rng = np.random.default_rng(1)
pop = Population.random_disk(100, rng)
snap = build_round_snapshot(pop, ComputeProfile(), 32 * 1010, rng)

order = snap.arrival_order
print("first five clients to become idle:")
for k in order[:5]:
    print(f"  client {k:2d}  d={pop.geometries[k].distance_km:.3f} km  "
          f"downlink {snap.dl_latency_s[k]:.3f}s + compute {snap.compute_latency_s[k]:.3f}s "
          f"-> idle at {snap.arrival_time_s[k]:.3f}s, upload alone {snap.model_bits / snap.ul_rate_bps[k]:.3f}s")

# a fairness state in the middle of training: random ages and counts after 20 rounds
fair = FairnessState(age=rng.integers(1, 15, 100), participation_count=rng.integers(0, 8, 100), round_index=21)
settings = {
    "mrtp": PolicyParams(),
    "a_mrtp": PolicyParams(alpha=0.7),
    "of_mrtp": PolicyParams(alpha=0.5, age_threshold=5, gamma_min=1.0, f_max=0.4),
    "random": PolicyParams(),
}
print()
for name, params in settings.items():
    out = run_round(snap, get_policy(name), fair, 20, params, rng=np.random.default_rng(2))
    assert conservation_check(out, snap)
    print(f"{name:8s} T(n)={out.completion_time_s:8.3f}s  preemptions={out.n_preemptions:3d}  "
          f"idle-set-empty time={out.idle_waiting_time_s:.3f}s  first uploads={out.scheduled_ids[:6]}")
