"""Per-round latency against participation balance over many rounds.

MRTP is fastest but keeps serving the clients close to the PS; the fairness-aware
rules spread participation at a latency cost.

Run: python demos/03_latency_vs_fairness.py   (about half a minute)
"""
import numpy as np

from feelsched import ExperimentConfig, run_experiment

runs = {
    "mrtp": dict(policy="mrtp"),
    "a_mrtp (alpha=0.7)": dict(policy="a_mrtp", alpha=0.7),
    "of_mrtp (0.5, 5, 0.4)": dict(policy="of_mrtp", alpha=0.5, age_threshold=5, f_max=0.4),
    "of_mrtp (0.25, 10, 0.3)": dict(policy="of_mrtp", alpha=0.25, age_threshold=10, f_max=0.3),
    "round_robin": dict(policy="round_robin"),
    "random": dict(policy="random"),
}
print(f"{'policy':25s} {'latency [s]':>14s} {'never served':>13s} {'max count':>10s} {'min count':>10s}")
for label, kw in runs.items():
    res = run_experiment(ExperimentConfig(rounds=300, trials=3, seed=5, **kw))
    s = res.summary
    counts = np.array(res.participation)
    print(f"{label:25s} {s['latency_mean_s']:7.2f} ± {s['latency_std_s']:5.2f} "
          f"{np.mean((counts == 0).sum(axis=1)):13.1f} {counts.max(axis=1).mean():10.1f} "
          f"{counts.min(axis=1).mean():10.1f}")
