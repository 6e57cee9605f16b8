"""Toy federated training: accuracy against wall-clock time per policy.

Softmax regression on a 10-class Gaussian mixture, 100 clients holding 40 samples
from at most 4 classes each. Writes results/<policy>/{rounds,plot}.csv and, if
matplotlib is installed, results/accuracy_vs_time.png.

Run: python demos/04_federated_training.py   (a few minutes)
"""
from pathlib import Path

from feelsched import ExperimentConfig, emit_outputs, run_experiment

out = Path("results")
policies = {
    "mrtp": dict(policy="mrtp"),
    "a_mrtp": dict(policy="a_mrtp", alpha=0.7),
    "of_mrtp": dict(policy="of_mrtp", alpha=0.5, age_threshold=5, f_max=0.4),
    "random": dict(policy="random"),
}
curves = {}
for name, kw in policies.items():
    cfg = ExperimentConfig(rounds=1000, trials=2, seed=3, eval_every=25, **kw)
    res = run_experiment(cfg, train=True)
    emit_outputs(res, out / name)
    s = res.summary
    print(f"{name:8s} final accuracy {100 * s['accuracy_mean']:.2f} ± {100 * s['accuracy_std']:.2f} %, "
          f"per-round latency {s['latency_mean_s']:.2f} s")
    first = res.series[0]
    curves[name] = [(r.wallclock_s, r.accuracy) for r in first if r.accuracy is not None]

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    raise SystemExit(0)

fig, ax = plt.subplots(figsize=(6, 4))
for name, pts in curves.items():
    t, a = zip(*pts)
    ax.plot(t, a, label=name)
ax.set_xscale("log")
ax.set_xlabel("wall-clock time [s]")
ax.set_ylabel("test accuracy")
ax.legend()
fig.tight_layout()
fig.savefig(out / "accuracy_vs_time.png", dpi=120)
print(f"wrote {out / 'accuracy_vs_time.png'}")
