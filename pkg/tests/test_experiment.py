import json

import numpy as np
import pytest

from feelsched.cli import main
from feelsched.experiment import (
    CSV_HEADER,
    ExperimentConfig,
    ExperimentResult,
    MetricsRecord,
    emit_outputs,
    load_config,
    mean_std,
    read_rounds_csv,
    run_experiment,
    summarize,
    summarize_csv,
)


def small(**kw):
    base = dict(n_clients=12, n_select=3, rounds=6, trials=2, seed=11, n_features=5,
                samples_per_client=40, test_per_class=20)
    base.update(kw)
    return ExperimentConfig(**base)


def test_paper_defaults():
    c = ExperimentConfig()
    assert (c.n_clients, c.n_select, c.tau, c.batch_size) == (100, 20, 4, 32)
    assert (c.tx_power_ps_dbm, c.tx_power_client_dbm, c.radius_km) == (15.0, 10.0, 0.5)
    assert c.noise_ps_watts == c.noise_client_watts == 7.96e-14
    assert c.bits == 32 * (100 * 10 + 10)


@pytest.mark.parametrize("kw", [dict(n_select=200), dict(rounds=0), dict(trials=0), dict(policy="nope"),
                                dict(alpha=2.0), dict(t_mean_s=0.001), dict(model_bits=-1.0)])
def test_config_errors(kw):
    with pytest.raises(ValueError):
        ExperimentConfig(**kw)


def test_single_round_single_client():
    res = run_experiment(ExperimentConfig(n_clients=1, n_select=1, rounds=1, trials=1))
    (rec,) = res.series[0]
    assert rec.wallclock_s == rec.latency_s > 0
    assert rec.scheduled_ids == (0,)


def test_mean_std():
    assert mean_std([1, 2, 3]) == (2.0, 1.0)
    assert mean_std([4.0]) == (4.0, 0.0)


def test_summary_from_injected_latencies():
    recs = [[MetricsRecord(t, 1, 0.0, lat, None, ())] for t, lat in enumerate([1.0, 2.0, 3.0])]
    s = summarize(recs)
    assert (s["latency_mean_s"], s["latency_std_s"]) == (2.0, 1.0)


def test_fairness_chained_across_rounds():
    res = run_experiment(small(policy="of_mrtp", rounds=15, trials=1))
    recs = res.series[0]
    for prev, nxt in zip(recs, recs[1:]):
        for k in range(12):
            expected = 1 if k in prev.scheduled_ids else prev.ages[k] + 1
            assert nxt.ages[k] == expected
        assert nxt.wallclock_s >= prev.wallclock_s
    counts = np.zeros(12, int)
    for r in recs:
        assert np.allclose(r.frequencies, counts / max(r.round - 1, 1))
        counts[list(r.scheduled_ids)] += 1
    assert np.array_equal(counts, res.participation[0])


def test_train_reports_accuracy():
    res = run_experiment(small(policy="random", eval_every=2), train=True)
    accs = [r.accuracy for r in res.series[0]]
    assert accs[0] is None and all(0 <= a <= 1 for a in accs[1::2])
    assert "accuracy_mean" in res.summary


def test_outputs_round_trip(tmp_path):
    res = run_experiment(small(policy="a_mrtp", alpha=0.7), train=True)
    paths = emit_outputs(res, tmp_path)
    lines = paths["rounds"].read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) - 1 == 2 * 6
    back = read_rounds_csv(paths["rounds"])
    for a, b in zip([r for t in res.series for r in t], [r for t in back for r in t]):
        assert (a.trial, a.round, a.wallclock_s, a.latency_s, a.accuracy, a.scheduled_ids) == \
               (b.trial, b.round, b.wallclock_s, b.latency_s, b.accuracy, b.scheduled_ids)
    assert summarize_csv(paths["rounds"]) == {k: v for k, v in res.summary.items() if k != "policy"}
    summary = [json.loads(s) for s in paths["summary"].read_text().splitlines()]
    assert summary[0]["kind"] == "summary" and len(summary) == 3
    plot = paths["plot"].read_text().splitlines()
    assert plot[0] == "policy,trial,wallclock_s,accuracy" and len(plot) == 13


def test_empty_series_writes_header_only(tmp_path):
    res = ExperimentResult(small(), [], summarize([]))
    paths = emit_outputs(res, tmp_path)
    assert paths["rounds"].read_text() == ",".join(CSV_HEADER) + "\n"


def test_deterministic_outputs(tmp_path):
    cfg = small(policy="random", trace=True)
    files = []
    for run in ("a", "b"):
        paths = emit_outputs(run_experiment(cfg, train=True), tmp_path / run)
        files.append({k: p.read_bytes() for k, p in paths.items()})
    assert files[0] == files[1]
    other = emit_outputs(run_experiment(cfg.replace(seed=12), train=True), tmp_path / "c")
    assert other["rounds"].read_bytes() != files[0]["rounds"]


def test_fixed_placement_seed_pins_geometry():
    a = run_experiment(small(fixed_placement_seed=5, seed=1, trials=1, rounds=1))
    b = run_experiment(small(fixed_placement_seed=5, seed=2, trials=1, rounds=1))
    assert a.series[0][0].latency_s != b.series[0][0].latency_s  # fading still differs
    # trial streams are independent of the number of trials
    c = run_experiment(small(trials=1))
    d = run_experiment(small(trials=3))
    assert [r.latency_s for r in c.series[0]] == [r.latency_s for r in d.series[0]]


def test_load_config(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("# paper setup\npolicy = a_mrtp\nalpha = 0.7  # MRTP fraction\nrounds = 3\n"
                 "trace = yes\nmodel_bits = none\nfixed_placement_seed = 4\n")
    c = load_config(p)
    assert (c.policy, c.alpha, c.rounds, c.trace, c.model_bits, c.fixed_placement_seed) == \
           ("a_mrtp", 0.7, 3, True, None, 4)
    p.write_text("[experiment]\nwhat = 1\n")
    with pytest.raises(ValueError):
        load_config(p)


def test_cli_simulate_and_summarize(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("n_clients = 10\nn_select = 2\n")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--policy", "mrtp", "--seed", "3",
                 "--rounds", "4", "--trials", "2", "--out", str(out), "--trace"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["policy"] == "mrtp" and printed["rounds"] == 4
    assert (out / "trace.jsonl").exists()
    assert main(["summarize", str(out / "rounds.csv")]) == 0
    again = json.loads(capsys.readouterr().out)
    assert again["latency_mean_s"] == printed["latency_mean_s"]


def test_cli_train(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("n_clients = 10\nn_select = 2\nn_features = 4\ntest_per_class = 10\n")
    assert main(["train", "--config", str(cfg), "--rounds", "2", "--out", str(tmp_path / "o")]) == 0
    assert "accuracy_mean" in json.loads(capsys.readouterr().out)


def test_cli_errors(tmp_path, capsys):
    assert main(["simulate", "--policy", "nope"]) != 0
    assert "unknown policy" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) != 0
    assert main(["summarize", str(tmp_path / "missing.csv")]) != 0
