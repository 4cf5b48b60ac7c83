import csv
import itertools
import json

import numpy as np
import pytest

from jdr.experiments import (
    TABLE5,
    THREADS_ENV,
    ConfigError,
    ExperimentConfig,
    bootstrap_ci,
    jdr_config_from,
    parse_config_text,
    replay_table5,
    resolve_threads,
    run_experiment,
)
from jdr.spectral import BY_ABS, BY_VALUE


def cfg_from(text):
    return ExperimentConfig.from_mapping(parse_config_text(text))


SWEEP = """
experiment.kind = csbm_sweep
experiment.n_seeds = 5
csbm.n = 200
csbm.f = 80
csbm.phi = -0.75, 0.0, 0.75
jdr.replay_table5 = true
jdr.K_cap = 2
"""


def test_replay_examples():
    c = replay_table5(0.0)
    assert (c.K, c.L_A, c.eta_A) == (80, 1, 1.0)
    assert not c.denoise_active and c.eta_X2 == 0.0
    c = replay_table5(0.5)
    assert (c.K, c.L_A, c.L_X, c.eta_A, c.eta_X1, c.eta_X2) == (18, 10, 9, 0.415, 0.263, 0.880)
    assert c.ordering == BY_VALUE
    c = replay_table5(-1.0)
    assert not c.rewire_active and c.L_A is None
    assert (c.L_X, c.eta_X1, c.eta_X2) == (10, 0.482, 0.916)
    assert c.ordering == BY_ABS


def test_replay_all_rows_valid():
    assert len(TABLE5) == 17
    for phi in TABLE5:
        replay_table5(phi)


def test_replay_untabulated_lists_values():
    with pytest.raises(ValueError, match=r"valid values: -1, -0.875"):
        replay_table5(0.3)


def test_parse_values():
    m = parse_config_text("a = 1\nb = 0.5  # note\nc = x, 2\nd = true\ne = -\n\n# comment\n")
    assert m == {"a": 1, "b": 0.5, "c": ["x", 2], "d": True, "e": None}


@pytest.mark.parametrize("text, key", [
    ("experiment.kind = csbm_sweep\ncsbm.phi = 0\njdr.K = 3\njdr.L_A = 1\njdr.L_X = 1\njdr.eta_X1 = 0\njdr.eta_X2 = 0\n", "jdr.eta_A"),
    ("experiment.kind = magic\n", "experiment.kind"),
    ("experiment.kind = prop1\nprop1.lambda = 1.5\nprop1.mu = 2\n", "prop1.eta"),
    ("experiment.kind = prop1\nprop1.lambda = 1.5\nprop1.mu = 2\nprop1.eta = 0.1\nprop1.colour = red\n", "prop1.colour"),
    ("experiment.kind = csbm_sweep\nexperiment.n_seeds = 0\n", "experiment.n_seeds"),
    ("experiment.kind = real_dataset\ndataset.path = x\ncsbm.phi = 0\n", "dataset"),
    ("experiment.kind = real_dataset\n", "dataset"),
    ("experiment.kind = csbm_sweep\ncsbm.phi = 0\njdr.replay_table5 = true\njdr.top_k = many\n", "jdr.top_k"),
    ("experiment.kind = csbm_sweep\ncsbm.phi = 0.3\njdr.replay_table5 = true\n", "jdr"),
    ("experiment.kind = diffusion_baseline\ncsbm.phi = 0\ndigl.alpha = 0\n", "digl.alpha"),
    ("x\n", "<config>:1"),
    ("a = 1\na = 2\n", "a"),
])
def test_config_errors_name_key(text, key):
    with pytest.raises(ConfigError) as info:
        cfg_from(text)
    assert info.value.key == key
    assert str(info.value).startswith(key)


def test_jdr_config_explicit_keys():
    m = parse_config_text("jdr.K=4\njdr.L_A=2\njdr.L_X=-\njdr.eta_A=0.3\njdr.eta_X1=-\njdr.eta_X2=-\njdr.ordering=by_abs_desc\n")
    c = jdr_config_from(m)
    assert (c.K, c.L_A, c.L_X, c.eta_A, c.eta_X1) == (4, 2, None, 0.3, 0.0)
    assert c.ordering == BY_ABS


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_csbm_sweep_rows_and_determinism(tmp_path):
    cfg = cfg_from(SWEEP)
    out = run_experiment(cfg, tmp_path / "a")
    assert not out.failures
    rows = read_rows(tmp_path / "a" / "results.csv")
    assert rows[0] == ["experiment", "seed", "condition", "metric", "value", "wall_ms"]
    assert len(rows) - 1 == 45
    assert {r[3] for r in rows[1:]} == {"alignment_before", "alignment_after", "sc_accuracy"}
    assert [int(r[1]) for r in rows[1::9]] == [0, 1, 2, 3, 4]
    run_experiment(cfg, tmp_path / "b", threads=3)
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a == (tmp_path / "b" / "results.csv").read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    e = summary["entries"][0]
    assert e["n"] == 5 and e["ci_low"] <= e["mean"] <= e["ci_high"]
    assert summary["n_bootstrap"] == 1000


def test_seed_override(tmp_path):
    out = run_experiment(cfg_from(SWEEP), tmp_path, n_seeds=1)
    assert len(out.records) == 9


def test_wall_time_opt_in(tmp_path):
    out = run_experiment(cfg_from(SWEEP + "output.wall_time = true\n"), tmp_path, n_seeds=1)
    assert all(r.wall_ms > 0 for r in out.records)


def test_prop1_summary_has_fraction_improved(tmp_path):
    cfg = cfg_from("experiment.kind = prop1\nprop1.n = 200\nprop1.f = 80\nprop1.lambda = 1.5\n"
                   "prop1.mu = 2.0\nprop1.eta = 0.05\nprop1.n_trials = 2\n")
    out = run_experiment(cfg, tmp_path)
    metrics = {(e["experiment"], e["metric"]) for e in out.summary["entries"]}
    assert ("prop1[graph]", "fraction_improved") in metrics
    assert ("prop1[features]", "fraction_improved") in metrics


def test_ridge_sweep(tmp_path):
    cfg = cfg_from("experiment.kind = ridge_sweep\nridge.n = 100\nridge.lambda = 1\nridge.mu = 1\n"
                   "ridge.n_trials = 2\nridge.eta_grid = 0, 0.1, 1\n")
    out = run_experiment(cfg, tmp_path)
    assert len(out.records) == 6
    assert out.records[0].condition == "none" and out.records[0].metric == "mse@eta=0"


def test_dataset_kinds(tmp_path, small_csbm):
    from jdr.dataset_io import save_dataset

    save_dataset(small_csbm, tmp_path / "ds")
    base = f"dataset.path = {tmp_path / 'ds'}\n"
    real = cfg_from("experiment.kind = real_dataset\n" + base + "jdr.K=2\njdr.L_A=2\njdr.L_X=2\njdr.eta_A=0.3\n"
                    "jdr.eta_X1=0.2\njdr.eta_X2=0.5\neval.metrics = homophily_before,homophily_after,sc_accuracy_raw\n")
    out = run_experiment(real, tmp_path / "r")
    assert [r.condition for r in out.records] == ["none", "jdr", "none"]
    digl = cfg_from("experiment.kind = diffusion_baseline\n" + base + "digl.alpha = 0.1\ndigl.top_k = 8\n")
    out = run_experiment(digl, tmp_path / "d")
    assert {r.condition for r in out.records} == {"none", "digl"}


def test_partial_flush_on_failure(tmp_path):
    cfg = cfg_from("experiment.kind = real_dataset\nexperiment.n_seeds = 2\ndataset.path = /nonexistent\n"
                   "jdr.replay_table5 = false\njdr.K=1\njdr.L_A=1\njdr.L_X=1\njdr.eta_A=0.5\njdr.eta_X1=0\njdr.eta_X2=0\n")
    out = run_experiment(cfg, tmp_path)
    assert [s for s, _ in out.failures] == [0, 1]
    assert len(read_rows(tmp_path / "results.csv")) == 1
    assert json.loads((tmp_path / "summary.json").read_text())["failures"][0]["seed"] == 0


def test_threads_resolution(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_threads() == 1
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv(THREADS_ENV, "lots")
    with pytest.raises(ConfigError):
        resolve_threads()


def _exhaustive_quantiles(x, level=0.95):
    # every one of the n^n equally likely resamples
    means = np.array([np.mean(c) for c in itertools.product(x, repeat=len(x))])
    a = (1 - level) / 2
    return np.quantile(means, a), np.quantile(means, 1 - a), means.std()


def test_bootstrap_against_exhaustive_oracle():
    x = np.array([1.0, 2.0, 4.0, 7.0, 11.0])
    lo_ref, hi_ref, sd = _exhaustive_quantiles(x)
    lo, hi = bootstrap_ci(x, seed=0)
    # Monte-Carlo error of a 2.5% quantile from 1000 draws is a fraction of the sd
    assert abs(lo - lo_ref) < 0.35 * sd and abs(hi - hi_ref) < 0.35 * sd
    assert lo < x.mean() < hi


def test_bootstrap_degenerate():
    assert bootstrap_ci([3.0]) == (3.0, 3.0)
    assert bootstrap_ci([2.0, 2.0, 2.0]) == (2.0, 2.0)
