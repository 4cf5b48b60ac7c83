"""Seeded multi-trial experiments driven by flat ``key = value`` config files.

A config is a list of dotted keys, one per line::

    experiment.kind = csbm_sweep
    experiment.n_seeds = 5
    csbm.phi = -0.75, 0.0, 0.75
    jdr.replay_table5 = true
    jdr.K_cap = 30

Every run writes ``results.csv`` (columns experiment, seed, condition,
metric, value, wall_ms) and ``summary.json`` (mean and 95% bootstrap
interval per experiment/condition/metric).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .alignment import alignment
from .csbm import CsbmParams, sample_csbm
from .dataset_io import load_dataset
from .diffusion import DiglConfig, ppr_diffuse
from .evaluation import check_prop1, ridge_denoise_sweep, spectral_cluster
from .graph import Dataset, edge_homophily
from .jdr import JdrConfig, jdr_run
from .spectral import BY_ABS, BY_VALUE, eigs_top, svd_top

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultRecord",
    "TABLE5",
    "replay_table5",
    "parse_config_text",
    "load_config",
    "jdr_config_from",
    "bootstrap_ci",
    "run_experiment",
    "write_results",
    "THREADS_ENV",
]

log = logging.getLogger(__name__)

THREADS_ENV = "JDR_THREADS"
KINDS = ("csbm_sweep", "real_dataset", "prop1", "ridge_sweep", "alignment_sweep", "diffusion_baseline")
CSV_COLUMNS = ("experiment", "seed", "condition", "metric", "value", "wall_ms")
N_BOOTSTRAP = 1000

# sub-stream ids under the root seed
_DATASET, _SOLVER, _KMEANS, _BOOTSTRAP = 0, 1, 2, 3

# phi: (K, L_A, L_X, eta_A, eta_X1, eta_X2); None marks a dash in the table
TABLE5 = {
    -1.0: (28, None, 10, None, 0.482, 0.916),
    -0.875: (41, 5, 8, 0.101, 0.479, 0.858),
    -0.75: (40, 6, 9, 0.042, 0.498, 0.846),
    -0.625: (48, 6, 8, 0.036, 0.453, 0.862),
    -0.5: (50, 9, 10, 0.189, 0.412, 0.991),
    -0.375: (48, 8, 10, 0.879, 0.973, 0.773),
    -0.25: (80, 1, 1, 1.000, None, None),
    -0.125: (80, 1, 1, 1.000, None, None),
    0.0: (80, 1, 1, 1.000, None, None),
    0.125: (76, 1, None, 0.650, None, None),
    0.25: (33, 1, None, 0.951, None, None),
    0.375: (18, 10, 10, 0.856, 0.023, 0.228),
    0.5: (18, 10, 9, 0.415, 0.263, 0.880),
    0.625: (22, 8, 7, 0.264, 0.340, 0.807),
    0.75: (15, 7, 9, 0.056, 0.474, 0.778),
    0.875: (16, 10, 8, 0.035, 0.228, 0.981),
    1.0: (80, None, 1, None, 1.000, 1.000),
}
# DIGL teleport probabilities tabulated next to the JDR values
TABLE5_ALPHA = {
    -1.0: 1.0, -0.875: 1.0, -0.75: 1.0, -0.625: 1.0, -0.5: 1.0, -0.375: 1.0,
    -0.25: 1.0, -0.125: 1.0, 0.0: 0.95, 0.125: 1.0, 0.25: 0.5, 0.375: 0.05,
    0.5: 0.05, 0.625: 0.05, 0.75: 0.05, 0.875: 0.05, 1.0: 0.05,
}


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration; ``key`` is the dotted path."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _table_key(phi):
    for k in TABLE5:
        if abs(k - float(phi)) < 1e-9:
            return k
    valid = ", ".join(f"{k:g}" for k in TABLE5)
    raise ValueError(f"phi={phi} is not tabulated; valid values: {valid}")


def replay_table5(phi, **overrides) -> JdrConfig:
    """Tabulated cSBM configuration for ``phi``; a dashed side is inactive.

    Heterophilic rows (``phi < 0``) order eigenvalues by magnitude, the
    others by value. Keyword overrides are passed to :class:`JdrConfig`.
    """
    key = _table_key(phi)
    K, L_A, L_X, eta_A, eta_X1, eta_X2 = TABLE5[key]
    kw = dict(
        K=K,
        L_A=L_A,
        L_X=L_X,
        eta_A=eta_A or 0.0,
        eta_X1=eta_X1 or 0.0,
        eta_X2=eta_X2 or 0.0,
        ordering=BY_ABS if key < 0 else BY_VALUE,
    )
    kw.update(overrides)
    return JdrConfig(**kw)


# -- config parsing ---------------------------------------------------------


def _parse_value(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "-", ""):
        return None
    if "," in raw:
        return [_parse_value(p) for p in raw.split(",") if p.strip()]
    for conv in (int, float):
        try:
            return conv(raw)
        except ValueError:
            pass
    return raw


def parse_config_text(text: str, source="<config>") -> dict:
    """Flat mapping of dotted keys to parsed values. ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", f"expected 'key = value', got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}", "empty key")
        if key in out:
            raise ConfigError(key, f"duplicate key at {source}:{lineno}")
        out[key] = _parse_value(val)
    return out


def load_config(path) -> "ExperimentConfig":
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(str(path), f"cannot read config ({err.strerror})") from err
    return ExperimentConfig.from_mapping(parse_config_text(text, str(path)))


class _Keys:
    """Typed access to a flat mapping that records which keys were consumed."""

    def __init__(self, mapping):
        self.m = dict(mapping)
        self.used = set()

    def has_prefix(self, prefix):
        return any(k.startswith(prefix + ".") for k in self.m)

    def get(self, key, kind=None, default=..., choices=None):
        if key not in self.m or self.m[key] is None and default is not ...:
            if default is ...:
                raise ConfigError(key, "required key is missing")
            self.used.add(key)
            return default
        self.used.add(key)
        val = self.m[key]
        if kind is not None and val is not None:
            val = self._convert(key, val, kind)
        if choices is not None and val not in choices:
            raise ConfigError(key, f"must be one of {', '.join(map(str, choices))}; got {val!r}")
        return val

    @staticmethod
    def _convert(key, val, kind):
        if kind == "floats":
            vals = val if isinstance(val, list) else [val]
            return [_Keys._convert(key, v, float) for v in vals]
        if kind is bool:
            if not isinstance(val, bool):
                raise ConfigError(key, f"expected true/false, got {val!r}")
            return val
        if isinstance(val, list) or isinstance(val, bool):
            raise ConfigError(key, f"expected a single {kind.__name__}, got {val!r}")
        try:
            out = kind(val)
        except (TypeError, ValueError):
            raise ConfigError(key, f"expected {kind.__name__}, got {val!r}") from None
        if kind is int and float(val) != out:
            raise ConfigError(key, f"expected an integer, got {val!r}")
        return out

    def unused(self):
        return sorted(set(self.m) - self.used)


_JDR_REQUIRED = ("K", "L_A", "L_X", "eta_A", "eta_X1", "eta_X2")


def jdr_config_from(keys, prefix="jdr", phi=None) -> JdrConfig:
    """Build a :class:`JdrConfig` from ``prefix.*`` keys.

    With ``prefix.replay_table5 = true`` the tabulated row for ``phi`` is
    used and only ``K_cap`` and solver options are read; otherwise every
    hyperparameter must be present.
    """
    keys = keys if isinstance(keys, _Keys) else _Keys(keys)
    p = prefix + "."
    extra = dict(
        top_k=keys.get(p + "top_k", int, 64),
        binarize_features=keys.get(p + "binarize_features", bool, False),
        update_order=keys.get(p + "update_order", str, "jacobi", ("jacobi", "gauss_seidel")),
        renormalize=keys.get(p + "renormalize", bool, False),
        tol=keys.get(p + "tol", float, 1e-8),
        solver=keys.get(p + "solver", str, "auto", ("auto", "lanczos", "dense")),
    )
    ordering = keys.get(p + "ordering", str, None, (None, BY_VALUE, BY_ABS))
    k_cap = keys.get(p + "K_cap", int, None)
    try:
        if keys.get(p + "replay_table5", bool, False):
            if phi is None:
                raise ConfigError(p + "replay_table5", "needs a cSBM phi to look up")
            cfg = replay_table5(phi, **extra)
        else:
            vals = {}
            for name in _JDR_REQUIRED:
                kind = int if name in ("K", "L_A", "L_X") else float
                vals[name] = keys.get(p + name, kind)
            for name in ("eta_A", "eta_X1", "eta_X2"):
                vals[name] = 0.0 if vals[name] is None else vals[name]
            cfg = JdrConfig(**vals, **extra)
        if ordering is not None:
            cfg = replace(cfg, ordering=ordering)
        if k_cap is not None:
            cfg = replace(cfg, K=min(cfg.K, k_cap))
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(prefix, str(err)) from err
    return cfg


@dataclass
class ExperimentConfig:
    """Parsed experiment description. ``params`` keeps the raw flat mapping."""

    kind: str
    name: str
    n_seeds: int
    root_seed: int = 0
    dataset_path: str | None = None
    csbm: dict | None = None
    phis: list = field(default_factory=list)
    metrics: tuple = ()
    output: str = "results"
    wall_time: bool = False
    params: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, mapping) -> "ExperimentConfig":
        k = _Keys(mapping)
        kind = k.get("experiment.kind", str, choices=KINDS)
        name = k.get("experiment.name", str, kind)
        n_seeds = k.get("experiment.n_seeds", int, 1)
        if n_seeds < 1:
            raise ConfigError("experiment.n_seeds", "must be >= 1")
        cfg = cls(
            kind=kind,
            name=name,
            n_seeds=n_seeds,
            root_seed=k.get("experiment.root_seed", int, 0),
            output=k.get("output.dir", str, "results"),
            wall_time=k.get("output.wall_time", bool, False),
            params=dict(mapping),
        )
        if kind in ("csbm_sweep", "real_dataset", "alignment_sweep", "diffusion_baseline"):
            has_path, has_csbm = "dataset.path" in mapping, k.has_prefix("csbm")
            if has_path == has_csbm:
                raise ConfigError("dataset", "give exactly one source: dataset.path or csbm.* keys")
            if kind == "csbm_sweep" and not has_csbm:
                raise ConfigError("csbm.phi", "csbm_sweep needs cSBM parameters")
            if has_path:
                cfg.dataset_path = k.get("dataset.path", str)
            else:
                cfg.csbm = dict(
                    n=k.get("csbm.n", int, 5000),
                    f=k.get("csbm.f", int, 2000),
                    d=k.get("csbm.d", float, 5.0),
                    epsilon=k.get("csbm.epsilon", float, 3.25),
                )
                cfg.phis = k.get("csbm.phi", "floats")
            default_metrics = {
                "diffusion_baseline": "alignment_before,alignment_after,sc_accuracy",
            }.get(kind, "alignment_before,alignment_after,sc_accuracy")
            metrics = k.get("eval.metrics", None, default_metrics)
            metrics = metrics.split(",") if isinstance(metrics, str) else list(metrics)
            bad = [m for m in metrics if m not in _GRAPH_METRICS]
            if bad:
                raise ConfigError("eval.metrics", f"unknown metric(s) {bad}; known: {sorted(_GRAPH_METRICS)}")
            cfg.metrics = tuple(metrics)
            if kind == "diffusion_baseline":
                _digl_config(k)
            else:
                for phi in cfg.phis or [None]:
                    jdr_config_from(_Keys(mapping), phi=phi)
                k.used |= {x for x in mapping if x.startswith("jdr.")}
            for key in ("eval.k", "eval.L", "eval.skip_first_raw", "eval.skip_first_rewired"):
                k.get(key, None, None)
        elif kind == "prop1":
            _prop1_params(k)
        elif kind == "ridge_sweep":
            _ridge_params(k)
        unused = k.unused()
        if unused:
            raise ConfigError(unused[0], "unknown key")
        return cfg

    def seeds(self, n_override: int | None = None):
        return list(range(n_override or self.n_seeds))


def _digl_config(k) -> DiglConfig:
    try:
        return DiglConfig(alpha=k.get("digl.alpha", float), top_k=k.get("digl.top_k", int, 64))
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError("digl.alpha", str(err)) from err


def _prop1_params(k):
    sides = k.get("prop1.side", None, ["graph", "features"])
    sides = [sides] if isinstance(sides, str) else list(sides)
    for s in sides:
        if s not in ("graph", "features"):
            raise ConfigError("prop1.side", f"must be graph or features, got {s!r}")
    return dict(
        n=k.get("prop1.n", int, 2000),
        f=k.get("prop1.f", int, 800),
        lam=k.get("prop1.lambda", float),
        mu=k.get("prop1.mu", float),
        eta=k.get("prop1.eta", float),
        n_trials=k.get("prop1.n_trials", int, 50),
        renormalize=k.get("prop1.renormalize", bool, True),
        sides=sides,
    )


def _ridge_params(k):
    sides = k.get("ridge.side", None, ["A", "X"])
    sides = [sides] if isinstance(sides, str) else list(sides)
    for s in sides:
        if s not in ("A", "X"):
            raise ConfigError("ridge.side", f"must be A or X, got {s!r}")
    n = k.get("ridge.n", int, 1000)
    gamma = k.get("ridge.gamma", float, 2.0)
    return dict(
        n=n,
        f=max(1, int(round(n / gamma))),
        lam=k.get("ridge.lambda", float),
        mu=k.get("ridge.mu", float),
        r=k.get("ridge.r", float, 1.0),
        n_trials=k.get("ridge.n_trials", int, 10),
        eta_grid=k.get("ridge.eta_grid", "floats", [0.0] + list(np.logspace(-3, 0, 7))),
        sides=sides,
    )


# -- results ----------------------------------------------------------------


@dataclass(frozen=True)
class ResultRecord:
    experiment: str
    seed: int
    condition: str  # none | jdr | digl
    metric: str
    value: float
    wall_ms: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite value for {self.experiment}/{self.metric}")


def bootstrap_ci(values, n_resamples=N_BOOTSTRAP, level=0.95, seed=0):
    """Percentile bootstrap interval for the mean."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2 or np.all(values == values[0]):
        return float(values.mean()), float(values.mean())
    res = stats.bootstrap(
        (values,), np.mean, n_resamples=n_resamples, confidence_level=level,
        method="percentile", random_state=np.random.default_rng(seed),
    )
    return float(res.confidence_interval.low), float(res.confidence_interval.high)


def summarize(records, seed=0) -> dict:
    groups = {}
    for r in records:
        groups.setdefault((r.experiment, r.condition, r.metric), []).append(r.value)
    out = []
    for i, ((exp, cond, metric), vals) in enumerate(groups.items()):
        lo, hi = bootstrap_ci(vals, seed=_substream(seed, _BOOTSTRAP, i))
        out.append(dict(
            experiment=exp, condition=cond, metric=metric, n=len(vals),
            mean=float(np.mean(vals)), ci_low=lo, ci_high=hi,
        ))
    return {"n_bootstrap": N_BOOTSTRAP, "level": 0.95, "entries": out}


def write_results(records, out_dir, root_seed=0, extra=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([r.experiment, r.seed, r.condition, r.metric, repr(float(r.value)), f"{r.wall_ms:.3f}"])
    summary = summarize(records, root_seed)
    if extra:
        summary.update(extra)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# -- experiment kinds -------------------------------------------------------


def _substream(root, stream, seed):
    return int(np.random.SeedSequence([int(root), int(stream), int(seed)]).generate_state(1)[0] >> 1)


def _alignment_value(adj, x, L, cfg):
    a = eigs_top(adj, L, cfg.ordering, cfg.tol, cfg.max_iter, cfg.seed, cfg.solver)
    u = svd_top(x, L, cfg.tol, cfg.max_iter, cfg.seed, cfg.solver)
    return alignment(a, u, L).value


# metric name -> condition it reports on
_GRAPH_METRICS = {
    "alignment_before": "none",
    "alignment_after": "rewired",
    "sc_accuracy": "rewired",
    "sc_accuracy_raw": "none",
    "homophily_before": "none",
    "homophily_after": "rewired",
}


def _graph_metrics(d: Dataset, new_graph, new_x, cfg: JdrConfig, metrics, p, seed, condition):
    k = p.get("eval.k") or d.n_classes or 2
    L = p.get("eval.L") or min(d.n_classes or 2, d.n_nodes, d.n_features)
    km_seed = _substream(p.get("experiment.root_seed", 0), _KMEANS, seed)
    skip_raw = p.get("eval.skip_first_raw", True)
    skip_new = p.get("eval.skip_first_rewired", False)
    out = []
    for m in metrics:
        if m == "alignment_before":
            v = _alignment_value(d.graph.symmetric(), d.features, L, cfg)
        elif m == "alignment_after":
            v = _alignment_value(new_graph.symmetric(), new_x, L, cfg)
        elif m == "sc_accuracy":
            v = spectral_cluster(new_graph, k, d.labels, skip_first=skip_new, seed=km_seed).accuracy
        elif m == "sc_accuracy_raw":
            v = spectral_cluster(d.graph, k, d.labels, skip_first=skip_raw, seed=km_seed).accuracy
        elif m == "homophily_before":
            v = edge_homophily(d.graph, d.labels)
        else:
            v = edge_homophily(new_graph, d.labels)
        out.append((m, "none" if _GRAPH_METRICS[m] == "none" else condition, float(v)))
    return out


def _dataset_for(cfg: ExperimentConfig, phi, seed):
    if cfg.dataset_path is not None:
        return load_dataset(cfg.dataset_path)
    c = cfg.csbm
    params = CsbmParams.from_phi(
        phi, c["n"], c["f"], c["d"], c["epsilon"], seed=_substream(cfg.root_seed, _DATASET, seed)
    )
    return sample_csbm(params)


def _run_graph_seed(cfg: ExperimentConfig, seed):
    p = cfg.params
    rows = []
    for phi in cfg.phis or [None]:
        exp = cfg.name if phi is None else f"{cfg.name}[phi={phi:g}]"
        t0 = time.perf_counter()
        d = _dataset_for(cfg, phi, seed)
        solver_seed = _substream(cfg.root_seed, _SOLVER, seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            if cfg.kind == "diffusion_baseline":
                jcfg = JdrConfig(seed=solver_seed)
                g = ppr_diffuse(d.graph, _digl_config(_Keys(p)))
                vals = _graph_metrics(d, g, d.features, jcfg, cfg.metrics, p, seed, "digl")
            else:
                jcfg = replace(jdr_config_from(p, phi=phi), seed=solver_seed)
                out = jdr_run(d, jcfg)
                vals = _graph_metrics(d, out.rewired_graph, out.denoised_features, jcfg, cfg.metrics, p, seed, "jdr")
        ms = (time.perf_counter() - t0) * 1000.0 if cfg.wall_time else 0.0
        rows += [ResultRecord(exp, seed, c, m, v, ms) for m, c, v in vals]
    return rows


def _run_prop1_seed(cfg: ExperimentConfig, seed):
    pp = _prop1_params(_Keys(cfg.params))
    rows = []
    for side in pp["sides"]:
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rep = check_prop1(
                pp["n"], pp["f"], pp["lam"], pp["mu"], pp["eta"], side, pp["n_trials"],
                seed=_substream(cfg.root_seed, _DATASET, seed), renormalize=pp["renormalize"],
            )
        ms = (time.perf_counter() - t0) * 1000.0 if cfg.wall_time else 0.0
        exp = f"{cfg.name}[{side}]"
        rows += [
            ResultRecord(exp, seed, "none", "overlap", rep.mean_overlap_before, ms),
            ResultRecord(exp, seed, "jdr", "overlap", rep.mean_overlap_after, ms),
            ResultRecord(exp, seed, "jdr", "fraction_improved", rep.fraction_improved, ms),
        ]
    return rows


def _run_ridge_seed(cfg: ExperimentConfig, seed):
    rp = _ridge_params(_Keys(cfg.params))
    rows = []
    for side in rp["sides"]:
        t0 = time.perf_counter()
        rep = ridge_denoise_sweep(
            rp["n"], rp["f"], rp["lam"], rp["mu"], side, rp["eta_grid"], rp["n_trials"], rp["r"],
            seed=_substream(cfg.root_seed, _DATASET, seed),
        )
        ms = (time.perf_counter() - t0) * 1000.0 if cfg.wall_time else 0.0
        exp = f"{cfg.name}[{side}]"
        for eta, mean, _ in rep.rows():
            rows.append(ResultRecord(exp, seed, "none" if eta == 0 else "jdr", f"mse@eta={eta:.6g}", mean, ms))
    return rows


_RUNNERS = {
    "csbm_sweep": _run_graph_seed,
    "real_dataset": _run_graph_seed,
    "alignment_sweep": _run_graph_seed,
    "diffusion_baseline": _run_graph_seed,
    "prop1": _run_prop1_seed,
    "ridge_sweep": _run_ridge_seed,
}


def resolve_threads(cli_threads=None) -> int:
    if cli_threads is not None:
        return max(1, int(cli_threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(THREADS_ENV, f"expected an integer, got {env!r}") from None
    return 1


@dataclass
class RunOutcome:
    records: list
    failures: list  # (seed, message)
    summary: dict


def run_experiment(cfg: ExperimentConfig, out_dir=None, n_seeds=None, threads=None) -> RunOutcome:
    """Run every seed, then write rows in (seed, row) order whatever the completion order."""
    seeds = cfg.seeds(n_seeds)
    runner = _RUNNERS[cfg.kind]
    results, failures = {}, []

    def one(seed):
        try:
            return seed, runner(cfg, seed), None
        except Exception as err:  # flushed as a partial result below
            log.exception("seed %d failed", seed)
            return seed, [], f"{type(err).__name__}: {err}"

    n_threads = resolve_threads(threads)
    if n_threads == 1:
        done = [one(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            done = list(pool.map(one, seeds))
    for seed, rows, err in done:
        results[seed] = rows
        if err is not None:
            failures.append((seed, err))
    records = [r for s in seeds for r in results[s]]
    extra = {"experiment": cfg.name, "kind": cfg.kind, "seeds": seeds, "failures": [
        {"seed": s, "error": e} for s, e in failures
    ]}
    summary = write_results(records, out_dir or cfg.output, cfg.root_seed, extra)
    return RunOutcome(records, failures, summary)
