"""Command-line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime or
numerical failure (including partially failed runs).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .csbm import CsbmParams, sample_csbm
from .dataset_io import DatasetFormatError, load_dataset, save_dataset
from .evaluation import spectral_cluster, spectral_cluster_features
from .experiments import ConfigError, _Keys, jdr_config_from, load_config, parse_config_text, run_experiment
from .jdr import jdr_run
from .spectral import ConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _cmd_run(args):
    cfg = load_config(args.config)
    outcome = run_experiment(cfg, args.out, args.seeds, args.threads)
    out = Path(args.out or cfg.output)
    print(f"wrote {len(outcome.records)} rows to {out / 'results.csv'}")
    for seed, err in outcome.failures:
        print(f"seed {seed} failed: {err}", file=sys.stderr)
    return EXIT_RUNTIME if outcome.failures else EXIT_OK


def _cmd_gen_csbm(args):
    try:
        params = CsbmParams.from_phi(args.phi, args.n, args.f, args.d, args.epsilon, args.seed)
    except ValueError as err:
        raise ConfigError("gen-csbm", str(err)) from err
    d = sample_csbm(params)
    save_dataset(d, args.out)
    print(f"wrote cSBM phi={args.phi:g} (lambda={params.lam:.4f}, mu={params.mu:.4f}) to {args.out}")
    return EXIT_OK


def _cmd_rewire(args):
    try:
        mapping = parse_config_text(Path(args.config).read_text(), args.config)
    except OSError as err:
        raise ConfigError(args.config, f"cannot read config ({err.strerror})") from err
    keys = _Keys(mapping)
    cfg = jdr_config_from(keys, phi=mapping.get("csbm.phi"))
    d = load_dataset(args.dataset)
    out = jdr_run(d, cfg)
    new = type(d)(out.rewired_graph, out.denoised_features, d.labels, d.n_classes, d.name + "_jdr", dict(d.meta))
    save_dataset(new, args.out)
    trace = {"alignment_trace": out.alignment_trace.tolist(), "K": cfg.K}
    (Path(args.out) / "jdr_trace.json").write_text(json.dumps(trace, indent=2) + "\n")
    print(f"alignment {out.alignment_trace[0]:.4f} -> {out.alignment_trace[-1]:.4f}; wrote {args.out}")
    return EXIT_OK


def _cmd_eval_sc(args):
    d = load_dataset(args.dataset)
    if d.labels is None:
        raise ConfigError(args.dataset, "dataset has no labels.tsv; accuracy needs labels")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        if args.features:
            res = spectral_cluster_features(d.features, args.k, d.labels, knn_k=args.knn_k, seed=args.seed)
        else:
            res = spectral_cluster(d.graph, args.k, d.labels, skip_first=not args.no_skip_first, seed=args.seed)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"accuracy {res.accuracy:.4f}")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="jdr", description="Joint denoising and rewiring of graphs and node features.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (default: output.dir of the config)")
    r.add_argument("--seeds", type=int, default=None, help="override experiment.n_seeds")
    r.add_argument("--threads", type=int, default=None, help="worker threads (default: $JDR_THREADS or 1)")
    r.set_defaults(func=_cmd_run)

    g = sub.add_parser("gen-csbm", help="sample a cSBM dataset")
    g.add_argument("--phi", type=float, required=True)
    g.add_argument("--n", type=int, default=5000)
    g.add_argument("--f", type=int, default=2000)
    g.add_argument("--d", type=float, default=5.0)
    g.add_argument("--epsilon", type=float, default=3.25)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen_csbm)

    w = sub.add_parser("rewire", help="run JDR on a dataset directory")
    w.add_argument("dataset")
    w.add_argument("--config", required=True, help="flat config with jdr.* keys")
    w.add_argument("--out", required=True)
    w.set_defaults(func=_cmd_rewire)

    e = sub.add_parser("eval-sc", help="spectral clustering accuracy of a dataset")
    e.add_argument("dataset")
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--features", action="store_true", help="cluster a kNN graph of the features")
    e.add_argument("--knn-k", type=int, default=10)
    e.add_argument("--no-skip-first", action="store_true", help="keep the leading eigenvector")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=_cmd_eval_sc)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetFormatError, ConvergenceError, np.linalg.LinAlgError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
