"""Command line interface: ``simulate``, ``fit``, ``metrics`` and ``bin``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data_io
from .errors import MfmError
from .experiment import ExperimentConfig, run_experiment, write_result
from .postprocess import rand_index
from .simulate import large_scenario, small_scenario


def _simulate(args):
    if args.scenario == "small":
        ds = small_scenario(args.n, args.noise, seed=args.seed)
    else:
        ds = large_scenario(args.n, args.sigma, args.rho, seed=args.seed)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    data_io.save_matrices(out / "data.txt", ds.data)
    data_io.save_labels(out / "labels.txt", ds.true_labels)
    comps = ds.spec.components
    data_io.write_json(out / "truth.json", {
        "weights": ds.spec.weights,
        "means": [c.M for c in comps],
        "U": comps[0].U,
        "V": comps[0].V,
    })
    print(out / "data.txt")


def _fit(args):
    data = data_io.load_matrices(args.data)
    hyper = data_io.load_hyperparams(args.config, data) if args.config else None
    labels = data_io.load_labels(args.labels) if args.labels else None
    true_cov = None
    if args.truth:
        truth = data_io.read_json(args.truth)
        true_cov = (np.array(truth["U"]), np.array(truth["V"]))
    config = ExperimentConfig(
        iterations=args.iters,
        burnin=args.burnin,
        thin=args.thin,
        chains=args.chains,
        seed=args.seed,
        initial_clusters=args.initial_clusters,
        gamma=args.gamma,
        tau=args.tau,
        workers=args.workers,
    )
    result = run_experiment(data, config, hyper, true_labels=labels, true_cov=true_cov)
    path = write_result(result, args.output_dir, emit_all_states=args.emit_all_states, plots=not args.no_plots)
    print(path)


def _metrics(args):
    truth = data_io.load_labels(args.labels)
    pred = data_io.load_labels(args.predicted)
    print(json.dumps({
        "rand_index": rand_index(pred, truth),
        "k_true": int(len(np.unique(truth))),
        "k_predicted": int(len(np.unique(pred))),
    }, sort_keys=True))


def _bin(args):
    events = data_io.load_shots(args.events)
    ids, mats = data_io.bin_shots(events, args.p, args.q, args.epsilon)
    data_io.save_matrices(args.output, mats)
    Path(str(args.output) + ".ids").write_text("".join(f"{e}\n" for e in ids))
    print(args.output)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfm-mxn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic benchmark")
    p.add_argument("--scenario", choices=["small", "large"], default="small")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--noise", choices=["high", "low"], default="high")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=_simulate)

    p = sub.add_parser("fit", help="run the sampler and summarize")
    p.add_argument("--data", required=True, help="matrix file")
    p.add_argument("--labels", help="true labels, one per line, for metrics")
    p.add_argument("--truth", help="truth.json from `simulate`, for the covariance error")
    p.add_argument("--config", help="hyperparameter file of 'key = value' lines")
    p.add_argument("--iters", type=int, default=1500)
    p.add_argument("--burnin", type=int, default=1000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial-clusters", type=int, default=10)
    p.add_argument("--gamma", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--workers", type=int, help="process pool size (default: min(chains, CPUs))")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--emit-all-states", action="store_true",
                   help="store means and covariances for every retained state")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=_fit)

    p = sub.add_parser("metrics", help="compare two label files")
    p.add_argument("--labels", required=True, help="reference labels")
    p.add_argument("--predicted", required=True)
    p.set_defaults(func=_metrics)

    p = sub.add_parser("bin", help="bin shot locations into log-rate matrices")
    p.add_argument("--events", required=True, help="CSV with entity_id,x,y,games_played")
    p.add_argument("--p", type=int, default=25)
    p.add_argument("--q", type=int, default=18)
    p.add_argument("--epsilon", type=float, default=data_io.DEFAULT_EPSILON)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_bin)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except MfmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 6
    return 0


if __name__ == "__main__":
    sys.exit(main())
