"""Multi-chain experiment orchestration and result emission."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import data_io
from .errors import ConfigError, DimensionError
from .gibbs import ChainConfig, run_chain
from .postprocess import dahl_select, k_posterior, rand_index, rmse_kron, select_representative_chain
from .prior import Hyperparams, build_vn_table, default_hyperparams, stack_data


@dataclass
class ExperimentConfig:
    iterations: int = 1500
    burnin: int = 1000
    thin: int = 1
    chains: int = 1
    seed: int = 0
    initial_clusters: int = 10
    gamma: float | None = None
    tau: float | None = None
    workers: int | None = None

    def chain_config(self, c: int) -> ChainConfig:
        return ChainConfig(
            iterations=self.iterations,
            burnin=self.burnin,
            seed=self.seed + c,
            thin=self.thin,
            initial_clusters=self.initial_clusters,
        )


@dataclass
class RunResult:
    chains: list
    representative_chain: int
    labels: np.ndarray
    k_hat: int
    k_posterior: dict
    means: np.ndarray
    U: np.ndarray
    V: np.ndarray
    config: dict
    metrics: dict = field(default_factory=dict)
    traces: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "chains": self.chains,
            "representative_chain": self.representative_chain,
            "labels": self.labels,
            "k_hat": self.k_hat,
            "k_posterior": self.k_posterior,
            "point_estimates": {"means": self.means, "U": self.U, "V": self.V},
            "metrics": self.metrics,
        }


def _chain_job(args):
    data, config, hyper, vn = args
    return run_chain(data, config, hyper, vn)


def run_chains(data, config: ExperimentConfig, hyper: Hyperparams, vn) -> list:
    """Run ``config.chains`` independent chains, in a process pool when more
    than one worker is available."""
    jobs = [(data, config.chain_config(c), hyper, vn) for c in range(config.chains)]
    workers = config.workers or min(config.chains, os.cpu_count() or 1)
    if workers <= 1:
        return [_chain_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_chain_job, jobs))


def run_experiment(data, config: ExperimentConfig, hyper: Hyperparams | None = None,
                   true_labels=None, true_cov=None) -> RunResult:
    """Fit the model with several chains and summarize.

    Each chain is summarized by its Dahl draw; the reported partition and
    parameters come from the chain whose Dahl partition agrees best (mean Rand
    index) with the others.  ``true_cov`` is an optional ``(U, V)`` pair.
    """
    Y = stack_data(data)
    n = Y.shape[0]
    if config.chains < 1:
        raise ConfigError("need at least one chain")
    if hyper is None:
        hyper = default_hyperparams(Y)
    overrides = {k: v for k, v in (("gamma", config.gamma), ("tau", config.tau)) if v is not None}
    if overrides:
        hyper = hyper.replace(**overrides)
    vn = build_vn_table(n, hyper.gamma, hyper.tau)
    traces = run_chains(Y, config, hyper, vn)

    estimates = [dahl_select(tr) for tr in traces]
    rep = 0 if len(estimates) == 1 else select_representative_chain(estimates)
    est, trace = estimates[rep], traces[rep]
    chosen = trace.states[est.source_draw_index]
    chains = [
        {
            "chain": c,
            "seed": config.seed + c,
            "labels": e.labels,
            "source_draw_index": e.source_draw_index,
            "k_hat": e.k_hat,
            "k_posterior": k_posterior(tr),
        }
        for c, (e, tr) in enumerate(zip(estimates, traces))
    ]
    result = RunResult(
        chains=chains,
        representative_chain=rep,
        labels=est.labels,
        k_hat=est.k_hat,
        k_posterior=k_posterior(trace),
        means=chosen.means,
        U=chosen.U,
        V=chosen.V,
        config={k: v for k, v in asdict(config).items() if k != "workers"} | {"n": n, "p": hyper.p, "q": hyper.q,
                                 "gamma": hyper.gamma, "tau": hyper.tau},
        traces=traces,
    )
    if true_labels is not None:
        true_labels = np.asarray(true_labels)
        if true_labels.shape != (n,):
            raise DimensionError(f"{true_labels.size} true labels for {n} observations")
        true_k = len(np.unique(true_labels))
        result.metrics = {
            "rand_index": rand_index(est.labels, true_labels),
            "true_k": true_k,
            "k_correct": est.k_hat == true_k,
        }
    if true_cov is not None:
        U_true, V_true = true_cov
        result.metrics["rmse_kron"] = rmse_kron(chosen.U, chosen.V, U_true, V_true)
    return result


def write_result(result: RunResult, output_dir, emit_all_states: bool = False, plots: bool = True) -> Path:
    """Write ``result.json``, per-chain traces, plot data and figures.  Returns the result path."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "result.json"
    data_io.write_json(path, result.to_dict())
    for c, tr in enumerate(result.traces):
        data_io.write_trace(out / f"trace_chain{c}.jsonl", tr, all_states=emit_all_states)
    emit_plot_data(result, out)
    if plots:
        from .plotting import render_report

        render_report(result, out)
    return path


def emit_plot_data(result: RunResult, output_dir) -> list:
    """Delimited text for external plotting: one ``p x q`` file per cluster
    mean and a two-column label assignment file."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, M in enumerate(result.means):
        path = out / f"cluster_{k}_mean.csv"
        data_io.save_delimited_matrix(path, M)
        files.append(path)
    path = out / "assignments.csv"
    path.write_text("index,label\n" + "".join(f"{i},{int(z)}\n" for i, z in enumerate(result.labels)))
    files.append(path)
    return files

