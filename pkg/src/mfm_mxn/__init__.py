"""Bayesian clustering of matrix-valued data with a mixture of finite mixtures
of matrix normal distributions."""

from .errors import MfmError
from .experiment import ExperimentConfig, RunResult, run_experiment
from .gibbs import ChainConfig, ChainTrace, ClusterState, run_chain
from .matnorm import MatrixNormalParams, log_density_matnorm, sample_matnorm
from .postprocess import dahl_select, kmeans_baseline, rand_index
from .prior import Hyperparams, build_vn_table, default_hyperparams
from .simulate import large_scenario, small_scenario

__version__ = "0.1.0"
