"""Multi-granularity causal structure learning.

Learns weighted causal adjacencies over observed micro-variables and
sparse-autoencoder-derived macro-variables by continuous optimization under a
spectral acyclicity constraint, with a trace-exponential baseline, synthetic
benchmarks, and post-processing to binary DAGs.
"""

__version__ = "0.1.0"

from .graphs import CausalGraph, GroundTruthGraph, Macro, gen_er_dag, gen_sf_dag  # noqa: E402,F401
from .optimizer import FitResult, HyperParams, fit  # noqa: E402,F401
from .postproc import (MetricsReport, metrics, postprocess,  # noqa: E402,F401
                       project_multigranularity)
from .sem import Dataset, decompose_macro, sample_gp_sem  # noqa: E402,F401
