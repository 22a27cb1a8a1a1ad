"""Parametric model order reduction by moment matching."""

from . import errors, linalg, psys, siggen
from .errors import *  # noqa: F401,F403
from .linalg import least_squares, solve_lyapunov, solve_sylvester, solve_sylvester_kron
from .moment_basis import (
    BasisSet,
    SnapshotDataset,
    WeightMatrix,
    eval_basis_moment,
    fit_data_driven,
    fit_model_based,
    fit_ridge,
    interp_matrix,
)
from .moment_series import (
    LyapunovSeries,
    MomentSeries,
    eval_moment_series,
    exact_moment,
    nested_lyapunov,
    nested_sylvester,
    taylor_tables,
)
from .psys import CoefficientFunction, DissipativitySpec, ParametricLTI, make_benchmark, transfer
from .siggen import SignalGenerator, from_frequencies, log_grid

__version__ = "0.1.0"
