"""Compressed sensing of piecewise-constant signals by message passing.

Library layout:

* ``kernels``    scalar Gaussian-mixture fusion (denoiser building blocks)
* ``solver``     the spike-and-slab chain AMP solver with optional EM tuning
* ``operators``  sensing matrix ensembles behind one apply/adjoint interface
* ``signals``    piecewise-constant test signals, measurements, NMSE
* ``tvamp``      total-variation AMP baseline
* ``harness``    Monte-Carlo phase grids, convergence traces, runtime, CSV/JSON
* ``cli``        ``ssamp`` command line entry point
"""

from .kernels import (
    GaussianParam,
    MixturePosterior,
    SsfMessage,
    eta_gamma,
    eta_prime,
    fuse_pair,
    log_gauss,
    moments,
    phi_zeta,
    posterior_double,
    posterior_single,
)
from .operators import (
    LinearOperator,
    column_sign_randomize,
    export_dense,
    make_iid_gaussian,
    make_quasi_toeplitz,
    make_sparse_bernoulli,
    make_subsampled_dct,
    make_subsampled_wht,
)
from .signals import SignalSpec, generate, measure, nmse
from .solver import (
    DivergenceError,
    PriorParams,
    SolveReport,
    SolverConfig,
    SolverState,
    em_update,
    solve,
)
from .tvamp import TvampConfig, tv_divergence, tv_prox, tvamp_solve
from .harness import ExperimentConfig, pt_curve, run_convergence, run_phase_grid, run_runtime

__version__ = "0.1.0"
