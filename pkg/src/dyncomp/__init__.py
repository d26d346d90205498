"""Linear subspaces of multivariate time series that maximize Gaussian
predictive information, with baselines, synthetic generators and an
evaluation harness.
"""
from . import errors
from ._kernels import backend
from .baselines import EigenDecomposition, cca, leverage_scores, pca, sfa
from .core import Projection, TimeSeries, bin_series, mean_center, sqrt_transform
from .covariance import (BlockToeplitzCov, CrossCovSet, assemble_block_toeplitz,
                         crosscov_from_data, estimate_crosscov, project_crosscov,
                         regularize_crosscov, regularize_psd)
from .evaluation import (EvalSpec, lagged_regression_eval, reconstruction_r2,
                         snr_sweep)
from .optim import DCA, FitOptions, FitReport, dca_grad, dca_loss, fit_dca, fit_dca_deflation
from .predinfo import (PIEstimate, gaussian_lagged_mi, mi_knn, pi_analytic_exponential,
                       pi_analytic_squared_exponential, pi_freq_domain, pi_time_domain)
from .synth import (LorenzParams, NoiseSpec, embed_noisy, gp_generate, lorenz_generate,
                    noise_covariance)

__version__ = "0.1.0"

__all__ = [
    "BlockToeplitzCov", "CrossCovSet", "DCA", "EigenDecomposition", "EvalSpec",
    "FitOptions", "FitReport", "LorenzParams", "NoiseSpec", "PIEstimate", "Projection",
    "TimeSeries", "assemble_block_toeplitz", "backend", "bin_series", "cca",
    "crosscov_from_data", "dca_grad", "dca_loss", "embed_noisy", "errors",
    "estimate_crosscov", "fit_dca", "fit_dca_deflation", "gaussian_lagged_mi",
    "gp_generate", "lagged_regression_eval", "leverage_scores", "lorenz_generate",
    "mean_center", "mi_knn", "noise_covariance", "pca", "pi_analytic_exponential",
    "pi_analytic_squared_exponential", "pi_freq_domain", "pi_time_domain",
    "project_crosscov", "reconstruction_r2", "regularize_crosscov", "regularize_psd",
    "sfa", "snr_sweep", "sqrt_transform",
]
