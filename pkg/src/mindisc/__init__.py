"""Minimum-discrepancy quantisation: star discrepancy, MMD, KSD, optimal weights,
greedy point selection and Stein thinning."""
from .exceptions import DomainError, IllConditionedError, NumericalError, UnsupportedError
from .kernels import KernelSpec, gram, kernel_eval, kernel_matrix
from .targets import Target, gauss_mixture_1d, mean_embedding, sample, score, std_gaussian, uniform_unit_cube
from .discrepancy import ksd, mmd, mmd_squared, star_discrepancy
from .stein import SteinKernel, stein_gram
from .quantize import GreedyConfig, greedy_select, optimal_weights_ksd, optimal_weights_mmd, stein_thin, stein_weights

__version__ = "0.1.0"
