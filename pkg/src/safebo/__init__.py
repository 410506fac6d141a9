"""Safe Bayesian optimization with Lipschitz-certified safe sets."""
from .bounds import BoundSpec, beta
from .gp import GPConfig, GPPosterior, fit
from .grid import LOSBO, SAFEOPT, GridProblem, GridSafeBO
from .kernels import MATERN32, SQUARED_EXPONENTIAL, Domain, Kernel, gram, metric
from .los_gp_ucb import LoSGPUCB, SafeRegion, add_observation, select_next
from .rkhs import RKHSFunction, load_function, sample_pre_rkhs, sample_se_onb, save_function

__version__ = "0.1.0"
