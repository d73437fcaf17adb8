"""Poisson microstructure approximations of rough Bergomi type models.

Submodules: ``kernels`` (impact kernels), ``marklaws`` (jump mark laws),
``microsim`` (event-driven simulation), ``refsim`` (Gaussian reference
simulation), ``moments`` (word-expansion moment engine), ``functionals``
(kernel error functionals) and ``harness`` (weak-error experiments).
"""

from .errors import (AccuracyError, ConfigError, ContractError, DomainError, FactorizationError,
                     RoughMicroError, SizeLimitError, UnsupportedLawError)
from .kernels import KernelSpec, Variant, audit_kernel_assumptions, c1_constant, c_hurst
from .marklaws import MarkLaw, sample_marks, verify_mark_moments
from .microsim import (EventStream, PathGrid, eval_logvol, left_limits,
                       prelimit_exp_functional, simulate_events, simulate_price_path,
                       terminal_values)
from .refsim import (GaussianModelSpec, JointSampler, build_joint_covariance, euler_price,
                     sample_joint_paths)
from .moments import (MomentModel, MomentResult, Word, enumerate_words, expand_word,
                      hermite4_expectation, moment_value)
from .functionals import (covariance_Cn, error_functionals, fit_rate, limit_covariance,
                          lower_bound_scan, theoretical_exponent)
from .harness import ExperimentConfig, ExperimentReport, confidence_bands, run_weak_error

__version__ = "0.1.0"
