"""Numerical toolkit for stabilizing nonlinear systems with nonsmooth control
Lyapunov functions: generalized derivatives, marginal-function CLFs,
sample-and-hold feedback laws and an experiment harness."""

from .boxopt import BoxProblem, BoxResult, argmin_clusters, minimize
from .calculus import (MarginalFamily, ScalarField, SubgradientSet, check_decay_disassembled,
                       check_decay_ldgd, check_prox_inequality, check_semiconcavity,
                       disassembled_subdifferential, inf_convolution, ldgd,
                       limiting_subdifferential_1d, proximal_subgradient, verify_hom)
from .controllers import (Controller, DiniAimingParams, SmcParams, backstepping_artstein,
                          backstepping_endi, build_controller, dini_aiming, infc_based,
                          optimization_based, smc, steepest_descent)
from .errors import BlowUpError, ConfigError, EvaluationError, GuardedDomainError, NsstabError
from .simulation import (SamplingSchedule, TrajectoryLog, Verdict, rk4_step, simulate,
                         verify_practical_stability)
from .systems import ControlSystem, get_system, make_artstein_dyn, make_endi, make_ni, make_smc_demo

__version__ = "0.1.0"
