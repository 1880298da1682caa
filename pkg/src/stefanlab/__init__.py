"""Simulation and analysis of the one-phase Stefan problem with nonlinear boundary flux."""
__version__ = "0.1.0"

from .errors import (BadBracketError, ConfigError, CorruptedStateError, InvalidSpecError,
                     NotComputable, StefanLabError, StepFailure)
from .model import (DirichletConstant, InitialProfile, LinearProfileSpec, NeumannZero,
                    NonlinearFlux, ProblemSpec, SampledProfileSpec, make_initial_linear,
                    scale_profile, validate_profile)
from .solver import Numerics, StepOptions, run, step
from .diagnostics import Trajectory, DiagnosticsRecord

from .classifier import ClassificationReport, ClassifierRules, classify
