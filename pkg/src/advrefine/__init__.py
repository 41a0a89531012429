"""Adversarial hyperparameter refinement engine."""

__version__ = "0.1.0"

from .param_space import (  # noqa: F401
    ParamSlot,
    ParamSpace,
    builtin_spaces,
    parse_space,
    rescale,
)
from .evaluation import EvaluatorSpec, Score, synthetic_registry  # noqa: F401
from .refine import RefineConfig, RefineResult, run  # noqa: F401
