from .configs import CONFIGS as _CONFIGS
from .configs import (
    counterexample_comparison,
    random_quadratic_comparison,
    equal_budget_comparison,
)

configs = list(_CONFIGS.keys())
