from ..knowledge import *  # noqa: F401,F403
from ..knowledge import COMPARATORS, AdaptationOption, Configuration, Goal, Plan, PlanStep, check_goals  # noqa: F401
