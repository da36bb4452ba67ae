"""The feedback loop: knowledge, monitor, analyze, plan, execute."""

import json

from .iot import DEFAULT_GOALS, LATENCY_GOAL, DeltaIoTSystem, apply_steps, enumerate_options, settings_diff
from .knowledge import AdaptationOption, Configuration, Goal, Plan, PlanStep, check_goals
from .loop import (
    LOG_HEADER,
    LOG_SCHEMA,
    Decision,
    FeedbackLoop,
    Knowledge,
    analyze,
    execute,
    monitor,
    plan,
    run_loop,
    select,
    write_log,
)


def load_goals(spec) -> tuple:
    """Goals from ``{"goals": [{quality, rank, comparator, threshold} | {quality, rank, direction}]}``."""
    if isinstance(spec, (str, bytes)) or hasattr(spec, "__fspath__"):
        with open(spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    items = spec["goals"] if isinstance(spec, dict) else spec
    return check_goals(Goal.from_dict(g) for g in items)
