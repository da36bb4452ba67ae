"""Experiment harness: builds loops over the network simulator and runs sweeps."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import statistics
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Optional, Sequence

from . import __version__
from .deltaiot import (
    DELTAIOT15,
    DeltaIoTSimulator,
    Scenario,
    Topology,
    UncertaintyState,
    default_settings,
    failsafe_settings,
    load_scenario,
    load_topology,
)
from .evolve import EvolutionManager, UpdatePackage, latency_package
from .mape import DEFAULT_GOALS, DeltaIoTSystem, enumerate_options, FeedbackLoop, Knowledge, load_goals, write_log
from .qmodels import SMCSettings, model_registry
from .smc import required_samples

DEFAULT_GRID = ((0.05, 0.05, 0.05), (0.01, 0.05, 0.05), (0.05, 0.01, 0.05))
SUMMARY_HEADER = (
    "epsilon",
    "alpha",
    "rsem",
    "cycles",
    "packetLossMean",
    "packetLossQ1",
    "packetLossMedian",
    "packetLossQ3",
    "energyMean",
    "energyQ1",
    "energyMedian",
    "energyQ3",
    "packetLossRunsPerOption",
    "energyRunsPerOption",
    "failsafeCycles",
)
TIMINGS_HEADER = ("epsilon", "alpha", "rsem", "cycles", "analysisSeconds", "secondsPerCycle")


def data_file(*parts: str) -> str:
    return str(resources.files("selfadapt.data").joinpath(*parts))


def resolve_scenario(spec, topology: Topology) -> Scenario:
    """A Scenario, a dict, a file path, or the name of a shipped scenario."""
    if spec is None:
        return Scenario()
    if isinstance(spec, Scenario):
        return spec
    if isinstance(spec, str) and not os.path.exists(spec):
        spec = data_file("scenarios", spec if spec.endswith(".json") else spec + ".json")
        if not os.path.exists(spec):
            raise ValueError(f"no scenario file or shipped scenario named {os.path.basename(spec)[:-5]!r}")
    return load_scenario(spec, topology)


@dataclass
class RunResult:
    decisions: list
    stats: list  # CycleStats per cycle
    loop: Optional[FeedbackLoop] = None
    analysis_seconds: float = 0.0
    recorder: Optional["_Recorder"] = None


class _Recorder:
    """Quiescent hook keeping every cycle's analysed options (for audits)."""

    def __init__(self):
        self.options: list = []

    def __call__(self, knowledge, cycle):
        self.options.append(list(knowledge.options))
        return None


def full_budget(smc: SMCSettings, n_options: int, mean_models: int = 2) -> int:
    """Runs for a complete analysis: one probability model plus ``mean_models``
    mean models (one spare for a goal added at run time) per option."""
    return n_options * (required_samples(smc.epsilon, smc.alpha) + mean_models * smc.max_runs)


def build_loop(
    topology: Topology = DELTAIOT15,
    scenario=None,
    seed: int = 0,
    goals=DEFAULT_GOALS,
    smc: SMCSettings = SMCSettings(),
    budget: Optional[int] = None,
) -> FeedbackLoop:
    sim = DeltaIoTSimulator(topology, resolve_scenario(scenario, topology), seed=seed)
    k = Knowledge(goals, model_registry(), smc)
    k.budget = budget if budget is not None else full_budget(smc, len(enumerate_options(topology, UncertaintyState.of(topology))))
    return FeedbackLoop(k, DeltaIoTSystem(sim), seed=seed)


def run_adaptive(
    cycles: int,
    topology: Topology = DELTAIOT15,
    scenario=None,
    seed: int = 0,
    goals=DEFAULT_GOALS,
    smc: SMCSettings = SMCSettings(),
    budget: Optional[int] = None,
    update: Optional[UpdatePackage] = None,
    update_at: Optional[int] = None,
    record: bool = False,
) -> RunResult:
    """Run the loop; ``update`` is staged, validated and activated after cycle ``update_at``."""
    loop = build_loop(topology, scenario, seed, goals, smc, budget)
    rec = None
    if record:
        rec = _Recorder()
        loop.quiescent.append(rec)
    mgr = EvolutionManager(loop) if update is not None else None
    t = 0.0
    for c in range(cycles):
        t0 = time.perf_counter()
        loop.step()
        t += time.perf_counter() - t0
        if mgr is not None and c == update_at:
            h = mgr.stage_update(update)
            if not mgr.validate_update(h, seed).passed:
                raise RuntimeError("update failed validation: " + "; ".join(h.report.lines()))
            mgr.activate_update(h)  # applied at the next quiescent point
    return RunResult(loop.log, loop.system.sim.history, loop, t, rec)


def run_fixed(cycles: int, topology=DELTAIOT15, scenario=None, seed: int = 0, policy: str = "failsafe") -> list:
    """Simulate without adaptation: ``failsafe`` or ``default`` settings throughout."""
    settings = failsafe_settings(topology) if policy == "failsafe" else default_settings(topology)
    sim = DeltaIoTSimulator(topology, resolve_scenario(scenario, topology), seed=seed, settings=settings)
    return [sim.run_cycle() for _ in range(cycles)]


def _quartiles(xs):
    xs = list(xs)
    if len(xs) < 2:
        v = xs[0] if xs else float("nan")
        return v, v, v
    q = statistics.quantiles(xs, n=4, method="inclusive")
    return q[0], q[1], q[2]


def summarize(eps, alpha, rsem, res: RunResult) -> tuple:
    pl = [s.packet_loss for s in res.stats]
    en = [s.energy for s in res.stats]
    analysed = [d for d in res.decisions if d.analyzed and d.options_total]

    def per_option(q):
        vals = [d.runs_by_quality.get(q, 0) / d.options_total for d in analysed]
        return statistics.fmean(vals) if vals else 0.0

    f = lambda x: f"{x:.6f}"
    return (
        eps,
        alpha,
        rsem,
        len(res.stats),
        f(statistics.fmean(pl)),
        *map(f, _quartiles(pl)),
        f(statistics.fmean(en)),
        *map(f, _quartiles(en)),
        f(per_option("packetLoss")),
        f(per_option("energy")),
        sum(d.failsafe for d in res.decisions),
    )


@dataclass
class ExperimentConfig:
    scenario: object = "drift"
    topology: Optional[str] = None
    goals: Optional[str] = None
    seed: int = 0
    cycles: int = 90
    grid: Sequence = DEFAULT_GRID
    out: str = "results"

    def __post_init__(self):
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if not self.grid:
            raise ValueError("the grid must not be empty")
        self.grid = tuple(tuple(float(x) for x in g) for g in self.grid)

    def digest(self) -> str:
        d = asdict(self)
        d.pop("out")
        if isinstance(d["scenario"], Scenario):
            d["scenario"] = d["scenario"].to_dict()
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


def load_experiment(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    unknown = set(d) - {"scenario", "topology", "goals", "seed", "cycles", "grid", "out"}
    if unknown:
        raise ValueError(f"unknown experiment fields {sorted(unknown)}")
    return ExperimentConfig(**d)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run every grid point and write decision logs, summary, timings and manifest.

    Everything but ``timings.csv`` is a pure function of the config and seed.
    """
    topology = load_topology(cfg.topology) if cfg.topology else DELTAIOT15
    goals = load_goals(cfg.goals) if cfg.goals else DEFAULT_GOALS
    os.makedirs(cfg.out, exist_ok=True)
    rows, timings, logs = [], [], []
    for i, (eps, alpha, rsem) in enumerate(cfg.grid):
        smc = SMCSettings(epsilon=eps, alpha=alpha, rsem=rsem)
        res = run_adaptive(cfg.cycles, topology, cfg.scenario, cfg.seed, goals, smc)
        path = os.path.join(cfg.out, f"decisions_{i}.csv")
        write_log(res.decisions, path)
        logs.append(path)
        rows.append(summarize(eps, alpha, rsem, res))
        timings.append((eps, alpha, rsem, cfg.cycles, f"{res.analysis_seconds:.3f}", f"{res.analysis_seconds / cfg.cycles:.4f}"))
    summary = os.path.join(cfg.out, "summary.csv")
    _write_csv(summary, SUMMARY_HEADER, rows)
    _write_csv(os.path.join(cfg.out, "timings.csv"), TIMINGS_HEADER, timings)
    manifest = {
        "schema": "manifest/1",
        "package": "selfadapt",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": _numpy_version(),
        "seed": cfg.seed,
        "cycles": cfg.cycles,
        "grid": [list(g) for g in cfg.grid],
        "configHash": cfg.digest(),
        "files": [os.path.basename(p) for p in logs] + ["summary.csv", "timings.csv"],
    }
    with open(os.path.join(cfg.out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"summary": rows, "logs": logs, "manifest": manifest}


def _numpy_version() -> str:
    import numpy

    return numpy.__version__


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
