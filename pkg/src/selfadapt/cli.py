"""Command line: ``selfadapt <command> [options]``.

Exit codes: 0 success, 1 property or validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import Optional, Sequence

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- output -------------------------------------------------------------------

def _emit(args, name: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    """Write a table to ``--out/<name>.<format>``, or to stdout without ``--out``."""
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{name}.{args.format}")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            _dump(fh, args.format, header, rows)
    else:
        _dump(sys.stdout, args.format, header, rows)


def _dump(fh, fmt, header, rows):
    if fmt == "json":
        json.dump([dict(zip(header, r)) for r in rows], fh, indent=2)
        fh.write("\n")
    else:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _say(args, text: str) -> None:
    # human-readable lines go to stderr when the table itself goes to stdout
    print(text, file=sys.stderr if not args.out else sys.stdout)


def _exists(path: str) -> str:
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    return path


# -- commands -------------------------------------------------------------------

def cmd_check_model(args) -> int:
    from .engine import ModelError, format_model, parse_model

    with open(_exists(args.model), encoding="utf-8") as fh:
        text = fh.read()
    try:
        net = parse_model(text)
        if args.set:
            values = {}
            for item in args.set:
                name, _, val = item.partition("=")
                values[name.strip()] = json.loads(val)
            from .engine.parser import override_initial_values

            net = override_initial_values(net, values)
    except (ModelError, ValueError) as exc:
        print(f"{args.model}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    rows = [(a.name, len(a.locations), len(a.edges), sum(l.committed for l in a.locations)) for a in net.automata]
    _emit(args, "model", ("automaton", "locations", "edges", "committed"), rows)
    if args.print:
        print(format_model(net))
    return EXIT_OK


def _smc(args):
    from .qmodels import SMCSettings

    return SMCSettings(epsilon=args.epsilon, alpha=args.alpha, rsem=args.rsem)


def _goals(args):
    from .mape import DEFAULT_GOALS, load_goals

    return load_goals(_exists(args.goals)) if args.goals else DEFAULT_GOALS


def _topology(args):
    from .deltaiot import DELTAIOT15, load_topology

    return load_topology(_exists(args.topology)) if args.topology else DELTAIOT15


def _write_decisions(args, decisions, name="decisions"):
    from .mape import LOG_HEADER

    _emit(args, name, LOG_HEADER, [d.row() for d in decisions])


def cmd_sim(args) -> int:
    from .deltaiot import STATS_HEADER, stats_row
    from .experiment import run_adaptive, run_fixed

    topo = _topology(args)
    if args.policy == "adaptive":
        res = run_adaptive(args.cycles, topo, args.scenario, args.seed, _goals(args), _smc(args), args.budget)
        _write_decisions(args, res.decisions)
        stats = res.stats
    else:
        stats = run_fixed(args.cycles, topo, args.scenario, args.seed, args.policy)
    if args.out or args.policy != "adaptive":
        _emit(args, "cycles", STATS_HEADER, [stats_row(s) for s in stats])
    return EXIT_OK


def cmd_verify(args) -> int:
    from .engine import parse_model
    from .verify import (
        MAPE_AUTOMATA,
        TRACE_VARIABLES,
        ExplorationBudgetExceeded,
        coverage_report,
        format_trace,
        load_properties,
        load_stub_scenario,
        loop_model,
        shipped_properties,
        shipped_scenarios,
        verify_scenario,
    )

    if args.model:
        with open(_exists(args.model), encoding="utf-8") as fh:
            net = parse_model(fh.read())
    else:
        net = loop_model()
    scenarios = [load_stub_scenario(_exists(p)) for p in args.scenario] if args.scenario else shipped_scenarios()
    props = load_properties(_exists(args.props)) if args.props else shipped_properties()
    rows, results, ok = [], [], True
    for sc in scenarios:
        try:
            res = verify_scenario(net, sc, props, depth=args.depth, max_states=args.max_states)
        except ExplorationBudgetExceeded as exc:
            rows.append((sc.name, "", "", "budget", str(exc)))
            ok = False
            continue
        results.append(res)
        for v in res.verdicts:
            ok &= v.holds
            rows.append((sc.name, v.prop.name, v.prop.text, "holds" if v.holds else "fails", len(res.exploration.states)))
            if not v.holds and args.out:
                os.makedirs(args.out, exist_ok=True)
                path = os.path.join(args.out, f"counterexample_{sc.name}_{v.prop.name}.txt")
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write(f"# {v.prop.text}\n")
                    fh.write("\n".join(format_trace(res.exploration.net, v.counterexample, TRACE_VARIABLES)) + "\n")
            elif not v.holds:
                _say(args, f"counterexample for {sc.name} / {v.prop.name}:")
                for line in format_trace(res.exploration.net, v.counterexample, TRACE_VARIABLES):
                    _say(args, "  " + line)
    _emit(args, "verdicts", ("scenario", "property", "formula", "verdict", "states"), rows)
    if results:
        cov = coverage_report([r.exploration for r in results])
        _emit(
            args,
            "coverage",
            ("automaton", "loop", "locationsVisited", "locationsTotal", "locationPct", "edgesFired", "edgesTotal", "edgePct"),
            [
                (c.automaton, int(c.automaton in MAPE_AUTOMATA), c.locations_visited, c.locations_total,
                 f"{c.location_pct:.1f}", c.edges_fired, c.edges_total, f"{c.edge_pct:.1f}")
                for c in cov
            ],
        )
    _say(args, "all properties hold" if ok else "some properties fail")
    return EXIT_OK if ok else EXIT_FAIL


HEALTH_HEADER = (
    "cycle", "optionsTotal", "chosenOptionIndex", "chosenCombination", "failureRateEst", "costEst",
    "planSteps", "failsafe", "failureRate", "cost",
)


def cmd_health(args) -> int:
    from .experiment import data_file
    from .healthsvc import COST, FAILURE_RATE, HealthSystem, health_goals, load_catalog
    from .mape import FeedbackLoop, Knowledge
    from .qmodels import Registry

    catalog, params = load_catalog(_exists(args.catalog) if args.catalog else data_file("health_catalog.json"))
    system = HealthSystem(catalog, params, seed=args.seed, invocations=args.invocations)
    loop = FeedbackLoop(Knowledge(health_goals(args.threshold), Registry([FAILURE_RATE, COST]), _smc(args)), system, args.seed)
    rows = []
    for _ in range(args.cycles):
        d = loop.step()
        combo = system._pending or system.combo
        est = lambda q: "" if q not in d.estimates else f"{d.estimates[q].point:.6f}"
        rows.append((
            d.cycle, d.options_total, "" if d.chosen is None else d.chosen,
            "-".join(map(str, combo)) if d.analyzed else "", est("failureRate"), est("cost"),
            d.plan_steps, int(d.failsafe), f"{d.realized['failureRate']:.6f}", f"{d.realized['cost']:.6f}",
        ))
    _emit(args, "health", HEALTH_HEADER, rows)
    return EXIT_OK


def cmd_evolve(args) -> int:
    from .evolve import EvolutionManager, UpdateError, load_package
    from .experiment import build_loop, data_file

    pkg = load_package(_exists(args.package) if args.package else data_file("packages", "latency.json"))
    loop = build_loop(_topology(args), args.scenario, args.seed, _goals(args), _smc(args))
    mgr = EvolutionManager(loop)
    for _ in range(min(args.at, args.cycles)):
        loop.step()
    try:
        h = mgr.stage_update(pkg)
    except UpdateError as exc:
        print(f"cannot stage update: {exc}", file=sys.stderr)
        return EXIT_FAIL
    rep = mgr.validate_update(h, args.seed)
    _emit(args, "validation", ("check", "passed", "detail"), [(n, int(ok), d) for n, ok, d in rep.checks])
    if not rep.passed:
        _say(args, "validation failed")
        return EXIT_FAIL
    if args.validate_only:
        return EXIT_OK
    mgr.activate_update(h)
    for _ in range(args.at, args.cycles):
        loop.step()
    _write_decisions(args, loop.log)
    return EXIT_OK


def _grid(spec: str):
    from .experiment import DEFAULT_GRID

    if spec == "default":
        return DEFAULT_GRID
    with open(_exists(spec), encoding="utf-8") as fh:
        return [tuple(map(float, g)) for g in json.load(fh)]


def cmd_tradeoff(args) -> int:
    from .experiment import SUMMARY_HEADER, ExperimentConfig, run_experiment

    out = args.out or "tradeoff"
    cfg = ExperimentConfig(scenario=args.scenario, seed=args.seed, cycles=args.cycles, grid=_grid(args.grid), out=out)
    res = run_experiment(cfg)
    _emit(args, "summary", SUMMARY_HEADER, res["summary"])
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .experiment import SUMMARY_HEADER, load_experiment, run_experiment

    cfg = load_experiment(_exists(args.config))
    if args.out:
        cfg.out = args.out
    res = run_experiment(cfg)
    _say(args, f"wrote {len(res['logs'])} decision logs to {cfg.out}")
    _emit(args, "summary", SUMMARY_HEADER, res["summary"])
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out", help="output directory (default: tables on stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    smc = argparse.ArgumentParser(add_help=False)
    smc.add_argument("--epsilon", type=float, default=0.05, help="accuracy of probability estimates")
    smc.add_argument("--alpha", type=float, default=0.05, help="1 - confidence of probability estimates")
    smc.add_argument("--rsem", type=float, default=0.05, help="relative standard error target of mean estimates")

    net = argparse.ArgumentParser(add_help=False)
    net.add_argument("--topology", help="topology JSON (default: the 15-mote network)")
    net.add_argument("--scenario", default="drift", help="scenario JSON or shipped name (drift, outage, static, link_drop)")
    net.add_argument("--goals", help="goals JSON (default: packet loss < 10%%, then minimal energy)")

    p = argparse.ArgumentParser(prog="selfadapt", description="Feedback-loop simulation, verification and experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check-model", parents=[common], help="parse and summarize an automaton model")
    s.add_argument("model")
    s.add_argument("--set", action="append", metavar="NAME=VALUE", help="override an initial value (JSON value)")
    s.add_argument("--print", action="store_true", help="print the normalized model text")
    s.set_defaults(func=cmd_check_model)

    s = sub.add_parser("sim", parents=[common, smc, net], help="run the network with the feedback loop")
    s.add_argument("--cycles", type=int, default=90)
    s.add_argument("--policy", choices=("adaptive", "failsafe", "default"), default="adaptive")
    s.add_argument("--budget", type=int, help="verification budget per cycle, in runs")
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("verify", parents=[common], help="explore the loop model on stub scenarios")
    s.add_argument("--model", help="loop model .anm (default: shipped)")
    s.add_argument("--scenario", action="append", help="stub scenario JSON (repeatable; default: shipped suite)")
    s.add_argument("--props", help="properties file (default: shipped)")
    s.add_argument("--depth", type=int, default=10_000)
    s.add_argument("--max-states", type=int, default=1_000_000)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("health", parents=[common, smc], help="run the loop over the health assistance workflow")
    s.add_argument("--catalog", help="catalog JSON (default: shipped)")
    s.add_argument("--cycles", type=int, default=10)
    s.add_argument("--threshold", type=float, default=0.15, help="failure-rate goal")
    s.add_argument("--invocations", type=int, default=100, help="workflow runs per cycle")
    s.set_defaults(func=cmd_health)

    s = sub.add_parser("evolve", parents=[common, smc, net], help="stage, validate and activate an update mid-run")
    s.add_argument("--package", help="update package JSON (default: the latency goal)")
    s.add_argument("--validate-only", action="store_true")
    s.add_argument("--cycles", type=int, default=10)
    s.add_argument("--at", type=int, default=4, help="cycles to run before staging")
    s.set_defaults(func=cmd_evolve)

    s = sub.add_parser("tradeoff", parents=[common], help="sweep accuracy, confidence and RSEM settings")
    s.add_argument("--grid", default="default", help="'default' or a JSON list of [epsilon, alpha, rsem]")
    s.add_argument("--cycles", type=int, default=90)
    s.add_argument("--scenario", default="drift")
    s.set_defaults(func=cmd_tradeoff)

    s = sub.add_parser("experiment", parents=[common], help="run an experiment config file")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name in ("cycles", "at"):
        if getattr(args, name, 0) is not None and getattr(args, name, 0) < 0:
            print(f"selfadapt: --{name} must be >= 0", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"selfadapt: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"selfadapt: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
