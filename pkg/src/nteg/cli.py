"""Command-line entry point: ``nteg simulate | equilibria | perturb | sweep | verify``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from .charts import write_trajectory_svg
from .dynamics import Outcome
from .equilibrium import (
    Family,
    classify,
    equilibrium_ranges,
    reward_two_player_bounds,
    two_player_equilibrium_range,
)
from .model import GameSpec, Profile, reliability
from .oracle import GridConfig, best_deviation_gain, verify_equilibrium
from .perturbation import (
    Deviate,
    Join,
    Leave,
    apply_and_settle,
    exact_equilibrium,
    predict,
    run_with_events,
)
from .scenario import (
    Scenario,
    ScenarioError,
    build_scenario,
    fmt,
    load_scenario,
    parse_event_json,
    trace_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNSETTLED = 2
EXIT_DISAGREE = 3

SWEEP_AXES = ("delta", "delta_up", "delta_down", "cap", "seed")
SWEEP_HEADER = ("value", "outcome", "settle_step", "family", "x_eq", "contributors", "reliability")

ASYMMETRY_NOTE = (
    "note: in our simulations x_eq ends higher when decreases are the tighter constraint "
    "(small delta_down), the reverse of the published sentence on asymmetric limits"
)


class _ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _spec_from_args(args, allow_equal_ratios: bool = False) -> GameSpec:
    if args.beta is not None:
        if args.v is not None or args.c is not None:
            raise ValueError("give either --beta or --v/--c")
        return GameSpec.from_betas(args.beta, reward=args.reward, comparison_tolerance=args.tolerance)
    if args.v is None or args.c is None:
        raise ValueError("the game needs --beta, or both --v and --c")
    return GameSpec.from_values(args.v, args.c, args.reward, args.tolerance,
                                distinct_ratios=not allow_equal_ratios)


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=_floats, help="benefit-cost ratios (unit costs)")
    p.add_argument("--v", type=_floats, help="valuations")
    p.add_argument("--c", type=_floats, help="costs")
    p.add_argument("--reward", type=float, default=None, help="total reward R")
    p.add_argument("--tolerance", type=float, default=1e-9)


# -- simulate --------------------------------------------------------------------

def _run_scenario(scen: Scenario):
    return run_with_events(scen.initial, scen.spec, scen.dynamics, scen.events)


def _report_payload(scen: Scenario, result) -> dict:
    ids, final = result.snapshots[-1]
    payload = {
        "scenario": scen.name,
        "seed": scen.seed,
        "outcome": result.outcome.value,
        "steps": len(result.snapshots) - 1,
        "settle_step": result.settle_step,
        "cycle_period": result.cycle_period,
        "player_ids": list(ids),
        "final_profile": list(final.contributions),
        "reliability": result.reliability[-1],
        "equilibrium": None if result.final_report is None else result.final_report.as_dict(),
    }
    if result.final_report is None:
        payload["oracle_equilibrium"] = verify_equilibrium(final, result.final_spec)
    return payload


def _report_text(payload: dict) -> str:
    lines = [f"scenario: {payload['scenario']} (seed {payload['seed']})",
             f"outcome: {payload['outcome']} after {payload['steps']} steps"]
    if payload["settle_step"] is not None:
        lines.append(f"settled at step: {payload['settle_step']}")
    if payload["cycle_period"] is not None:
        lines.append(f"cycle period: {payload['cycle_period']}")
    lines.append("final profile: " + ", ".join(
        f"{pid}={fmt(x)}" for pid, x in zip(payload["player_ids"], payload["final_profile"])))
    lines.append(f"reliability: {fmt(payload['reliability'])}")
    eq = payload["equilibrium"]
    if eq is None:
        verdict = "yes" if payload["oracle_equilibrium"] else "no"
        lines.append(f"reward game, grid oracle equilibrium: {verdict}")
    else:
        ids = payload["player_ids"]
        lines.append(f"equilibrium: {'yes' if eq['is_equilibrium'] else 'no'}")
        lines.append(f"family: {eq['family'] or 'unclassified'}")
        if eq["free_riders"]:
            lines.append("free riders: " + ", ".join(str(ids[i - 1]) for i in eq["free_riders"]))
        if eq["eq_value"] is not None:
            lines.append(f"x_eq: {fmt(eq['eq_value'])}")
        if eq["minor_value"] is not None:
            lines.append(f"x_m: {fmt(eq['minor_value'])} (player {ids[eq['minor_player'] - 1]})")
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    scen = load_scenario(args.scenario)
    result = _run_scenario(scen)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in scen.outputs:
        (out / "trace.csv").write_text(trace_csv(result), encoding="utf-8")
    if "svg" in scen.outputs:
        write_trajectory_svg(out / "trace.svg", [(ids, p.contributions) for ids, p in result.snapshots],
                             title=f"{scen.name}: contributions per step")
    payload = _report_payload(scen, result)
    if "report" in scen.outputs:
        (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(_report_text(payload))
    print(json.dumps(payload))
    return EXIT_OK if result.outcome is Outcome.CONVERGED else EXIT_UNSETTLED


# -- equilibria ------------------------------------------------------------------

def cmd_equilibria(args) -> int:
    reward_two = args.reward is not None and args.v is not None and len(args.v) == 2
    spec = _spec_from_args(args, allow_equal_ratios=reward_two)
    if spec.reward is not None:
        if spec.n != 2:
            print("reward games: only the two-player case has analytic bounds")
            return EXIT_OK
        bounds = reward_two_player_bounds(spec)
        for k, ((lo, hi), disc) in enumerate(zip(bounds.per_player, bounds.discriminants), start=1):
            print(f"player {k}: discriminant {fmt(disc)}, x ∈ ({fmt(lo)}, {fmt(hi)})")
        lo, hi = bounds.common()
        print(f"symmetric equilibria: x ∈ ({fmt(lo)}, {fmt(hi)})")
        return EXIT_OK
    if spec.n == 2:
        lo, hi = two_player_equilibrium_range(spec)
        print(f"two players: x_eq ∈ [{fmt(lo)}, {fmt(hi)}]")
    for r in equilibrium_ranges(spec):
        print(r.describe())
    return EXIT_OK


# -- perturb ---------------------------------------------------------------------

def _to_index(event, ids):
    def index(pid):
        if pid not in ids:
            raise ValueError(f"player id {pid} is not in the settled game")
        return ids.index(pid)

    if isinstance(event, Leave):
        return Leave(index(event.player))
    if isinstance(event, Deviate):
        return Deviate(index(event.player), event.new_value, event.frozen)
    return event


def cmd_perturb(args) -> int:
    scen = load_scenario(args.scenario)
    event = parse_event_json(args.event)
    if scen.spec.reward is not None:
        print("perturbation predictions need a game without reward", file=sys.stderr)
        return EXIT_USAGE
    result = _run_scenario(scen)
    if result.outcome is not Outcome.CONVERGED:
        print(f"the scenario did not settle ({result.outcome}); nothing to perturb", file=sys.stderr)
        return EXIT_UNSETTLED
    spec = result.final_spec
    report = result.final_report
    if report is None or not report.is_equilibrium or report.family not in (Family.ONE_VALUE, Family.TWO_VALUE):
        print("the settled state is not a classified equilibrium; refusing the event", file=sys.stderr)
        return EXIT_USAGE
    ids = list(result.snapshots[-1][0])
    profile, report = exact_equilibrium(report, spec)
    indexed = _to_index(event, ids)
    prediction = predict(report, spec, indexed)
    trace, observed = apply_and_settle(profile, spec, indexed, scen.dynamics)
    agree = prediction.others_change == observed
    counted = prediction.applicable and not prediction.boundary
    payload = {
        "equilibrium": report.as_dict(),
        "player_ids": ids,
        "prediction": prediction.as_dict(),
        "observed_change": observed,
        "agree": agree,
        "settled_outcome": trace.outcome.value,
        "settled_profile": list(trace.final.contributions),
        "settled": None if trace.final_report is None else trace.final_report.as_dict(),
    }
    print(f"before: {report.family}, x_eq={fmt(report.eq_value)}")
    print(f"rule: {prediction.rule}  ({prediction.details})")
    print(f"predicted others change: {prediction.others_change}")
    print(f"observed others change:  {observed}")
    if not prediction.applicable:
        print("note: the game lies outside the rule's hypotheses (free riders or fewer than 3 players)")
    if prediction.boundary:
        print("note: the verdict sits on an inequality edge")
    settled = trace.final_report
    if trace.frozen:
        verdict = "yes" if settled and settled.is_equilibrium else "no"
        print(f"after: {trace.outcome}, others best-responding: {verdict} (deviator held fixed)")
    else:
        family = settled.family.value if settled and settled.family else "unclassified"
        print(f"after: {trace.outcome}, {family}")
    print(json.dumps(payload))
    if counted and not agree:
        return EXIT_DISAGREE
    return EXIT_OK


# -- sweep -----------------------------------------------------------------------

def _sweep_point(task) -> tuple:
    scen, axis, value = task
    if axis == "seed":
        scen = build_scenario(scen.raw, "", scen.name, seed=int(value))
    elif axis == "delta":
        scen.dynamics = scen.dynamics.with_(delta_up=value, delta_down=value)
    elif axis == "delta_up":
        scen.dynamics = scen.dynamics.with_(delta_up=value)
    elif axis == "delta_down":
        scen.dynamics = scen.dynamics.with_(delta_down=value)
    elif axis == "cap":
        scen.dynamics = scen.dynamics.with_(total_effort_cap=value)
    result = _run_scenario(scen)
    report = result.final_report
    family = report.family.value if report and report.family else ""
    x_eq = report.eq_value if report and report.family not in (None, Family.NOT_EQUILIBRIUM) else None
    contributors = len(report.contributors) if report else ""
    if report is not None and report.family is Family.ONE_VALUE and x_eq == 0:
        contributors = 0
    return (
        fmt(value) if axis != "seed" else str(int(value)),
        result.outcome.value,
        "" if result.settle_step is None else result.settle_step,
        family,
        "" if x_eq is None else fmt(x_eq),
        contributors,
        fmt(result.reliability[-1]),
    )


def sweep_rows(scen: Scenario, axis: str, values, jobs: Optional[int] = None) -> list[tuple]:
    tasks = [(scen, axis, v) for v in values]
    if jobs == 1 or len(tasks) == 1:
        return [_sweep_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_point, tasks))


def cmd_sweep(args) -> int:
    if not args.values:
        raise ScenarioError("the sweep axis has no values", None, "--values")
    if args.axis == "seed" and any(v != int(v) or v < 0 for v in args.values):
        raise ScenarioError("seed values must be non-negative integers", None, "--values")
    scen = load_scenario(args.scenario)
    rows = sweep_rows(scen, args.axis, args.values, args.jobs)
    lines = [",".join(SWEEP_HEADER)] + [",".join(str(c) for c in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    if args.axis in ("delta_up", "delta_down"):
        print(ASYMMETRY_NOTE, file=sys.stderr)
    return EXIT_OK


# -- verify ----------------------------------------------------------------------

def cmd_verify(args) -> int:
    spec = _spec_from_args(args, allow_equal_ratios=args.reward is not None)
    profile = Profile(tuple(args.profile))
    if len(profile) != spec.n:
        raise ValueError(f"profile has {len(profile)} entries but the game has {spec.n} players")
    grid = GridConfig.for_spec(spec, args.step)
    oracle = verify_equilibrium(profile, spec, grid)
    gains = [best_deviation_gain(i, profile, spec, grid) for i in range(spec.n)]
    payload = {"oracle": oracle, "max_gain": max(gains), "reliability": reliability(profile)}
    print(f"oracle (grid step {fmt(args.step)}): {'equilibrium' if oracle else 'not an equilibrium'}")
    print(f"largest deviation gain: {fmt(max(gains))}")
    if spec.reward is not None:
        print("reward game: no analytic classification")
        payload["classify"] = None
        print(json.dumps(payload))
        return EXIT_OK
    report = classify(profile, spec)
    boundary = report.margin is not None and abs(report.margin) <= args.step
    agree = report.is_equilibrium == oracle
    payload.update(classify=report.as_dict(), agree=agree, boundary=boundary)
    print(report.describe())
    print(f"agree: {agree}")
    if boundary:
        print("boundary: the profile lies within one grid step of a family edge")
    print(json.dumps(payload))
    return EXIT_OK if agree else EXIT_DISAGREE


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgParser(prog="nteg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write trace.csv / trace.svg")
    p.add_argument("scenario", help="scenario JSON path or bundled scenario name")
    p.add_argument("--out", default=".", help="directory for artifacts")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("equilibria", help="print equilibrium families and their ranges")
    _add_spec_args(p)
    p.set_defaults(func=cmd_equilibria)

    p = sub.add_parser("perturb", help="settle a scenario, apply one event, compare with the prediction")
    p.add_argument("scenario")
    p.add_argument("--event", required=True,
                   help='JSON, e.g. \'{"leave": 2}\' or \'{"deviate": {"player": 3, "value": 2.5}}\'')
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("sweep", help="rerun a scenario along one parameter axis")
    p.add_argument("scenario")
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", type=_floats, required=True)
    p.add_argument("--jobs", type=int, default=os.cpu_count())
    p.add_argument("--out", help="also write the CSV here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check a profile with classify and the grid oracle")
    p.add_argument("--profile", type=_floats, required=True)
    _add_spec_args(p)
    p.add_argument("--step", type=float, default=1e-3, help="oracle grid step")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
