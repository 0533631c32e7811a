"""Join / leave / deviate / coalition experiments and their predicted disruption verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .dynamics import DynamicsConfig, Monitor, Outcome, Trace, final_report, run, step
from .equilibrium import (
    EquilibriumReport,
    Family,
    classify,
    one_value_profile,
    responses,
    two_value_profile,
)
from .model import (
    GameSpec,
    PlayerParams,
    Profile,
    ProfileLike,
    as_profile,
    close,
    slack_scale,
    utility,
)


@dataclass(frozen=True)
class Join:
    params: PlayerParams


@dataclass(frozen=True)
class Leave:
    player: int


@dataclass(frozen=True)
class Deviate:
    player: int
    new_value: float
    # hold the deviator fixed while everyone else re-equilibrates
    frozen: bool = True

    def __post_init__(self):
        if not (self.new_value >= 0 and math.isfinite(self.new_value)):
            raise ValueError("a deviation must be to a finite non-negative contribution")


PerturbationEvent = Union[Join, Leave, Deviate]


@dataclass(frozen=True)
class DisruptionPrediction:
    others_change: bool
    rule: str
    details: str
    # False when the game falls outside the hypotheses the rule was proved under
    applicable: bool = True
    # distance of the nearest inequality edge the verdict depends on
    margin: float = math.inf
    tolerance: float = 0.0

    @property
    def boundary(self) -> bool:
        return self.margin <= 10.0 * self.tolerance

    def as_dict(self) -> dict:
        return {
            "others_change": self.others_change,
            "rule": self.rule,
            "details": self.details,
            "applicable": self.applicable,
            "boundary": self.boundary,
            "margin": None if math.isinf(self.margin) else self.margin,
        }


def exact_equilibrium(report: EquilibriumReport, spec: GameSpec) -> tuple[Profile, EquilibriumReport]:
    """Rebuild a settled (hence slightly noisy) equilibrium exactly from its family parameters."""
    _require_classified(report)
    i = len(report.free_riders)
    if report.family is Family.ONE_VALUE:
        profile = one_value_profile(spec, i, report.eq_value)
    else:
        profile = two_value_profile(spec, i, report.eq_value)
    exact = classify(profile, spec)
    if exact.family is not report.family:
        raise ValueError("the settled profile does not rebuild into the same family")
    return profile, exact


def _require_classified(report: EquilibriumReport) -> None:
    if not report.is_equilibrium or report.family not in (Family.ONE_VALUE, Family.TWO_VALUE):
        raise ValueError("predictions need a classified one-value or two-value equilibrium")


def _contributors(report: EquilibriumReport, spec: GameSpec) -> list[int]:
    return [i for i in range(spec.n) if i not in report.free_riders]


def _in_scope(report: EquilibriumReport, spec: GameSpec) -> bool:
    # leave/deviate verdicts are proved for games where every player contributes
    return not report.free_riders and spec.n >= 3 and (report.eq_value or 0.0) > 0


def predict_join(report: EquilibriumReport, spec: GameSpec, new_params: PlayerParams) -> DisruptionPrediction:
    _require_classified(report)
    tol = spec.tol
    beta = new_params.benefit_cost()
    contributors = _contributors(report, spec)
    m = len(contributors)
    x = report.eq_value
    if report.family is Family.ONE_VALUE:
        beta_1 = min(spec.betas[i] for i in contributors)
        slacks = (beta - beta_1, x - beta_1 / (m + 1), beta / m - x)
        change = all(s > 0 for s in slacks)
        margin = min(abs(s) / slack_scale(beta, beta_1, x) for s in slacks)
        details = (f"beta={beta:.12g} beta_1={beta_1:.12g} n={m} x_eq={x:.12g}; "
                   f"change iff beta>beta_1 and beta_1/(n+1)<x_eq<beta/n")
        return DisruptionPrediction(change, "join/one-value", details, True, margin, tol)
    total = report.profile.total()
    change = total < beta
    margin = abs(beta - total) / slack_scale(beta, total)
    details = (f"beta={beta:.12g} sum={total:.12g} minor beta={spec.betas[report.minor_player]:.12g}; "
               f"change iff sum<beta")
    return DisruptionPrediction(change, "join/two-value", details, True, margin, tol)


def predict_leave(report: EquilibriumReport, spec: GameSpec, leaver: int) -> DisruptionPrediction:
    _require_classified(report)
    spec.check_player(leaver)
    applicable = _in_scope(report, spec)
    if report.family is Family.ONE_VALUE:
        return DisruptionPrediction(False, "leave/one-value", "one-value equilibria survive a departure",
                                    applicable, math.inf, spec.tol)
    change = leaver != report.minor_player
    details = (f"leaver={leaver + 1} minor player={report.minor_player + 1}; "
               f"only the minor player's departure leaves the rest unchanged")
    return DisruptionPrediction(change, "leave/two-value", details, applicable, math.inf, spec.tol)


def predict_deviation(
    report: EquilibriumReport, spec: GameSpec, deviator: int, new_value: float
) -> DisruptionPrediction:
    _require_classified(report)
    spec.check_player(deviator)
    tol = spec.tol
    current = report.profile[deviator]
    if close(new_value, current, tol):
        return DisruptionPrediction(False, "no-op", "deviation equals the current contribution",
                                    True, math.inf, tol)
    applicable = _in_scope(report, spec)
    x_eq = report.eq_value
    xk = new_value
    if report.family is Family.ONE_VALUE:
        change = xk > x_eq
        margin = abs(xk - x_eq) / slack_scale(xk, x_eq)
        details = f"x_k0={xk:.12g} x_eq={x_eq:.12g}; change iff x_k0>x_eq"
        return DisruptionPrediction(change, "deviate/one-value", details, applicable, margin, tol)
    if deviator != report.minor_player:
        details = f"player {deviator + 1} plays x_eq={x_eq:.12g}; the minor player must re-solve"
        margin = abs(xk - x_eq) / slack_scale(xk, x_eq)
        return DisruptionPrediction(True, "deviate/two-value", details, applicable, margin, tol)
    majors = [i for i in _contributors(report, spec) if i != deviator]
    n = len(majors) + 1
    beta_2 = min(spec.betas[j] for j in majors)
    slacks = [x_eq - xk]
    for j in majors:
        slacks.append(spec.betas[j] - ((n - 2) * x_eq + xk + max(x_eq, xk)))
    slacks.append(beta_2 - ((n - 2) * xk + xk))
    unchanged = all(s > 0 for s in slacks)
    scale = slack_scale(x_eq, xk, *(spec.betas[j] for j in majors))
    margin = min(abs(s) for s in slacks) / scale
    details = (f"minor player {deviator + 1} to x_k0={xk:.12g}, x_eq={x_eq:.12g}; unchanged iff "
               f"x_k0<x_eq, beta_j>(n-2)x_eq+x_k0+max(x_eq,x_k0), (n-1)x_k0<beta_2")
    return DisruptionPrediction(not unchanged, "deviate/two-value", details, applicable, margin, tol)


def predict(report: EquilibriumReport, spec: GameSpec, event: PerturbationEvent) -> DisruptionPrediction:
    if isinstance(event, Join):
        return predict_join(report, spec, event.params)
    if isinstance(event, Leave):
        return predict_leave(report, spec, event.player)
    if isinstance(event, Deviate):
        return predict_deviation(report, spec, event.player, event.new_value)
    raise TypeError(f"unknown event {event!r}")


@dataclass(frozen=True)
class PostEvent:
    """The game right after an event, before anyone else reacts."""

    spec: GameSpec
    # profile the dynamics start from
    start: Profile
    # profile with the event player's own move realised
    acted: Profile
    # post-event index -> pre-event index, for players not involved in the event
    incumbents: dict[int, int] = field(default_factory=dict)
    frozen: frozenset[int] = frozenset()


def apply_event(profile: ProfileLike, spec: GameSpec, event: PerturbationEvent) -> PostEvent:
    profile = as_profile(profile, spec)
    xs = list(profile.contributions)
    if isinstance(event, Join):
        new_spec = spec.with_player(event.params)
        start = Profile(tuple(xs) + (0.0,))
        x_new = responses(start, new_spec)[-1]
        acted = Profile(tuple(xs) + (x_new,))
        incumbents = {i: i for i in range(spec.n)}
        return PostEvent(new_spec, start, acted, incumbents)
    if isinstance(event, Leave):
        spec.check_player(event.player)
        new_spec = spec.without_player(event.player)
        start = Profile(tuple(xs[:event.player] + xs[event.player + 1:]))
        incumbents = {i: (i if i < event.player else i + 1) for i in range(new_spec.n)}
        return PostEvent(new_spec, start, start, incumbents)
    if isinstance(event, Deviate):
        spec.check_player(event.player)
        acted = profile.replace(event.player, event.new_value)
        incumbents = {i: i for i in range(spec.n) if i != event.player}
        frozen = frozenset([event.player]) if event.frozen else frozenset()
        return PostEvent(spec, acted, acted, incumbents, frozen)
    raise TypeError(f"unknown event {event!r}")


def observed_change(profile: ProfileLike, spec: GameSpec, post: PostEvent) -> bool:
    """Whether any incumbent's best response moves once the event player has acted."""
    profile = as_profile(profile, spec)
    brs = responses(post.acted, post.spec)
    return any(not close(brs[i], profile[j], spec.tol) for i, j in post.incumbents.items())


def apply_and_settle(
    profile: ProfileLike,
    spec: GameSpec,
    event: PerturbationEvent,
    config: Optional[DynamicsConfig] = None,
) -> tuple[Trace, bool]:
    """Apply ``event``, run the dynamics from the post-event state, and report the first-step verdict."""
    profile = as_profile(profile, spec)
    post = apply_event(profile, spec, event)
    changed = observed_change(profile, spec, post)
    trace = run(post.start, post.spec, config, post.frozen)
    return trace, changed


def coalition_merge(profile: ProfileLike, members) -> Profile:
    """Replace the coalition members by one player contributing their total.

    The merged player takes the position of the lowest-indexed member.
    """
    profile = as_profile(profile)
    members = sorted(set(members))
    if not members:
        raise ValueError("a coalition needs at least one member")
    for i in members:
        if not (0 <= i < len(profile)):
            raise IndexError(f"member {i} out of range")
    merged = math.fsum(profile[i] for i in members)
    keep = set(members[1:])
    out = []
    for i, x in enumerate(profile):
        if i == members[0]:
            out.append(merged)
        elif i not in keep:
            out.append(x)
    return Profile(tuple(out))


# -- non-myopic deviation ------------------------------------------------------

@dataclass(frozen=True)
class DeviationOutcome:
    x_dev: float
    settled: Profile
    outcome: Outcome
    utility_delta: float
    # incumbents that contributed before and free ride once play settles
    forced_free_riders: tuple[int, ...]

    @property
    def converged(self) -> bool:
        return self.outcome is Outcome.CONVERGED


@dataclass(frozen=True)
class NonMyopicReport:
    deviator: int
    x_eq: float
    baseline_utility: float
    # sorted by utility delta, best first
    points: tuple[DeviationOutcome, ...]
    # the game has no reward, so a profitable deviation is not expected
    diagnostic: bool

    @property
    def settled_points(self) -> list[DeviationOutcome]:
        return [p for p in self.points if p.converged]

    @property
    def any_positive(self) -> bool:
        return any(p.utility_delta > 0 for p in self.settled_points)

    @property
    def best(self) -> Optional[DeviationOutcome]:
        return self.points[0] if self.points else None


def evaluate_deviation(
    eq_profile: ProfileLike,
    spec: GameSpec,
    deviator: int,
    x_dev: float,
    config: Optional[DynamicsConfig] = None,
) -> DeviationOutcome:
    """Freeze the deviator at ``x_dev``, let everyone else settle, and score the deviator."""
    config = config or DynamicsConfig()
    eq_profile = as_profile(eq_profile, spec)
    spec.check_player(deviator)
    trace = run(eq_profile.replace(deviator, x_dev), spec, config, frozen={deviator})
    final = trace.final
    delta = utility(deviator, final, spec) - utility(deviator, eq_profile, spec)
    zero_tol = config.report_tolerance(spec)
    forced = tuple(
        i for i in range(spec.n)
        if i != deviator and not close(eq_profile[i], 0.0, zero_tol) and close(final[i], 0.0, zero_tol)
    )
    return DeviationOutcome(x_dev, final, trace.outcome, delta, forced)


def non_myopic_search(
    eq_profile: ProfileLike,
    spec: GameSpec,
    deviator: int,
    config: Optional[DynamicsConfig] = None,
    grid: Optional[float] = None,
    k: float = 3.0,
) -> NonMyopicReport:
    """Scan upward deviations over ``(x_eq, k * x_eq]`` and rank them by the deviator's gain.

    ``x_eq`` is the largest contribution of the starting equilibrium; the
    default grid step is ``x_eq / 50``. Without a reward the scan still runs
    but the report is marked diagnostic.
    """
    eq_profile = as_profile(eq_profile, spec)
    spec.check_player(deviator)
    if not k > 1:
        raise ValueError("k must exceed 1")
    x_eq = eq_profile.max()
    if x_eq <= 0:
        raise ValueError("the starting equilibrium has no contributions to scan above")
    step_size = grid if grid is not None else x_eq / 50.0
    if not step_size > 0:
        raise ValueError("grid step must be positive")
    count = int(math.floor((k - 1.0) * x_eq / step_size + 1e-9))
    points = [
        evaluate_deviation(eq_profile, spec, deviator, x_eq + j * step_size, config)
        for j in range(1, count + 1)
    ]
    points.sort(key=lambda p: (-p.utility_delta, p.x_dev))
    return NonMyopicReport(
        deviator=deviator,
        x_eq=x_eq,
        baseline_utility=utility(deviator, eq_profile, spec),
        points=tuple(points),
        diagnostic=spec.reward is None,
    )


# -- runs with scheduled events -------------------------------------------------

@dataclass(frozen=True)
class EventRun:
    """Dynamics interleaved with events; player ids are stable 1-based labels."""

    snapshots: tuple[tuple[tuple[int, ...], Profile], ...]
    reliability: tuple[float, ...]
    utilities: tuple[tuple[float, ...], ...]
    outcome: Outcome
    cycle_period: Optional[int]
    settle_step: Optional[int]
    final_spec: GameSpec
    final_report: Optional[EquilibriumReport]
    frozen_ids: frozenset[int]

    @property
    def final(self) -> Profile:
        return self.snapshots[-1][1]


def _measure(profile: Profile, spec: GameSpec) -> tuple[float, tuple[float, ...]]:
    from .dynamics import _measure as measure
    return measure(profile.contributions, spec)


def run_with_events(
    initial: ProfileLike,
    spec: GameSpec,
    config: Optional[DynamicsConfig],
    events: Sequence[tuple[int, object]],
) -> EventRun:
    """Run the dynamics, applying each ``(step, event)`` to the profile reached at that step.

    Events here address players by stable 1-based id: ``Leave.player`` and
    ``Deviate.player`` are ids, and joiners receive the next unused id. The
    run cannot stop before the last event; after it the usual stopping
    rules apply, with ``config.max_steps`` counted from step 0.
    """
    config = config or DynamicsConfig()
    cur = as_profile(initial, spec)
    ids = list(range(1, spec.n + 1))
    next_id = spec.n + 1
    frozen_ids: set[int] = set()
    pending = sorted(events, key=lambda e: e[0])
    last_event = pending[-1][0] if pending else 0
    for (a, _), (b, _) in zip(pending, pending[1:]):
        if b <= a:
            raise ValueError("event steps must be strictly increasing")

    def frozen_idx():
        return frozenset(ids.index(i) for i in frozen_ids if i in ids)

    snapshots = []
    rels, uss = [], []

    def record(profile):
        snapshots.append((tuple(ids), profile))
        rel, us = _measure(profile, spec)
        rels.append(rel)
        uss.append(us)

    def apply(profile, event):
        nonlocal spec, next_id
        if isinstance(event, Join):
            post = apply_event(profile, spec, event)
            ids.append(next_id)
            next_id += 1
        elif isinstance(event, Leave):
            if event.player not in ids:
                raise ValueError(f"player id {event.player} is not in the game")
            post = apply_event(profile, spec, Leave(ids.index(event.player)))
            ids.remove(event.player)
            frozen_ids.discard(event.player)
        elif isinstance(event, Deviate):
            if event.player not in ids:
                raise ValueError(f"player id {event.player} is not in the game")
            idx = ids.index(event.player)
            post = apply_event(profile, spec, Deviate(idx, event.new_value, event.frozen))
            if event.frozen:
                frozen_ids.add(event.player)
        else:
            raise TypeError(f"unknown event {event!r}")
        spec = post.spec
        return post.start

    while pending and pending[0][0] == 0:
        cur = apply(cur, pending.pop(0)[1])
    record(cur)
    monitor = Monitor(config, cur)
    outcome = Outcome.MAX_STEPS_REACHED
    limit = max(config.max_steps, last_event)
    for t in range(1, limit + 1):
        nxt = step(cur, spec, config, frozen_idx())
        if pending and pending[0][0] == t:
            nxt = apply(nxt, pending.pop(0)[1])
            record(nxt)
            monitor.reset(nxt, t)
            cur = nxt
            continue
        record(nxt)
        result = monitor.observe(t, cur, nxt)
        cur = nxt
        if result is not None and not pending:
            outcome = result
            break
        if result is not None:
            monitor.reset(cur, t)
    return EventRun(
        snapshots=tuple(snapshots),
        reliability=tuple(rels),
        utilities=tuple(uss),
        outcome=outcome,
        cycle_period=monitor.period if outcome is Outcome.CYCLE_DETECTED else None,
        settle_step=monitor.settle_step if outcome is Outcome.CONVERGED else None,
        final_spec=spec,
        final_report=final_report(cur, spec, config, frozen_idx()),
        frozen_ids=frozenset(frozen_ids),
    )
