"""Synchronous myopic best-response dynamics with per-step rate limits."""

from __future__ import annotations

import enum
import math
import random
from collections.abc import Collection
from dataclasses import dataclass, replace
from typing import Iterator, Optional

from .equilibrium import EquilibriumReport, classify, responses
from .model import GameSpec, PlayerParams, Profile, ProfileLike, as_profile

CYCLE_WINDOW = 200
CYCLE_DECIMALS = 9


class Outcome(enum.Enum):
    CONVERGED = "Converged"
    CYCLE_DETECTED = "CycleDetected"
    MAX_STEPS_REACHED = "MaxStepsReached"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class DynamicsConfig:
    max_steps: int = 10_000
    convergence_tol: float = 1e-7
    convergence_window: int = 3
    # fractional bounds on per-step increase / decrease; None = unconstrained
    delta_up: Optional[float] = None
    delta_down: Optional[float] = None
    # bound on the summed upward movement of all players in one step
    total_effort_cap: Optional[float] = None
    # largest step up allowed from exactly zero when delta_up is set
    zero_escape: float = 0.01
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.convergence_window < 1:
            raise ValueError("convergence_window must be at least 1")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")
        for name in ("delta_up", "delta_down"):
            value = getattr(self, name)
            if value is not None and not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a non-negative number")
        if self.delta_down is not None and self.delta_down > 1:
            raise ValueError("delta_down above 1 would allow negative contributions")
        if self.total_effort_cap is not None and not self.total_effort_cap > 0:
            raise ValueError("total_effort_cap must be positive")
        if self.zero_escape < 0:
            raise ValueError("zero_escape must be non-negative")

    @classmethod
    def symmetric(cls, delta: float, **kwargs) -> "DynamicsConfig":
        return cls(delta_up=delta, delta_down=delta, **kwargs)

    def with_(self, **changes) -> "DynamicsConfig":
        return replace(self, **changes)

    @property
    def constrained(self) -> bool:
        return (
            self.delta_up is not None
            or self.delta_down is not None
            or self.total_effort_cap is not None
        )

    def report_tolerance(self, spec: GameSpec) -> float:
        """Tolerance for judging where a run ended up.

        A player clamped by ``delta_down`` decays geometrically towards zero,
        so a converged run only pins that player within ``convergence_tol /
        delta_down``.
        """
        if self.delta_down:
            return max(spec.tol, 10.0 * self.convergence_tol / self.delta_down)
        return spec.tol


def step(
    profile: ProfileLike,
    spec: GameSpec,
    config: Optional[DynamicsConfig] = None,
    frozen: Collection[int] = (),
) -> Profile:
    """One simultaneous update: everyone not frozen moves towards its best response."""
    config = config or DynamicsConfig()
    profile = as_profile(profile, spec)
    xs = profile.contributions
    targets = responses(profile, spec)
    up, down = config.delta_up, config.delta_down
    new = list(xs)
    for i, x in enumerate(xs):
        if i in frozen:
            continue
        t = targets[i]
        if down is not None:
            t = max(t, x * (1.0 - down))
        if up is not None:
            t = min(t, x * (1.0 + up) if x > 0 else config.zero_escape)
        new[i] = t
    cap = config.total_effort_cap
    if cap is not None:
        rises = math.fsum(max(0.0, b - a) for a, b in zip(xs, new))
        if rises > cap:
            scale = cap / rises
            new = [a + (b - a) * scale if b > a else b for a, b in zip(xs, new)]
    return Profile(tuple(new))


@dataclass(frozen=True)
class Trace:
    spec: GameSpec
    steps: tuple[Profile, ...]
    reliability: tuple[float, ...]
    utilities: tuple[tuple[float, ...], ...]
    outcome: Outcome
    cycle_period: Optional[int]
    # step applications up to and including the first one that changed nothing
    settle_step: Optional[int]
    final_report: Optional[EquilibriumReport]
    frozen: frozenset[int] = frozenset()

    @property
    def final(self) -> Profile:
        return self.steps[-1]

    @property
    def converged(self) -> bool:
        return self.outcome is Outcome.CONVERGED

    def __len__(self) -> int:
        return len(self.steps)


def _key(xs: tuple[float, ...]) -> tuple[float, ...]:
    return tuple(round(x, CYCLE_DECIMALS) + 0.0 for x in xs)


def _measure(xs: tuple[float, ...], spec: GameSpec) -> tuple[float, tuple[float, ...]]:
    top = max(xs)
    total = math.fsum(xs)
    rel = math.log(total / top) if top > 0 else 0.0
    us = []
    for p, x in zip(spec.players, xs):
        u = p.valuation * rel - p.cost * x
        if spec.reward is not None and top > 0:
            u += spec.reward * x / total
        us.append(u)
    return rel, tuple(us)


class Monitor:
    """Convergence and cycle bookkeeping shared by plain and event-driven runs."""

    def __init__(self, config: DynamicsConfig, start: Profile, start_step: int = 0):
        self.config = config
        self.quiet = 0
        self.seen: dict[tuple, int] = {_key(start.contributions): start_step}
        self.outcome: Optional[Outcome] = None
        self.period: Optional[int] = None
        self.settle_step: Optional[int] = None

    def reset(self, profile: Profile, t: int) -> None:
        """Forget history after the game itself changes."""
        self.quiet = 0
        self.seen = {_key(profile.contributions): t}

    def observe(self, t: int, prev: Profile, cur: Profile) -> Optional[Outcome]:
        change = max((abs(a - b) for a, b in zip(prev, cur)), default=0.0)
        self.quiet = self.quiet + 1 if change <= self.config.convergence_tol else 0
        if self.quiet >= self.config.convergence_window:
            self.outcome = Outcome.CONVERGED
            self.settle_step = t - self.config.convergence_window + 1
            return self.outcome
        k = _key(cur.contributions)
        last = self.seen.get(k)
        if last is not None and 2 <= t - last <= CYCLE_WINDOW and self.quiet == 0:
            self.outcome = Outcome.CYCLE_DETECTED
            self.period = t - last
            return self.outcome
        self.seen[k] = t
        if len(self.seen) > 4 * CYCLE_WINDOW:
            self.seen = {key: s for key, s in self.seen.items() if t - s <= CYCLE_WINDOW}
        return None


def final_report(profile: Profile, spec: GameSpec, config: DynamicsConfig,
                 frozen: Collection[int] = ()) -> Optional[EquilibriumReport]:
    if spec.reward is not None:
        return None
    return classify(profile, spec, tol=config.report_tolerance(spec), ignore=frozen)


def iterate(
    initial: ProfileLike,
    spec: GameSpec,
    config: Optional[DynamicsConfig] = None,
    frozen: Collection[int] = (),
) -> Iterator[Profile]:
    """Unbounded stream of profiles, starting with ``initial``."""
    config = config or DynamicsConfig()
    cur = as_profile(initial, spec)
    frozen = frozenset(frozen)
    yield cur
    while True:
        cur = step(cur, spec, config, frozen)
        yield cur


def run(
    initial: ProfileLike,
    spec: GameSpec,
    config: Optional[DynamicsConfig] = None,
    frozen: Collection[int] = (),
) -> Trace:
    """Iterate :func:`step` until convergence, a detected cycle, or ``max_steps``."""
    config = config or DynamicsConfig()
    frozen = frozenset(frozen)
    cur = as_profile(initial, spec)
    for i in frozen:
        spec.check_player(i)
    steps = [cur]
    rel, us = _measure(cur.contributions, spec)
    rels, uss = [rel], [us]
    monitor = Monitor(config, cur)
    outcome = Outcome.MAX_STEPS_REACHED
    for t in range(1, config.max_steps + 1):
        nxt = step(cur, spec, config, frozen)
        steps.append(nxt)
        rel, us = _measure(nxt.contributions, spec)
        rels.append(rel)
        uss.append(us)
        result = monitor.observe(t, cur, nxt)
        cur = nxt
        if result is not None:
            outcome = result
            break
    return Trace(
        spec=spec,
        steps=tuple(steps),
        reliability=tuple(rels),
        utilities=tuple(uss),
        outcome=outcome,
        cycle_period=monitor.period,
        settle_step=monitor.settle_step,
        final_report=final_report(cur, spec, config, frozen),
        frozen=frozen,
    )


def random_instance(
    n: int,
    beta_range: tuple[float, float] = (1.0, 10.0),
    x_range: tuple[float, float] = (0.1, 3.0),
    seed: int = 0,
    cost_range: tuple[float, float] = (0.5, 2.0),
    reward: Optional[float] = None,
) -> tuple[GameSpec, Profile]:
    """Seeded random game with distinct ratios and positive starting contributions."""
    if n < 2:
        raise ValueError("need at least 2 players")
    if not (0 < beta_range[0] <= beta_range[1]) or not (0 < x_range[0] <= x_range[1]):
        raise ValueError("ranges must be positive and ordered")
    rng = random.Random(seed)
    while True:
        players = []
        for _ in range(n):
            c = rng.uniform(*cost_range)
            beta = rng.uniform(*beta_range)
            players.append(PlayerParams(c, beta * c))
        try:
            spec = GameSpec(tuple(players), reward)
        except ValueError:
            continue
        break
    xs = tuple(rng.uniform(*x_range) for _ in range(n))
    return spec, Profile(xs)
