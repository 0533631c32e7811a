"""Best responses, Nash-equilibrium classification and the closed-form equilibrium sets."""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from typing import Iterable, Optional

from .model import GameSpec, Profile, ProfileLike, as_profile, close, slack_scale


class Family(enum.Enum):
    ONE_VALUE = "OneValue"
    TWO_VALUE = "TwoValue"
    NOT_EQUILIBRIUM = "NotEquilibrium"

    def __str__(self) -> str:
        return self.value


def _reject_reward(spec: GameSpec, what: str) -> None:
    if spec.reward is not None:
        raise ValueError(f"{what} is only derived for the reward-free game")


def _response(beta: float, others_sum: float, others_max: float) -> float:
    return max(0.0, min(others_max, beta - others_sum))


def best_response(player: int, profile: ProfileLike, spec: GameSpec) -> float:
    """Utility-maximising contribution of ``player`` with everyone else held fixed.

    ``max(0, min(max of others, beta_j - sum of others))``; never above the
    largest rival contribution.
    """
    _reject_reward(spec, "the analytic best response")
    profile = as_profile(profile, spec)
    spec.check_player(player)
    others = profile.contributions[:player] + profile.contributions[player + 1:]
    return _response(spec.betas[player], math.fsum(others), max(others))


def best_responses(profile: ProfileLike, spec: GameSpec) -> list[float]:
    _reject_reward(spec, "the analytic best response")
    profile = as_profile(profile, spec)
    xs = profile.contributions
    out = []
    for j in range(len(xs)):
        others = xs[:j] + xs[j + 1:]
        out.append(_response(spec.betas[j], math.fsum(others), max(others)))
    return out


def reward_best_response(
    player: int, profile: ProfileLike, spec: GameSpec, min_effort: float = 1e-6
) -> float:
    """Best response under the proportional reward, valid while the reward is below v_j.

    Below the rivals' maximum the utility is concave in the player's own
    effort and rises while the total stays under
    ``(beta + sqrt(beta**2 + 4*R*S/c)) / 2`` (S = others' total); above the
    maximum it falls. When nobody else contributes the supremum is not
    attained, so ``min_effort`` stands in for "a very small amount".
    """
    if spec.reward is None:
        raise ValueError("the game has no reward")
    profile = as_profile(profile, spec)
    spec.check_player(player)
    p = spec.players[player]
    R = spec.reward
    if R >= p.valuation:
        raise ValueError(f"reward {R} must be below player {player}'s valuation {p.valuation}")
    others = profile.contributions[:player] + profile.contributions[player + 1:]
    s = math.fsum(others)
    m = max(others)
    if m <= 0:
        return min_effort if R > 0 else 0.0
    beta = spec.betas[player]
    x_plus = 0.5 * (beta + math.sqrt(beta * beta + 4.0 * R * s / p.cost))
    return max(0.0, min(m, x_plus - s))


def responses(profile: ProfileLike, spec: GameSpec) -> list[float]:
    """Best responses of every player, reward-aware."""
    if spec.reward is None:
        return best_responses(profile, spec)
    profile = as_profile(profile, spec)
    return [reward_best_response(i, profile, spec) for i in range(spec.n)]


@dataclass(frozen=True)
class EquilibriumReport:
    profile: Profile
    is_equilibrium: bool
    family: Optional[Family]
    free_riders: frozenset[int]
    eq_value: Optional[float] = None
    minor_value: Optional[float] = None
    minor_player: Optional[int] = None
    # best response minus actual contribution, per player
    witness: tuple[float, ...] = ()
    # smallest slack of the family's defining inequalities (0 on an edge)
    margin: Optional[float] = None
    tolerance: float = 0.0

    @property
    def unclassified(self) -> bool:
        """An equilibrium matching neither family; should never happen for unfrozen play."""
        return self.is_equilibrium and self.family is None

    @property
    def contributors(self) -> list[int]:
        if self.family is None or self.family is Family.NOT_EQUILIBRIUM:
            return []
        return [i for i in range(len(self.profile)) if i not in self.free_riders]

    def as_dict(self) -> dict:
        return {
            "is_equilibrium": self.is_equilibrium,
            "family": None if self.family is None else self.family.value,
            "unclassified": self.unclassified,
            "free_riders": sorted(i + 1 for i in self.free_riders),
            "eq_value": self.eq_value,
            "minor_value": self.minor_value,
            "minor_player": None if self.minor_player is None else self.minor_player + 1,
            "margin": self.margin,
            "profile": list(self.profile.contributions),
            "witness": list(self.witness),
        }

    def describe(self) -> str:
        lines = [f"equilibrium: {'yes' if self.is_equilibrium else 'no'}"]
        if self.family is None:
            lines.append("family: unclassified")
        else:
            lines.append(f"family: {self.family}")
        if self.free_riders:
            lines.append("free riders: " + ", ".join(str(i + 1) for i in sorted(self.free_riders)))
        if self.eq_value is not None:
            lines.append(f"x_eq: {self.eq_value:.12g}")
        if self.minor_value is not None:
            lines.append(f"x_m: {self.minor_value:.12g} (player {self.minor_player + 1})")
        if self.margin is not None:
            lines.append(f"constraint margin: {self.margin:.6g}")
        return "\n".join(lines)


def classify(
    profile: ProfileLike,
    spec: GameSpec,
    tol: Optional[float] = None,
    ignore: Iterable[int] = (),
) -> EquilibriumReport:
    """Check every player against its best response and match the equilibrium families.

    ``ignore`` lists players (e.g. frozen deviators) excluded from the
    best-response check. ``tol`` defaults to the game's comparison tolerance.
    """
    _reject_reward(spec, "classification")
    profile = as_profile(profile, spec)
    tol = spec.tol if tol is None else tol
    ignore = frozenset(ignore)
    xs = profile.contributions
    brs = best_responses(profile, spec)
    witness = tuple(b - x for b, x in zip(brs, xs))
    is_eq = all(close(xs[i], brs[i], tol) for i in range(spec.n) if i not in ignore)

    def report(family, **kw) -> EquilibriumReport:
        return EquilibriumReport(profile, is_eq, family, witness=witness, tolerance=tol, **kw)

    if not is_eq:
        free = frozenset(i for i, x in enumerate(xs) if close(x, 0.0, tol))
        return report(Family.NOT_EQUILIBRIUM, free_riders=free)

    order = spec.order()
    free = [i for i in order if close(xs[i], 0.0, tol)]
    if len(free) == spec.n:
        return report(Family.ONE_VALUE, free_riders=frozenset(), eq_value=0.0,
                      margin=spec.betas[order[0]] / spec.n)
    i = len(free)
    if set(order[:i]) != set(free):
        return report(None, free_riders=frozenset(free))
    m = spec.n - i
    contributors = order[i:]
    top = max(xs[j] for j in contributors)
    betas = spec.betas

    if all(close(xs[j], top, tol) for j in contributors):
        lower = betas[order[i - 1]] / m if i > 0 else 0.0
        upper = betas[order[i]] / m
        margin = min(top - lower, upper - top)
        if margin >= -tol * slack_scale(top, lower, upper):
            return report(Family.ONE_VALUE, free_riders=frozenset(free), eq_value=top, margin=margin)
        return report(None, free_riders=frozenset(free))

    minor = order[i]
    majors = contributors[1:]
    x_m = xs[minor]
    if (
        len(majors) >= 2
        and all(close(xs[j], top, tol) for j in majors)
        and not close(x_m, top, tol)
        and x_m < top
    ):
        beta_i = betas[minor]
        predicted = beta_i - (m - 1) * top
        lower = beta_i / m
        upper = beta_i / (m - 1)
        margin = min(top - lower, upper - top)
        s = slack_scale(top, beta_i)
        # strictness comes from x_m being distinct from both 0 and x_M
        if close(x_m, predicted, tol) and margin > -tol * s:
            return report(Family.TWO_VALUE, free_riders=frozenset(free), eq_value=top,
                          minor_value=x_m, minor_player=minor, margin=margin)
    return report(None, free_riders=frozenset(free))


def is_equilibrium(profile: ProfileLike, spec: GameSpec, tol: Optional[float] = None) -> bool:
    return classify(profile, spec, tol).is_equilibrium


def two_player_equilibrium_range(spec: GameSpec) -> tuple[float, float]:
    """Closed interval of common efforts x for which (x, x) is an equilibrium."""
    if spec.n != 2:
        raise ValueError("the two-player range needs exactly 2 players")
    _reject_reward(spec, "the two-player range")
    return (0.0, 0.5 * min(spec.betas))


def lemma1_violation(profile: ProfileLike, spec: GameSpec, tol: Optional[float] = None) -> bool:
    """True when two or more best-responding contributors sit strictly below the maximum.

    With distinct benefit-cost ratios this must never happen.
    """
    _reject_reward(spec, "the best-response predicate")
    profile = as_profile(profile, spec)
    tol = spec.tol if tol is None else tol
    xs = profile.contributions
    top = max(xs)
    brs = best_responses(profile, spec)
    below = [
        i for i, x in enumerate(xs)
        if not close(x, 0.0, tol) and x < top and not close(x, top, tol) and close(x, brs[i], tol)
    ]
    return len(below) >= 2


@dataclass(frozen=True)
class RewardEquilibriumBounds:
    """Per-player open intervals on the common contribution of a symmetric equilibrium."""

    per_player: tuple[tuple[float, float], tuple[float, float]]
    discriminants: tuple[float, float]

    def common(self) -> tuple[float, float]:
        lo = max(b[0] for b in self.per_player)
        hi = min(b[1] for b in self.per_player)
        return (lo, hi)

    def contains(self, x: float) -> bool:
        lo, hi = self.common()
        return lo < x < hi


def reward_two_player_bounds(spec: GameSpec, variant: str = "derived") -> RewardEquilibriumBounds:
    """Symmetric equilibrium intervals of the two-player game with proportional reward.

    The discriminant is ``1 + 4(c/R)(v**2/(R c) + v/c)``, which equals
    ``(1 + 2v/R)**2``; hence the upper bound simplifies to ``beta/2 + R/(4c)``
    and the lower bound to 0. ``variant="printed"`` uses ``v**2 c / R`` in
    place of ``v**2 / (R c)``; the two coincide only when c = 1.
    """
    if spec.n != 2:
        raise ValueError("reward bounds need exactly 2 players")
    if spec.reward is None or spec.reward <= 0:
        raise ValueError("reward bounds need a positive reward")
    R = spec.reward
    if R >= min(p.valuation for p in spec.players):
        raise ValueError("reward must be below both valuations")
    if variant not in ("derived", "printed"):
        raise ValueError(f"unknown variant {variant!r}")
    bounds = []
    discs = []
    for p in spec.players:
        c, v = p.cost, p.valuation
        beta = v / c
        quad = v * v / (R * c) if variant == "derived" else v * v * c / R
        disc = 1.0 + 4.0 * (c / R) * (quad + v / c)
        root = math.sqrt(disc)
        lo_raw = (c / (4.0 * R)) * ((R * (1.0 - root) / (2.0 * c)) ** 2 - beta * beta)
        hi = (c / (4.0 * R)) * ((R * (1.0 + root) / (2.0 * c)) ** 2 - beta * beta)
        lo = max(0.0, lo_raw)
        if close(lo, 0.0, spec.tol):
            lo = 0.0
        bounds.append((lo, hi))
        discs.append(disc)
    return RewardEquilibriumBounds((bounds[0], bounds[1]), (discs[0], discs[1]))


# -- constructors for the two families ---------------------------------------

def one_value_profile(spec: GameSpec, free_riders: int, x: float) -> Profile:
    """The ``free_riders`` lowest-ratio players contribute 0, everyone else ``x``."""
    if not (0 <= free_riders < spec.n):
        raise ValueError("free_riders out of range")
    order = spec.order()
    values = [0.0] * spec.n
    for j in order[free_riders:]:
        values[j] = x
    return Profile(tuple(values))


def two_value_profile(spec: GameSpec, free_riders: int, x_major: float) -> Profile:
    """Lowest contributor at ``beta_i - (m-1) x_major``, the rest at ``x_major``."""
    if not (0 <= free_riders <= spec.n - 3):
        raise ValueError("a two-value profile needs at least three contributors")
    order = spec.order()
    m = spec.n - free_riders
    values = [0.0] * spec.n
    minor = order[free_riders]
    values[minor] = spec.betas[minor] - (m - 1) * x_major
    if values[minor] < 0:
        raise ValueError("x_major too large: the minor contribution would be negative")
    for j in order[free_riders + 1:]:
        values[j] = x_major
    return Profile(tuple(values))


@dataclass(frozen=True)
class FamilyRange:
    family: Family
    # number of free riders (the lowest-ratio players)
    free_riders: int
    lower: float
    upper: float
    closed: bool
    feasible: bool
    note: str = ""

    def contains(self, x: float, tol: float = 0.0) -> bool:
        if not self.feasible:
            return False
        if self.closed:
            return self.lower - tol <= x <= self.upper + tol
        return self.lower < x < self.upper

    def describe(self) -> str:
        lb, rb = ("[", "]") if self.closed else ("(", ")")
        if self.family is Family.ONE_VALUE:
            var, label = "x_eq", self.free_riders
        else:
            # rank of the minor player, counting from 1
            var, label = "x_M", self.free_riders + 1
        text = f"{self.family} i={label}: {var} ∈ {lb}{self.lower:.12g}, {self.upper:.12g}{rb}"
        if not self.feasible:
            text += f"  (infeasible: {self.note})"
        return text


def equilibrium_ranges(spec: GameSpec) -> list[FamilyRange]:
    """Parameter ranges of every one-value and two-value family, indexed by free-rider count."""
    _reject_reward(spec, "the equilibrium families")
    betas = sorted(spec.betas)
    n = spec.n
    out = []
    for i in range(n):
        m = n - i
        lower = betas[i - 1] / m if i > 0 else 0.0
        upper = betas[i] / m
        feasible = m >= 2
        out.append(FamilyRange(Family.ONE_VALUE, i, lower, upper, True, feasible,
                               "" if feasible else "a lone contributor best-responds with 0"))
    for i in range(n):
        m = n - i
        if m < 2:
            continue
        beta_i = betas[i]
        feasible = m >= 3
        out.append(FamilyRange(Family.TWO_VALUE, i, beta_i / m, beta_i / (m - 1), False, feasible,
                               "" if feasible else "needs at least two players at x_M"))
    return out


def random_equilibrium(
    rng: random.Random,
    n: int,
    family: Family = Family.ONE_VALUE,
    free_riders: int = 0,
    beta_range: tuple[float, float] = (1.0, 10.0),
) -> tuple[GameSpec, Profile]:
    """Unit-cost game with distinct ratios and an equilibrium of the requested family.

    The family parameter is drawn uniformly from the interior of its range.
    """
    m = n - free_riders
    if family is Family.ONE_VALUE and m < 2:
        raise ValueError("a one-value equilibrium needs two contributors")
    if family is Family.TWO_VALUE and m < 3:
        raise ValueError("a two-value equilibrium needs three contributors")
    while True:
        betas = sorted(rng.uniform(*beta_range) for _ in range(n))
        try:
            spec = GameSpec.from_betas(betas)
        except ValueError:
            continue
        break
    if family is Family.ONE_VALUE:
        lo = betas[free_riders - 1] / m if free_riders else 0.0
        x = rng.uniform(lo, betas[free_riders] / m)
        return spec, one_value_profile(spec, free_riders, x)
    if family is Family.TWO_VALUE:
        beta_i = betas[free_riders]
        x = rng.uniform(beta_i / m, beta_i / (m - 1))
        return spec, two_value_profile(spec, free_riders, x)
    raise ValueError(f"cannot generate {family}")
