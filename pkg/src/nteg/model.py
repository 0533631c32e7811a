"""Game definition and the primitive quantities of the normalised total effort game.

Players are indexed from 0 in the Python API. CLI output and CSV files use
1-based player ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

DEFAULT_TOLERANCE = 1e-9


class _AllZero:
    """Marker returned by :func:`nte` when nobody contributes."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ALL_ZERO"

    def __reduce__(self):
        return (_AllZero, ())


ALL_ZERO = _AllZero()


def close(a: float, b: float, tol: float) -> bool:
    """Equality up to ``tol``, relative for large magnitudes and absolute below 1."""
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def slack_scale(*values: float) -> float:
    return max(1.0, *(abs(v) for v in values))


@dataclass(frozen=True)
class PlayerParams:
    cost: float
    valuation: float

    def __post_init__(self):
        cost = float(self.cost)
        valuation = float(self.valuation)
        if not (math.isfinite(cost) and cost > 0):
            raise ValueError(f"cost must be positive and finite, got {self.cost!r}")
        if not (math.isfinite(valuation) and valuation > 0):
            raise ValueError(f"valuation must be positive and finite, got {self.valuation!r}")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "valuation", valuation)

    def benefit_cost(self) -> float:
        return self.valuation / self.cost


@dataclass(frozen=True)
class GameSpec:
    """Immutable game: per-player costs and valuations plus an optional total reward.

    Benefit-cost ratios must be pairwise distinct (inputs need not be sorted)
    unless ``distinct_ratios`` is switched off, which only the symmetric
    two-player reward analysis needs.
    """

    players: tuple[PlayerParams, ...]
    reward: Optional[float] = None
    comparison_tolerance: float = DEFAULT_TOLERANCE
    distinct_ratios: bool = True
    betas: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        players = tuple(self.players)
        object.__setattr__(self, "players", players)
        if len(players) < 2:
            raise ValueError("a game needs at least 2 players")
        if not (self.comparison_tolerance > 0):
            raise ValueError("comparison_tolerance must be positive")
        if self.reward is not None:
            reward = float(self.reward)
            if not (math.isfinite(reward) and reward >= 0):
                raise ValueError(f"reward must be non-negative, got {self.reward!r}")
            object.__setattr__(self, "reward", reward)
        betas = tuple(p.benefit_cost() for p in players)
        ordered = sorted(betas)
        for lo, hi in zip(ordered, ordered[1:]):
            if self.distinct_ratios and close(lo, hi, self.comparison_tolerance):
                raise ValueError(f"benefit-cost ratios must be distinct, found {lo!r} and {hi!r}")
        object.__setattr__(self, "betas", betas)

    @classmethod
    def from_betas(
        cls,
        betas: Sequence[float],
        costs: Optional[Sequence[float]] = None,
        reward: Optional[float] = None,
        comparison_tolerance: float = DEFAULT_TOLERANCE,
    ) -> "GameSpec":
        if costs is None:
            costs = [1.0] * len(betas)
        if len(costs) != len(betas):
            raise ValueError("betas and costs differ in length")
        players = tuple(PlayerParams(c, b * c) for b, c in zip(betas, costs))
        return cls(players, reward, comparison_tolerance)

    @classmethod
    def from_values(
        cls,
        valuations: Sequence[float],
        costs: Sequence[float],
        reward: Optional[float] = None,
        comparison_tolerance: float = DEFAULT_TOLERANCE,
        distinct_ratios: bool = True,
    ) -> "GameSpec":
        if len(costs) != len(valuations):
            raise ValueError("valuations and costs differ in length")
        players = tuple(PlayerParams(c, v) for v, c in zip(valuations, costs))
        return cls(players, reward, comparison_tolerance, distinct_ratios)

    @property
    def n(self) -> int:
        return len(self.players)

    @property
    def tol(self) -> float:
        return self.comparison_tolerance

    def beta(self, player: int) -> float:
        return self.betas[player]

    def order(self) -> list[int]:
        """Player indices sorted by increasing benefit-cost ratio."""
        return sorted(range(self.n), key=lambda i: self.betas[i])

    def with_player(self, params: PlayerParams) -> "GameSpec":
        return replace(self, players=self.players + (params,))

    def without_player(self, player: int) -> "GameSpec":
        self.check_player(player)
        players = self.players[:player] + self.players[player + 1:]
        return replace(self, players=players)

    def with_reward(self, reward: Optional[float]) -> "GameSpec":
        return replace(self, reward=reward)

    def check_player(self, player: int) -> None:
        if not (0 <= player < self.n):
            raise IndexError(f"player index {player} out of range for {self.n} players")


@dataclass(frozen=True)
class Profile:
    """Contribution vector at one instant."""

    contributions: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(x) for x in self.contributions)
        for x in values:
            if not (math.isfinite(x) and x >= 0):
                raise ValueError(f"contributions must be finite and non-negative, got {x!r}")
        object.__setattr__(self, "contributions", values)

    def __len__(self) -> int:
        return len(self.contributions)

    def __getitem__(self, i):
        return self.contributions[i]

    def __iter__(self):
        return iter(self.contributions)

    def total(self) -> float:
        return math.fsum(self.contributions)

    def max(self) -> float:
        return max(self.contributions)

    def argmax(self) -> int:
        # lowest index wins on ties
        best = 0
        for i, x in enumerate(self.contributions):
            if x > self.contributions[best]:
                best = i
        return best

    def replace(self, player: int, value: float) -> "Profile":
        values = list(self.contributions)
        values[player] = value
        return Profile(tuple(values))


ProfileLike = Union[Profile, Sequence[float], Iterable[float]]


def as_profile(profile: ProfileLike, spec: Optional[GameSpec] = None) -> Profile:
    if not isinstance(profile, Profile):
        profile = Profile(tuple(profile))
    if spec is not None and len(profile) != spec.n:
        raise ValueError(f"profile has {len(profile)} entries but the game has {spec.n} players")
    return profile


def nte(profile: ProfileLike):
    """Normalised total effort: total contribution over the largest contribution.

    Returns :data:`ALL_ZERO` when every contribution is zero.
    """
    profile = as_profile(profile)
    top = profile.max()
    if top <= 0:
        return ALL_ZERO
    return profile.total() / top


def reliability(profile: ProfileLike) -> float:
    value = nte(profile)
    if value is ALL_ZERO:
        return 0.0
    return math.log(value)


def reward_share(player: int, profile: ProfileLike, spec: GameSpec) -> float:
    if spec.reward is None:
        raise ValueError("the game has no reward")
    profile = as_profile(profile, spec)
    spec.check_player(player)
    if profile.max() <= 0:
        return 0.0
    return spec.reward * profile[player] / profile.total()


def utility(player: int, profile: ProfileLike, spec: GameSpec) -> float:
    profile = as_profile(profile, spec)
    spec.check_player(player)
    p = spec.players[player]
    u = p.valuation * reliability(profile) - p.cost * profile[player]
    if spec.reward is not None:
        u += reward_share(player, profile, spec)
    return u


def utilities(profile: ProfileLike, spec: GameSpec) -> list[float]:
    profile = as_profile(profile, spec)
    return [utility(i, profile, spec) for i in range(spec.n)]


def social_payoff(profile: ProfileLike, spec: GameSpec) -> float:
    """Reliability times total valuation minus total cost; rewards are not counted."""
    profile = as_profile(profile, spec)
    total_value = math.fsum(p.valuation for p in spec.players)
    total_cost = math.fsum(p.cost * x for p, x in zip(spec.players, profile))
    return reliability(profile) * total_value - total_cost


def social_optimum(spec: GameSpec, min_effort: float) -> Profile:
    """Everyone at the smallest admissible effort, except players priced out of contributing.

    Players are visited in increasing benefit-cost order; a player whose
    others' assigned total already reaches its ratio is set to zero.
    """
    if not (min_effort > 0):
        raise ValueError("min_effort must be positive")
    values = [float(min_effort)] * spec.n
    for j in spec.order():
        others = math.fsum(values) - values[j]
        if others >= spec.betas[j]:
            values[j] = 0.0
    return Profile(tuple(values))
