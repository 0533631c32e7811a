"""Brute-force ground truth: scan a player's utility over a uniform grid of efforts.

Nothing here uses the closed-form best response; utilities are evaluated
straight from their definitions so the scan can stand as an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import GameSpec, ProfileLike, as_profile, utility

DEFAULT_STEP = 1e-3
DEFAULT_MARGIN = 1e-9
MAX_POINTS = 1_000_000


@dataclass(frozen=True)
class GridConfig:
    upper: float
    step: float = DEFAULT_STEP

    def __post_init__(self):
        if not (self.step > 0 and self.upper > 0):
            raise ValueError("grid step and upper bound must be positive")
        if not (self.step < self.upper):
            raise ValueError("grid step must be below the scan ceiling")
        if self.upper / self.step > MAX_POINTS:
            raise ValueError(f"grid too fine: more than {MAX_POINTS} points")

    @classmethod
    def for_spec(cls, spec: GameSpec, step: float = DEFAULT_STEP) -> "GridConfig":
        return cls(2.0 * max(spec.betas), step)

    def points(self) -> np.ndarray:
        count = int(np.floor(self.upper / self.step + 1e-9)) + 1
        return np.arange(count, dtype=float) * self.step


def _utility_curve(player: int, xs: tuple, spec: GameSpec, grid: np.ndarray) -> np.ndarray:
    others = np.array(xs[:player] + xs[player + 1:], dtype=float)
    s = float(others.sum())
    m = float(others.max())
    p = spec.players[player]
    total = grid + s
    top = np.maximum(grid, m)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(top > 0, np.log(np.where(top > 0, total / top, 1.0)), 0.0)
        u = p.valuation * rel - p.cost * grid
        if spec.reward is not None:
            share = np.where(top > 0, spec.reward * grid / np.where(total > 0, total, 1.0), 0.0)
            u = u + share
    return u


def grid_best_response(
    player: int, profile: ProfileLike, spec: GameSpec, grid: Optional[GridConfig] = None
) -> float:
    """Grid point maximising the player's utility, others fixed; ties go to the smaller effort."""
    profile = as_profile(profile, spec)
    spec.check_player(player)
    grid = grid or GridConfig.for_spec(spec)
    pts = grid.points()
    u = _utility_curve(player, profile.contributions, spec, pts)
    return float(pts[int(np.argmax(u))])


def best_deviation_gain(
    player: int, profile: ProfileLike, spec: GameSpec, grid: Optional[GridConfig] = None
) -> float:
    """Largest utility improvement any grid effort offers over the current contribution."""
    profile = as_profile(profile, spec)
    grid = grid or GridConfig.for_spec(spec)
    u = _utility_curve(player, profile.contributions, spec, grid.points())
    return float(u.max()) - utility(player, profile, spec)


def verify_equilibrium(
    profile: ProfileLike,
    spec: GameSpec,
    grid: Optional[GridConfig] = None,
    margin: float = DEFAULT_MARGIN,
) -> bool:
    """No player gains more than ``margin`` by moving to any grid effort."""
    profile = as_profile(profile, spec)
    grid = grid or GridConfig.for_spec(spec)
    return all(best_deviation_gain(i, profile, spec, grid) <= margin for i in range(spec.n))
