"""JSON scenario files, trace CSV output, and bundled example scenarios."""

from __future__ import annotations

import csv
import io
import json
import os
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .dynamics import DynamicsConfig, random_instance
from .model import GameSpec, PlayerParams, Profile
from .perturbation import Deviate, EventRun, Join, Leave

SEED_ENV = "NTEG_SEED"
OUTPUT_KINDS = ("csv", "svg", "report")
CSV_HEADER = ("step", "player_id", "contribution", "utility", "reliability")

TOP_KEYS = {"name", "description", "seed", "game", "random", "initial", "dynamics", "events", "outputs"}
GAME_KEYS = {"players", "beta", "costs", "reward", "tolerance"}
RANDOM_KEYS = {"n", "beta_range", "x_range", "cost_range", "reward"}
DYNAMICS_KEYS = {"max_steps", "convergence_tol", "convergence_window", "delta", "delta_up",
                 "delta_down", "total_effort_cap", "zero_escape"}
PLAYER_KEYS = {"cost", "valuation"}
DEVIATE_KEYS = {"player", "value", "frozen"}


class ScenarioError(ValueError):
    """Malformed scenario; ``line`` points into the source text when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = "<scenario>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass
class Scenario:
    spec: GameSpec
    initial: Profile
    dynamics: DynamicsConfig
    events: list[tuple[int, object]] = field(default_factory=list)
    outputs: frozenset[str] = frozenset(OUTPUT_KINDS)
    seed: int = 0
    name: str = ""
    # the raw document, kept so sweeps can rebuild variants
    raw: dict = field(default_factory=dict, repr=False)


class _Parser:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source

    def line_of(self, key: str) -> Optional[int]:
        m = re.search(r'"' + re.escape(key) + r'"\s*:', self.text)
        if m is None:
            return None
        return self.text.count("\n", 0, m.start()) + 1

    def fail(self, message: str, key: Optional[str] = None):
        raise ScenarioError(message, self.line_of(key) if key else None, self.source)

    def check_keys(self, obj: Any, allowed: set, where: str) -> dict:
        if not isinstance(obj, dict):
            self.fail(f"{where} must be an object")
        for key in obj:
            if key not in allowed:
                self.fail(f"unknown key {key!r} in {where}", key)
        return obj

    def number(self, value: Any, key: str, positive: bool = False, nonneg: bool = False) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"{key} must be a number", key)
        if positive and not value > 0:
            self.fail(f"{key} must be positive", key)
        if nonneg and not value >= 0:
            self.fail(f"{key} must be non-negative", key)
        return float(value)

    def integer(self, value: Any, key: str, minimum: int = 0) -> int:
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            self.fail(f"{key} must be an integer >= {minimum}", key)
        return value

    def numbers(self, value: Any, key: str, length: Optional[int] = None) -> list[float]:
        if not isinstance(value, list) or not value:
            self.fail(f"{key} must be a non-empty list of numbers", key)
        out = [self.number(v, key) for v in value]
        if length is not None and len(out) != length:
            self.fail(f"{key} must have {length} entries", key)
        return out


def _parse_game(p: _Parser, game: dict) -> GameSpec:
    p.check_keys(game, GAME_KEYS, "game")
    if ("players" in game) == ("beta" in game):
        p.fail("game needs exactly one of 'players' or 'beta'", "game")
    reward = game.get("reward")
    if reward is not None:
        reward = p.number(reward, "reward", nonneg=True)
    tol = p.number(game.get("tolerance", 1e-9), "tolerance", positive=True)
    try:
        if "players" in game:
            players = game["players"]
            if not isinstance(players, list):
                p.fail("players must be a list", "players")
            params = []
            for entry in players:
                p.check_keys(entry, PLAYER_KEYS, "player")
                if set(entry) != PLAYER_KEYS:
                    p.fail("each player needs 'cost' and 'valuation'", "players")
                params.append(PlayerParams(p.number(entry["cost"], "cost"),
                                           p.number(entry["valuation"], "valuation")))
            return GameSpec(tuple(params), reward, tol)
        betas = p.numbers(game["beta"], "beta")
        costs = p.numbers(game["costs"], "costs", len(betas)) if "costs" in game else None
        return GameSpec.from_betas(betas, costs, reward, tol)
    except ScenarioError:
        raise
    except (ValueError, IndexError) as exc:
        p.fail(str(exc), "game")


def _pair(p: _Parser, obj: dict, key: str, default: tuple[float, float]) -> tuple[float, float]:
    if key not in obj:
        return default
    lo, hi = p.numbers(obj[key], key, 2)
    return lo, hi


def _parse_dynamics(p: _Parser, obj: dict) -> DynamicsConfig:
    p.check_keys(obj, DYNAMICS_KEYS, "dynamics")
    kw: dict[str, Any] = {}
    if "delta" in obj:
        if "delta_up" in obj or "delta_down" in obj:
            p.fail("give either 'delta' or 'delta_up'/'delta_down'", "delta")
        delta = p.number(obj["delta"], "delta", nonneg=True)
        kw["delta_up"] = kw["delta_down"] = delta
    for key in ("delta_up", "delta_down", "total_effort_cap"):
        if obj.get(key) is not None:
            kw[key] = p.number(obj[key], key, nonneg=True)
    if "convergence_tol" in obj:
        kw["convergence_tol"] = p.number(obj["convergence_tol"], "convergence_tol", positive=True)
    if "zero_escape" in obj:
        kw["zero_escape"] = p.number(obj["zero_escape"], "zero_escape", nonneg=True)
    for key in ("max_steps", "convergence_window"):
        if key in obj:
            kw[key] = p.integer(obj[key], key, 1)
    try:
        return DynamicsConfig(**kw)
    except ValueError as exc:
        p.fail(str(exc), "dynamics")


def parse_event(p: _Parser, obj: Any, with_step: bool = True):
    allowed = {"join", "leave", "deviate"} | ({"step"} if with_step else set())
    p.check_keys(obj, allowed, "event")
    kinds = [k for k in ("join", "leave", "deviate") if k in obj]
    if len(kinds) != 1:
        p.fail("an event needs exactly one of 'join', 'leave', 'deviate'", "events")
    kind = kinds[0]
    body = obj[kind]
    try:
        if kind == "join":
            p.check_keys(body, PLAYER_KEYS, "join")
            if set(body) != PLAYER_KEYS:
                p.fail("join needs 'cost' and 'valuation'", "join")
            event = Join(PlayerParams(p.number(body["cost"], "cost"), p.number(body["valuation"], "valuation")))
        elif kind == "leave":
            event = Leave(p.integer(body, "leave", 1))
        else:
            p.check_keys(body, DEVIATE_KEYS, "deviate")
            if "player" not in body or "value" not in body:
                p.fail("deviate needs 'player' and 'value'", "deviate")
            frozen = body.get("frozen", True)
            if not isinstance(frozen, bool):
                p.fail("frozen must be true or false", "frozen")
            event = Deviate(p.integer(body["player"], "player", 1),
                            p.number(body["value"], "value", nonneg=True), frozen)
    except ScenarioError:
        raise
    except ValueError as exc:
        p.fail(str(exc), kind)
    if not with_step:
        return event
    if "step" not in obj:
        p.fail("scheduled events need a 'step'", "events")
    return p.integer(obj["step"], "step", 0), event


def _load_json(text: str, source: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", exc.lineno, source) from None
    if not isinstance(doc, dict):
        raise ScenarioError("a scenario must be a JSON object", 1, source)
    return doc


def parse_scenario(text: str, source: str = "<scenario>", seed: Optional[int] = None) -> Scenario:
    """Parse a scenario document; ``seed`` (or ``$NTEG_SEED``) overrides the file's seed."""
    doc = _load_json(text, source)
    return build_scenario(doc, text, source, seed)


def build_scenario(doc: dict, text: str = "", source: str = "<scenario>",
                   seed: Optional[int] = None) -> Scenario:
    p = _Parser(text, source)
    p.check_keys(doc, TOP_KEYS, "scenario")
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ScenarioError(f"${SEED_ENV} must be an integer", None, source) from None
    if seed is None:
        seed = p.integer(doc.get("seed", 0), "seed", 0)
    if ("game" in doc) == ("random" in doc):
        p.fail("give exactly one of 'game' or 'random'")

    initial_raw = doc.get("initial", "random")
    x_range = (0.1, 3.0)
    if "random" in doc:
        rnd = p.check_keys(doc["random"], RANDOM_KEYS, "random")
        if "n" not in rnd:
            p.fail("random needs 'n'", "random")
        n = p.integer(rnd["n"], "n", 2)
        beta_range = _pair(p, rnd, "beta_range", (1.0, 10.0))
        x_range = _pair(p, rnd, "x_range", x_range)
        cost_range = _pair(p, rnd, "cost_range", (0.5, 2.0))
        reward = rnd.get("reward")
        if reward is not None:
            reward = p.number(reward, "reward", nonneg=True)
        try:
            spec, profile = random_instance(n, beta_range, x_range, seed, cost_range, reward)
        except ValueError as exc:
            p.fail(str(exc), "random")
    else:
        spec = _parse_game(p, doc["game"])
        rng = random.Random(seed)
        profile = Profile(tuple(rng.uniform(*x_range) for _ in range(spec.n)))

    if initial_raw != "random":
        xs = p.numbers(initial_raw, "initial", spec.n)
        try:
            profile = Profile(tuple(xs))
        except ValueError as exc:
            p.fail(str(exc), "initial")

    dynamics = _parse_dynamics(p, doc.get("dynamics", {}))
    dynamics = dynamics.with_(rng_seed=seed)

    raw_events = doc.get("events", [])
    if not isinstance(raw_events, list):
        p.fail("events must be a list", "events")
    events = [parse_event(p, e) for e in raw_events]
    for (a, _), (b, _) in zip(events, events[1:]):
        if b <= a:
            p.fail("event steps must be strictly increasing", "events")

    outputs = doc.get("outputs", list(OUTPUT_KINDS))
    if not isinstance(outputs, list) or any(o not in OUTPUT_KINDS for o in outputs):
        p.fail(f"outputs must be a list drawn from {', '.join(OUTPUT_KINDS)}", "outputs")
    name = doc.get("name", Path(source).stem)
    if not isinstance(name, str):
        p.fail("name must be a string", "name")
    return Scenario(spec, profile, dynamics, events, frozenset(outputs), seed, name, doc)


def load_scenario(path, seed: Optional[int] = None) -> Scenario:
    path = resolve_scenario_path(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", None, str(path)) from None
    return parse_scenario(text, str(path), seed)


def parse_event_json(text: str):
    """A single unscheduled event, e.g. ``{"leave": 2}``."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid event JSON: {exc.msg}", exc.lineno, "<event>") from None
    return parse_event(_Parser(text, "<event>"), obj, with_step=False)


def bundled_dir():
    return resources.files("nteg") / "scenarios"


def bundled_names() -> list[str]:
    return sorted(p.name[:-5] for p in bundled_dir().iterdir() if p.name.endswith(".json"))


def resolve_scenario_path(path) -> Path:
    """A filesystem path, or the bare name of a bundled scenario."""
    candidate = Path(path)
    if candidate.exists():
        return candidate
    name = str(path)
    name = name[:-5] if name.endswith(".json") else name
    if name in bundled_names():
        return Path(str(bundled_dir() / f"{name}.json"))
    return candidate


# -- trace CSV -----------------------------------------------------------------

def fmt(x: float) -> str:
    return "%.12g" % x


def trace_rows(result: EventRun):
    for t, ((ids, profile), rel, us) in enumerate(zip(result.snapshots, result.reliability, result.utilities)):
        for pid, x, u in zip(ids, profile, us):
            yield (t, pid, x, u, rel)


def trace_csv(result: EventRun) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for t, pid, x, u, rel in trace_rows(result):
        writer.writerow((t, pid, fmt(x), fmt(u), fmt(rel)))
    return buf.getvalue()


def read_trace_csv(text: str) -> list[tuple[int, int, float, float, float]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected header {header!r}")
    return [(int(a), int(b), float(c), float(d), float(e)) for a, b, c, d, e in reader]
