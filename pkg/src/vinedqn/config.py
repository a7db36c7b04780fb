"""Run configuration files (YAML) and their validation.

A run file has the top-level keys ``scenario``, ``seed``, ``output_dir``
and the sections ``env``, ``hyper``, ``evaluation``, ``heatmap`` and
``shape_demo``. Every section is optional and falls back to defaults;
unknown keys are rejected with the offending line number.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import yaml

from .environment import EnvConfig
from .interaction import InteractionWeights, Obstacle
from .kinematics import InvalidInputError
from .qlearn.evaluation import GridSpec
from .qlearn.training import Hyperparameters

__all__ = [
    "SCENARIOS",
    "ConfigError",
    "EvaluationSettings",
    "HeatmapSettings",
    "ShapeDemoSettings",
    "RunConfig",
    "load_config",
    "parse_config",
    "dump_config",
    "preset_path",
]

SCENARIOS = ("fixed-goal", "varying-goal", "obstacle-aware")


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class EvaluationSettings:
    trials: int = 100
    step_limit: int = 200


@dataclass(frozen=True)
class HeatmapSettings:
    x_range: tuple[float, float] = (0.0, 4.0)
    y_range: tuple[float, float] = (-4.0, 4.0)
    spacing: float = 0.5
    step_limit: int = 200

    def grid(self) -> GridSpec:
        return GridSpec(self.x_range, self.y_range, self.spacing)


@dataclass(frozen=True)
class ShapeDemoSettings:
    """``mode`` is ``"sweep"`` (ramp the commanded curvature at fixed length)
    or ``"grow"`` (apply constant curvature and growth rates)."""

    mode: str = "sweep"
    s: float = 3.0
    kappa_start: float = 0.0
    kappa_rate: float = -0.5
    growth_rate: float = 0.0
    steps: int = 30


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "fixed-goal"
    seed: int = 0
    output_dir: str = "runs"
    env: EnvConfig = field(default_factory=EnvConfig)
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)
    heatmap: HeatmapSettings = field(default_factory=HeatmapSettings)
    shape_demo: ShapeDemoSettings = field(default_factory=ShapeDemoSettings)

    def to_dict(self) -> dict:
        env = _plain(self.env)
        env["obstacle"] = None if self.env.obstacle is None else {
            "center": list(self.env.obstacle.center), "radius": self.env.obstacle.radius}
        hyper = _plain(self.hyper)
        del hyper["seed"]
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "env": env,
            "hyper": hyper,
            "evaluation": _plain(self.evaluation),
            "heatmap": _plain(self.heatmap),
            "shape_demo": _plain(self.shape_demo),
        }


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (tuple, list)):
        return [_plain(v) for v in obj]
    return obj


def _line_index(node, path=(), out=None):
    """Map key paths to 1-based line numbers from a composed YAML node."""
    if out is None:
        out = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            sub = path + (key_node.value,)
            out[sub] = key_node.start_mark.line + 1
            _line_index(value_node, sub, out)
    return out


class _Reader:
    def __init__(self, source: str, lines: dict):
        self.source = source
        self.lines = lines

    def fail(self, message, path):
        line = None
        for k in range(len(path), 0, -1):
            line = self.lines.get(tuple(path[:k]))
            if line is not None:
                break
        raise ConfigError(message, self.source, line)

    def coerce(self, value, default, path):
        name = ".".join(path)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                self.fail(f"{name} must be true or false", path)
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(f"{name} must be an integer", path)
            return value
        if isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self.fail(f"{name} must be a number", path)
            return float(value)
        if isinstance(default, str):
            if not isinstance(value, str):
                self.fail(f"{name} must be a string", path)
            return value
        if isinstance(default, tuple):
            if not isinstance(value, (list, tuple)):
                self.fail(f"{name} must be a list", path)
            if default and len(value) != len(default) and not isinstance(default[0], int):
                self.fail(f"{name} must have {len(default)} entries", path)
            proto = default[0] if default else 0.0
            return tuple(self.coerce(v, proto, path) for v in value)
        return value

    def section(self, cls, data, path, skip=()):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            self.fail(f"section {'.'.join(path)} must be a mapping", path)
        proto = cls()
        known = {f.name for f in fields(cls)} - set(skip)
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                self.fail(f"unknown key {'.'.join(path + (str(key),))!r}", path + (key,))
            kwargs[key] = self.coerce(value, getattr(proto, key), path + (key,))
        return kwargs


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"malformed YAML: {exc.problem}", source, mark.line + 1 if mark else None) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", source, 1)
    reader = _Reader(source, _line_index(node))

    top_keys = {f.name for f in fields(RunConfig)}
    for key in data:
        if key not in top_keys:
            reader.fail(f"unknown key {key!r}", (key,))

    scenario = data.get("scenario", "fixed-goal")
    if scenario not in SCENARIOS:
        reader.fail(f"scenario must be one of {', '.join(SCENARIOS)}", ("scenario",))
    seed = reader.coerce(data.get("seed", 0), 0, ("seed",))
    output_dir = reader.coerce(data.get("output_dir", "runs"), "runs", ("output_dir",))

    env_data = dict(data.get("env") or {})
    obstacle_data = env_data.pop("obstacle", None)
    interaction_data = env_data.pop("interaction", None)
    env_kwargs = reader.section(EnvConfig, env_data, ("env",), skip=("obstacle", "interaction"))
    try:
        if obstacle_data is not None:
            if not isinstance(obstacle_data, dict) or set(obstacle_data) != {"center", "radius"}:
                reader.fail("env.obstacle needs exactly 'center' and 'radius'", ("env", "obstacle"))
            center = reader.coerce(obstacle_data["center"], (0.0, 0.0), ("env", "obstacle", "center"))
            radius = reader.coerce(obstacle_data["radius"], 0.0, ("env", "obstacle", "radius"))
            env_kwargs["obstacle"] = Obstacle(center, radius)
        interaction = InteractionWeights(**reader.section(InteractionWeights, interaction_data, ("env", "interaction")))
        env = EnvConfig(interaction=interaction, **env_kwargs)
    except (ValueError, InvalidInputError) as exc:
        if isinstance(exc, ConfigError):
            raise
        reader.fail(str(exc), ("env",))

    try:
        hyper = Hyperparameters(seed=seed, **reader.section(Hyperparameters, data.get("hyper"), ("hyper",), skip=("seed",)))
        evaluation = EvaluationSettings(**reader.section(EvaluationSettings, data.get("evaluation"), ("evaluation",)))
        heatmap = HeatmapSettings(**reader.section(HeatmapSettings, data.get("heatmap"), ("heatmap",)))
        shape_demo = ShapeDemoSettings(**reader.section(ShapeDemoSettings, data.get("shape_demo"), ("shape_demo",)))
    except ConfigError:
        raise
    except ValueError as exc:
        reader.fail(str(exc), ())

    if shape_demo.mode not in ("sweep", "grow"):
        reader.fail("shape_demo.mode must be 'sweep' or 'grow'", ("shape_demo", "mode"))
    if scenario == "obstacle-aware" and env.obstacle is None:
        reader.fail("scenario obstacle-aware requires env.obstacle", ("env",))
    if scenario == "fixed-goal" and env.goal_change_prob != 0.0:
        reader.fail("scenario fixed-goal requires env.goal_change_prob = 0", ("env", "goal_change_prob"))
    if scenario != "fixed-goal" and env.goal_change_prob == 0.0:
        reader.fail(f"scenario {scenario} requires env.goal_change_prob > 0", ("env", "goal_change_prob"))

    return RunConfig(scenario, seed, output_dir, env, hyper, evaluation, heatmap, shape_demo)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path))


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def preset_path(name: str) -> Path:
    """Path of a shipped preset, e.g. ``"fixed-goal"`` or ``"obstacle-aware-full"``."""
    return Path(str(resources.files("vinedqn") / "presets" / f"{name}.yaml"))


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    return replace(cfg, seed=seed, hyper=replace(cfg.hyper, seed=seed))
