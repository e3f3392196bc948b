"""Experiment configuration: YAML/JSON documents and shipped presets.

Document layout (every key shown; ``target.weights``, ``plan.alpha_rf``,
``plan.alpha_ant`` and ``output`` are optional)::

    name: desk
    array:  {n_antennas: 32, spacing: 0.5}
    rf:     {n_rf: 16}
    select: {m_rf: 8, m_t: 32}
    grid:   {start: -90, stop: 90, num: 61}
    target: {intervals: [[-27, -23], [28, 32]], level: 1.0, weights: null}
    plan:   {epochs: 400, steps: 10, lr: 0.02, alpha_init: 3200, alpha_final: 16000,
             snapshots: 64, seed: 0, resample: true, alpha_rf: null, alpha_ant: null}
    power_path: empirical          # or closed-form
    output: {dir: runs/desk}

A result.json written by a run carries the same document under ``config`` and
can be loaded directly to replay that run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .array import AngleGrid, ArrayGeometry, TargetPattern, pattern_from_intervals, steering_matrix
from .trainer import Problem, TrainPlan


class ConfigError(ValueError):
    def __init__(self, message, key=None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    n_antennas: int
    n_rf: int
    m_rf: int
    m_t: int
    plan: TrainPlan
    spacing: float = 0.5
    grid: tuple = (-90.0, 90.0, 181)
    intervals: tuple = ()
    level: float = 1.0
    weights: Optional[tuple] = None
    out_dir: Optional[str] = None

    @property
    def mode(self) -> str:
        rf = self.m_rf < self.n_rf
        ant = self.m_t < self.n_antennas
        return {(True, True): "hybrid", (True, False): "rf-only",
                (False, True): "antennas-only", (False, False): "none"}[rf, ant]

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.n_antennas, self.spacing)

    def angle_grid(self) -> AngleGrid:
        start, stop, num = self.grid
        return AngleGrid.uniform(start, stop, num)

    def target(self) -> TargetPattern:
        pattern = pattern_from_intervals(self.angle_grid(), self.intervals, self.level)
        if self.weights is None:
            return pattern
        return TargetPattern(pattern.grid, pattern.desired_power, self.weights)

    def problem(self) -> Problem:
        target = self.target()
        return Problem(steering_matrix(self.geometry(), target.grid), target,
                       self.n_rf, self.m_rf, self.m_t)

    def with_overrides(self, seed=None, epochs=None, power_path=None, out_dir=None):
        plan_changes = {}
        if seed is not None:
            plan_changes["seed"] = seed
        if epochs is not None:
            plan_changes["n_epochs"] = epochs
        if power_path is not None:
            plan_changes["power_path"] = power_path
        try:
            plan = replace(self.plan, **plan_changes)
        except ValueError as exc:
            raise ConfigError(str(exc), "plan") from exc
        cfg = replace(self, plan=plan, out_dir=out_dir or self.out_dir)
        validate(cfg)
        return cfg

    def to_dict(self, include_output: bool = False) -> dict:
        p = self.plan
        doc = {
            "name": self.name,
            "array": {"n_antennas": self.n_antennas, "spacing": self.spacing},
            "rf": {"n_rf": self.n_rf},
            "select": {"m_rf": self.m_rf, "m_t": self.m_t},
            "grid": {"start": self.grid[0], "stop": self.grid[1], "num": self.grid[2]},
            "target": {
                "intervals": [list(iv) for iv in self.intervals],
                "level": self.level,
                "weights": None if self.weights is None else list(self.weights),
            },
            "plan": {
                "epochs": p.n_epochs, "steps": p.n_steps, "lr": p.lr,
                "alpha_init": p.alpha_init, "alpha_final": p.alpha_final,
                "snapshots": p.snapshots, "seed": p.seed, "resample": p.resample,
                "alpha_rf": None if p.alpha1 is None else list(p.alpha1),
                "alpha_ant": None if p.alpha2 is None else list(p.alpha2),
            },
            "power_path": p.power_path,
        }
        if include_output and self.out_dir is not None:
            doc["output"] = {"dir": self.out_dir}
        return doc


_SECTIONS = {
    "array": {"n_antennas": True, "spacing": False},
    "rf": {"n_rf": True},
    "select": {"m_rf": False, "m_t": False},
    "grid": {"start": False, "stop": False, "num": False},
    "target": {"intervals": True, "level": False, "weights": False},
    "plan": {"epochs": False, "steps": False, "lr": True, "alpha_init": True, "alpha_final": True,
             "snapshots": True, "seed": False, "resample": False, "alpha_rf": False, "alpha_ant": False},
    "output": {"dir": False},
}
_TOP = {"name", "power_path", *_SECTIONS}


def _get(doc, section, key, kind, default=None):
    sec = doc.get(section) or {}
    if key not in sec or sec[key] is None:
        if _SECTIONS[section][key]:
            raise ConfigError("missing required key", f"{section}.{key}")
        return default
    value = sec[key]
    dotted = f"{section}.{key}"
    try:
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected {kind.__name__}, got {value!r}", dotted) from None
    return value


def _pair(value, key):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError("expected [init, final]", key)
    return (float(value[0]), float(value[1]))


def from_dict(doc: dict, source: str = "<config>") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"{source} does not contain a mapping")
    if "config" in doc and isinstance(doc["config"], dict):
        doc = doc["config"]
    unknown = set(doc) - _TOP
    if unknown:
        raise ConfigError("unknown key", sorted(unknown)[0])
    for section, keys in _SECTIONS.items():
        sec = doc.get(section)
        if sec is None:
            continue
        if not isinstance(sec, dict):
            raise ConfigError("expected a mapping", section)
        extra = set(sec) - set(keys)
        if extra:
            raise ConfigError("unknown key", f"{section}.{sorted(extra)[0]}")

    n_t = _get(doc, "array", "n_antennas", int)
    n_rf = _get(doc, "rf", "n_rf", int)
    intervals = _get(doc, "target", "intervals", list)
    if not isinstance(intervals, list) or any(
            not isinstance(iv, (list, tuple)) or len(iv) != 2 for iv in intervals):
        raise ConfigError("expected a list of [lo, hi] pairs", "target.intervals")
    weights = _get(doc, "target", "weights", list)
    power_path = doc.get("power_path", "empirical")
    if power_path not in ("empirical", "closed-form"):
        raise ConfigError(f"expected 'empirical' or 'closed-form', got {power_path!r}", "power_path")

    plan_kwargs = dict(
        n_epochs=_get(doc, "plan", "epochs", int, 400),
        n_steps=_get(doc, "plan", "steps", int, 10),
        lr=_get(doc, "plan", "lr", float),
        alpha_init=_get(doc, "plan", "alpha_init", float),
        alpha_final=_get(doc, "plan", "alpha_final", float),
        snapshots=_get(doc, "plan", "snapshots", int),
        seed=_get(doc, "plan", "seed", int, 0),
        resample=_get(doc, "plan", "resample", bool, True),
        alpha1=_pair(_get(doc, "plan", "alpha_rf", list), "plan.alpha_rf"),
        alpha2=_pair(_get(doc, "plan", "alpha_ant", list), "plan.alpha_ant"),
        power_path=power_path,
    )
    checks = [("plan.epochs", plan_kwargs["n_epochs"] >= 1), ("plan.steps", plan_kwargs["n_steps"] >= 1),
              ("plan.lr", plan_kwargs["lr"] > 0), ("plan.snapshots", plan_kwargs["snapshots"] >= 1),
              ("plan.alpha_init", plan_kwargs["alpha_init"] >= 0),
              ("plan.alpha_final", plan_kwargs["alpha_final"] >= plan_kwargs["alpha_init"])]
    for key, ok in checks:
        if not ok:
            raise ConfigError("value out of range", key)
    try:
        plan = TrainPlan(**plan_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), "plan") from exc

    out = (doc.get("output") or {}).get("dir")
    cfg = ExperimentConfig(
        name=str(doc.get("name") or Path(source).stem),
        n_antennas=n_t,
        spacing=_get(doc, "array", "spacing", float, 0.5),
        n_rf=n_rf,
        m_rf=_get(doc, "select", "m_rf", int, n_rf),
        m_t=_get(doc, "select", "m_t", int, n_t),
        grid=(_get(doc, "grid", "start", float, -90.0), _get(doc, "grid", "stop", float, 90.0),
              _get(doc, "grid", "num", int, 181)),
        intervals=tuple((float(lo), float(hi)) for lo, hi in intervals),
        level=_get(doc, "target", "level", float, 1.0),
        weights=None if weights is None else tuple(float(w) for w in weights),
        plan=plan,
        out_dir=None if out is None else str(out),
    )
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Check every cross-field invariant, naming the offending key."""
    if cfg.n_antennas < 1:
        raise ConfigError("must be >= 1", "array.n_antennas")
    if not cfg.spacing > 0:
        raise ConfigError("must be positive", "array.spacing")
    if cfg.n_rf < 1:
        raise ConfigError("must be >= 1", "rf.n_rf")
    if not 1 <= cfg.m_rf <= cfg.n_rf:
        raise ConfigError(f"must satisfy 1 <= m_rf <= n_rf = {cfg.n_rf}", "select.m_rf")
    if not 1 <= cfg.m_t <= cfg.n_antennas:
        raise ConfigError(f"must satisfy 1 <= m_t <= n_antennas = {cfg.n_antennas}", "select.m_t")
    if cfg.plan.snapshots <= max(cfg.m_rf, cfg.m_t):
        raise ConfigError(f"must exceed max(m_rf, m_t) = {max(cfg.m_rf, cfg.m_t)}", "plan.snapshots")
    start, stop, num = cfg.grid
    if num < 1:
        raise ConfigError("must be >= 1", "grid.num")
    if not (-90 <= start <= 90 and -90 <= stop <= 90) or (num > 1 and stop <= start):
        raise ConfigError("grid must be increasing within [-90, 90]", "grid.start")
    for lo, hi in cfg.intervals:
        if lo > hi:
            raise ConfigError(f"interval [{lo}, {hi}] has lo > hi", "target.intervals")
    if cfg.level < 0:
        raise ConfigError("must be nonnegative", "target.level")
    if cfg.weights is not None:
        if len(cfg.weights) != num:
            raise ConfigError(f"expected {num} weights", "target.weights")
        if any(w < 0 for w in cfg.weights):
            raise ConfigError("weights must be nonnegative", "target.weights")


def preset_names() -> list[str]:
    root = resources.files("beamforge") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def preset_path(name: str):
    return resources.files("beamforge") / "presets" / f"{name}.yaml"


def load_config(path) -> ExperimentConfig:
    """Load a YAML/JSON config file, a result.json, or a preset by name."""
    path_str = str(path)
    p = Path(path_str)
    if not p.exists() and path_str in preset_names():
        text = preset_path(path_str).read_text()
        source = path_str
    else:
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path_str}: {exc.strerror}") from exc
        source = path_str
    try:
        doc = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from exc
    return from_dict(doc, source)
