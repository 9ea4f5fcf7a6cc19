"""Run configuration: an INI file with fixed sections, every key optional.

Grammar (``configparser`` dialect, ``#`` or ``;`` comments)::

    [model]      per_day_scale and any of the ModelParams field names
    [initial]    S I W M Am Sm Em Im
    [weights]    w1 w2 w3 w4
    [grid]       t_f n_steps substeps
    [fbsm]       max_iters rel_tol relaxation u_max
    [run]        modes          comma list of none, u1_only, u2_only, both
                 sweep_w34      comma list of ascending positive weights
                 sweep_modes    comma list of u1_only, u2_only, both
                 output_dir     path

Omitted keys take the tabulated defaults. Floats are written with ``repr`` so
``dump_config`` -> ``load_config`` is lossless.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..errors import ConfigParseError, ValidationError
from ..model import PARAM_NAMES, ModelParams, StateVector
from ..pmp import ObjectiveWeights
from ..scenarios import MODES, ScenarioSpec
from ..solver import FbsmConfig, TimeGrid

SECTIONS = ("model", "initial", "weights", "grid", "fbsm", "run")
DEFAULT_SWEEP = (100.0, 1000.0, 10000.0)


@dataclass(frozen=True)
class RunConfig:
    param_overrides: tuple = ()          # sorted (name, value) pairs
    per_day_scale: float = 1.0
    weights: ObjectiveWeights = ObjectiveWeights()
    x0: StateVector = StateVector.default_initial()
    grid: TimeGrid = TimeGrid()
    fbsm: FbsmConfig = FbsmConfig()
    modes: tuple = MODES
    sweep_w34: tuple = DEFAULT_SWEEP
    sweep_modes: tuple = ("both", "u1_only", "u2_only")
    output_dir: str = "results"
    params: ModelParams = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.per_day_scale) and self.per_day_scale > 0):
            raise ValidationError("per_day_scale", "> 0", self.per_day_scale)
        object.__setattr__(self, "params",
                           ModelParams.preset(self.per_day_scale, **dict(self.param_overrides)))
        _validate_initial(self.x0)
        for m in self.modes:
            if m not in MODES:
                raise ValidationError("modes", f"each in {MODES}", self.modes)
        for m in self.sweep_modes:
            if m not in MODES or m == "none":
                raise ValidationError("sweep_modes", "each in (u1_only, u2_only, both)", self.sweep_modes)
        vals = self.sweep_w34
        if any(not (math.isfinite(v) and v > 0) for v in vals):
            raise ValidationError("sweep_w34", "all > 0", vals)
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValidationError("sweep_w34", "strictly ascending", vals)

    @property
    def t_f(self) -> float:
        return self.grid.t_f

    def scenario(self, mode: str, label: str | None = None) -> ScenarioSpec:
        return ScenarioSpec(label=label or mode, mode=mode, weights=self.weights, fbsm=self.fbsm,
                            params=self.params, x0=self.x0, grid=self.grid)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _validate_initial(x0: StateVector) -> None:
    for f in fields(x0):
        v = getattr(x0, f.name)
        if not math.isfinite(v) or v < 0:
            raise ValidationError(f.name, ">= 0 and finite", v)
    if x0.S + x0.I + x0.W + x0.M <= 0:
        raise ValidationError("S+I+W+M", "> 0", x0.S + x0.I + x0.W + x0.M)


def _key_lines(text: str) -> dict:
    """(section, key) -> 1-based line number, for error messages."""
    where = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = n
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            where[(section, m.group(1).strip())] = n
    return where


def _number(raw: str, section: str, key: str, lines: dict, kind=float):
    try:
        if kind is int:
            v = float(raw)
            if not v.is_integer():
                raise ValueError
            return int(v)
        return float(raw)
    except ValueError:
        raise ConfigParseError(f"expected {kind.__name__}, got {raw!r}",
                               line=lines.get((section, key)), field=f"{section}.{key}") from None


def _list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from None
    lines = _key_lines(text)

    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigParseError(f"unknown section [{section}]", line=lines.get((section, None)))

    def get(section):
        return dict(parser.items(section)) if parser.has_section(section) else {}

    def unknown(section, key):
        return ConfigParseError(f"unknown key in [{section}]", line=lines.get((section, key)),
                                field=f"{section}.{key}")

    kwargs = {}
    overrides = {}
    for key, raw in get("model").items():
        if key == "per_day_scale":
            kwargs["per_day_scale"] = _number(raw, "model", key, lines)
        elif key in PARAM_NAMES:
            overrides[key] = _number(raw, "model", key, lines)
        else:
            raise unknown("model", key)
    kwargs["param_overrides"] = tuple(sorted(overrides.items()))

    def build(section, cls, int_keys=()):
        data = {}
        names = {f.name for f in fields(cls)}
        for key, raw in get(section).items():
            if key not in names:
                raise unknown(section, key)
            data[key] = _number(raw, section, key, lines, int if key in int_keys else float)
        return cls(**data) if data else cls()

    kwargs["weights"] = build("weights", ObjectiveWeights)
    kwargs["grid"] = build("grid", TimeGrid, int_keys=("n_steps", "substeps"))
    kwargs["fbsm"] = build("fbsm", FbsmConfig, int_keys=("max_iters",))
    initial = get("initial")
    if initial:
        base = dataclasses.asdict(StateVector.default_initial())
        for key, raw in initial.items():
            if key not in base:
                raise unknown("initial", key)
            base[key] = _number(raw, "initial", key, lines)
        kwargs["x0"] = StateVector(**base)

    for key, raw in get("run").items():
        if key in ("modes", "sweep_modes"):
            kwargs[key] = tuple(_list(raw))
        elif key == "sweep_w34":
            kwargs[key] = tuple(_number(v, "run", key, lines) for v in _list(raw))
        elif key == "output_dir":
            kwargs[key] = raw.strip()
        else:
            raise unknown("run", key)
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    """Read and validate a config file; every omitted value takes its default."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    out = ["[model]", f"per_day_scale = {cfg.per_day_scale!r}"]
    out += [f"{k} = {v!r}" for k, v in cfg.param_overrides]
    out += ["", "[initial]"]
    out += [f"{k} = {v!r}" for k, v in dataclasses.asdict(cfg.x0).items()]
    for name, obj in (("weights", cfg.weights), ("grid", cfg.grid), ("fbsm", cfg.fbsm)):
        out += ["", f"[{name}]"]
        out += [f"{k} = {v!r}" for k, v in dataclasses.asdict(obj).items()]
    out += ["", "[run]",
            f"modes = {', '.join(cfg.modes)}",
            f"sweep_w34 = {', '.join(repr(v) for v in cfg.sweep_w34)}",
            f"sweep_modes = {', '.join(cfg.sweep_modes)}",
            f"output_dir = {cfg.output_dir}", ""]
    return "\n".join(out)


def effective_parameters(cfg: RunConfig) -> str:
    """Human-readable dump of every value a run will use."""
    lines = [f"# effective parameters (per_day_scale = {cfg.per_day_scale!r})"]
    lines += [f"{k} = {v!r}" for k, v in cfg.params.as_dict().items()]
    lines += [f"{k} = {v!r}" for k, v in dataclasses.asdict(cfg.weights).items()]
    lines += [f"x0.{k} = {v!r}" for k, v in dataclasses.asdict(cfg.x0).items()]
    lines += [f"grid.{k} = {v!r}" for k, v in dataclasses.asdict(cfg.grid).items()]
    lines += [f"fbsm.{k} = {v!r}" for k, v in dataclasses.asdict(cfg.fbsm).items()]
    return "\n".join(lines) + "\n"
