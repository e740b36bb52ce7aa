"""YAML experiment configs with strict, line-numbered validation.

Every section maps onto a frozen dataclass. Unknown keys, missing required
keys and type mismatches raise :class:`ConfigError` naming the offending
line of the source file.
"""

from __future__ import annotations

import dataclasses
import math
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

SCENARIOS = ("sweep-delta", "sweep-deadzone", "sweep-m", "perturbation", "hazard", "oracle-check")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line


@dataclass(frozen=True)
class GraphSection:
    width: float = 4.0
    height: float = 1.0
    radius: float = 0.25
    node_count: int = 500
    source_position: tuple[float, float] | None = None


@dataclass(frozen=True)
class InitialSection:
    low: float = 0.0
    high: float = math.sqrt(17.0)


@dataclass(frozen=True)
class RaisingSection:
    M: float = 5.0
    delta: float | None = None  # None: delta = M
    deadzone: float = 0.0
    M_over_xmax: float | None = None


@dataclass(frozen=True)
class SweepSection:
    delta_over_M: list[float] | None = None
    deadzone_over_K: list[float] | None = None
    M: list[float] | None = None


@dataclass(frozen=True)
class PerturbationSection:
    kind: str = "uniform_positive"
    eps_fraction: float | None = None
    eps_abs: float | None = None
    seed: int = 0


@dataclass(frozen=True)
class HazardSection:
    zone_center: tuple[float, float] = (1.95, 1.95)
    zone_size: tuple[float, float] = (2.5, 2.5)
    scale: float = 1000.0
    exponent: float = 1.5
    dose_radioactive: tuple[float, float] = (100.0, 120.0)
    dose_clean: tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True)
class OracleCheckSection:
    max_nodes: int = 8
    functions: list[str] = field(default_factory=lambda: ["abf", "mpp", "hazard", "hazard-empty"])


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    trials: int = 1
    seed: int = 0
    max_rounds: int = 5000
    function: str = "abf"
    include_plain: bool = False
    workers: int = 1
    record_stride: int = 1
    graph: GraphSection = field(default_factory=GraphSection)
    initial: InitialSection = field(default_factory=InitialSection)
    raising: RaisingSection = field(default_factory=RaisingSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    perturbation: PerturbationSection | None = None
    hazard: HazardSection | None = None
    oracle_check: OracleCheckSection | None = None

    @property
    def initial_high(self) -> float:
        return self.initial.high


def _line(node: yaml.Node | None) -> int | None:
    return None if node is None else node.start_mark.line + 1


def _convert(node: yaml.Node, tp, where: str, source: str | None):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or origin is types.UnionType:
        if isinstance(node, yaml.ScalarNode) and node.tag == "tag:yaml.org,2002:null":
            if type(None) in args:
                return None
        errors = []
        for a in args:
            if a is type(None):
                continue
            try:
                return _convert(node, a, where, source)
            except ConfigError as exc:
                errors.append(exc)
        raise errors[0]
    if dataclasses.is_dataclass(tp):
        return _build(tp, node, where, source)
    if origin is list:
        if not isinstance(node, yaml.SequenceNode):
            raise ConfigError(f"{where}: expected a list", _line(node), source)
        if not node.value:
            raise ConfigError(f"{where}: list must not be empty", _line(node), source)
        return [_convert(v, args[0], f"{where}[{i}]", source) for i, v in enumerate(node.value)]
    if origin is tuple:
        if not isinstance(node, yaml.SequenceNode) or len(node.value) != len(args):
            raise ConfigError(f"{where}: expected a list of {len(args)} values", _line(node), source)
        return tuple(_convert(v, a, f"{where}[{i}]", source) for i, (v, a) in enumerate(zip(node.value, args)))
    if not isinstance(node, yaml.ScalarNode):
        raise ConfigError(f"{where}: expected a {tp.__name__}", _line(node), source)
    value = yaml.SafeLoader("").construct_object(node)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {node.value!r}", _line(node), source)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {node.value!r}", _line(node), source)
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {node.value!r}", _line(node), source)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {node.value!r}", _line(node), source)
        return value
    raise TypeError(tp)


def _build(cls, node: yaml.Node, where: str, source: str | None):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{where or 'config'}: expected a mapping", _line(node), source)
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    values: dict[str, Any] = {}
    for key_node, val_node in node.value:
        key = key_node.value.replace("-", "_")
        path = f"{where}.{key_node.value}" if where else key_node.value
        if key not in fields:
            raise ConfigError(f"unknown key {path!r}", _line(key_node), source)
        if key in values:
            raise ConfigError(f"duplicate key {path!r}", _line(key_node), source)
        values[key] = _convert(val_node, hints[key], path, source)
    for name, f in fields.items():
        if name not in values and f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise ConfigError(f"missing required key {(where + '.' if where else '') + name!r}",
                              _line(node), source)
    return cls(**values)


def parse(text: str, source: str | None = None) -> ExperimentConfig:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          None if mark is None else mark.line + 1, source) from exc
    if root is None:
        raise ConfigError("empty config", 1, source)
    cfg = _build(ExperimentConfig, root, "", source)
    _check(cfg, root, source)
    return cfg


def load(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse(path.read_text(), str(path))


def _key_line(root: yaml.MappingNode, *path: str) -> int | None:
    node: yaml.Node = root
    line = _line(root)
    for key in path:
        if not isinstance(node, yaml.MappingNode):
            break
        for k, v in node.value:
            if k.value.replace("-", "_") == key:
                line, node = _line(k), v
                break
        else:
            break
    return line


def _check(cfg: ExperimentConfig, root, source) -> None:
    def fail(msg: str, *path: str):
        raise ConfigError(msg, _key_line(root, *path), source)

    if cfg.scenario not in SCENARIOS:
        fail(f"unknown scenario {cfg.scenario!r}; expected one of {', '.join(SCENARIOS)}", "scenario")
    if cfg.trials < 1:
        fail("trials must be at least 1", "trials")
    if not 0 <= cfg.seed < 2**64:
        fail("seed must be a 64-bit unsigned integer", "seed")
    if cfg.max_rounds < 1:
        fail("max_rounds must be at least 1", "max_rounds")
    if cfg.workers < 1:
        fail("workers must be at least 1", "workers")
    if cfg.record_stride < 1:
        fail("record_stride must be at least 1", "record_stride")
    if cfg.function not in ("abf", "mpp", "hazard"):
        fail(f"unknown function {cfg.function!r}", "function")
    g = cfg.graph
    if not (g.width > 0 and g.height > 0):
        fail("graph width and height must be positive", "graph")
    if not g.radius > 0:
        fail("graph radius must be positive", "graph", "radius")
    if g.node_count < 2:
        fail("graph node_count must be at least 2", "graph", "node_count")
    if cfg.initial.low < 0 or cfg.initial_high < cfg.initial.low:
        fail("initial range must satisfy 0 <= low <= high", "initial")
    r = cfg.raising
    if r.M < 0:
        fail("raising.M must be nonnegative", "raising", "M")
    if r.delta is not None and not r.delta > 0:
        fail("raising.delta must be positive", "raising", "delta")
    if r.deadzone < 0:
        fail("raising.deadzone must be nonnegative", "raising", "deadzone")
    if r.M_over_xmax is not None and not r.M_over_xmax > 1:
        fail("raising.M_over_xmax must exceed 1", "raising", "M_over_xmax")
    s = cfg.sweep
    if s.delta_over_M is not None and any(v <= 0 for v in s.delta_over_M):
        fail("every sweep.delta_over_M entry must be positive (delta > 0)", "sweep", "delta_over_M")
    if s.deadzone_over_K is not None and any(v < 0 for v in s.deadzone_over_K):
        fail("sweep.deadzone_over_K entries must be nonnegative", "sweep", "deadzone_over_K")
    if s.M is not None and any(v <= 0 for v in s.M):
        fail("sweep.M entries must be positive (delta = M > 0)", "sweep", "M")
    p = cfg.perturbation
    if p is not None:
        if p.kind not in ("none", "uniform_symmetric", "uniform_positive"):
            fail(f"unknown perturbation kind {p.kind!r}", "perturbation", "kind")
        if (p.eps_fraction is None) == (p.eps_abs is None):
            fail("set exactly one of perturbation.eps_fraction and perturbation.eps_abs", "perturbation")
        if p.eps_fraction is not None and not 0 <= p.eps_fraction < 1:
            fail("perturbation.eps_fraction must lie in [0, 1) so that eps < e_min",
                 "perturbation", "eps_fraction")
        if p.eps_abs is not None and p.eps_abs < 0:
            fail("perturbation.eps_abs must be nonnegative", "perturbation", "eps_abs")
        if not 0 <= p.seed < 2**64:
            fail("perturbation.seed must be a 64-bit unsigned integer", "perturbation", "seed")

    need = {
        "sweep-delta": ("sweep", "delta_over_M"),
        "sweep-deadzone": ("sweep", "deadzone_over_K"),
        "sweep-m": ("sweep", "M"),
        "perturbation": ("sweep", "deadzone_over_K"),
    }
    if cfg.scenario in need:
        section, key = need[cfg.scenario]
        if getattr(cfg.sweep, key) is None:
            fail(f"scenario {cfg.scenario} requires {section}.{key}", "sweep")
    if cfg.scenario in ("sweep-deadzone", "perturbation") and cfg.perturbation is None:
        fail(f"scenario {cfg.scenario} requires a perturbation section (eps sets K)", "scenario")
    if cfg.scenario == "hazard" and r.M_over_xmax is None:
        fail("scenario hazard requires raising.M_over_xmax", "raising")


def dump(cfg: ExperimentConfig) -> str:
    """Render back to YAML; ``parse(dump(c)) == c``."""

    def plain(v):
        if dataclasses.is_dataclass(v):
            return {f.name: plain(getattr(v, f.name)) for f in dataclasses.fields(v)
                    if getattr(v, f.name) is not None}
        if isinstance(v, (list, tuple)):
            return [plain(x) for x in v]
        return v

    return yaml.safe_dump(plain(cfg), sort_keys=False)
