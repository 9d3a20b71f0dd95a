"""
Experiment configuration
INI files with one section per concern and one [algorithm.<name>] section
per run, validated into pydantic models
"""
import configparser
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config import Config


class ConfigError(ValueError):
    pass


SECTIONS = ("experiment", "graph", "problem", "sweep")


class GraphSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: Literal["barabasi_albert", "file"] = "barabasi_albert"
    nodes: int = Field(default=200, ge=2)
    attach: int = Field(default=2, ge=1)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _check_source(self):
        if self.source == "file" and not self.path:
            raise ValueError("graph source 'file' needs a path")
        if self.source == "barabasi_albert" and self.attach >= self.nodes:
            raise ValueError("attach must be smaller than nodes")
        return self


class ProblemSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Literal["flow_quadratic", "flow_delay", "mpc"] = "flow_quadratic"
    commodities: int = Field(default=20, ge=0)
    pattern: Literal["star", "generic", "nonconnected"] = "star"
    reach: int = Field(default=3, ge=0)
    stability: Literal["unstable", "stable"] = "stable"
    state_dim: int = Field(default=3, ge=1)
    input_dim: int = Field(default=1, ge=1)
    horizon: int = Field(default=5, ge=1)

    @property
    def is_flow(self) -> bool:
        return self.family.startswith("flow")

    @property
    def preset_key(self) -> str:
        """Key into Config.RHO_PRESETS for this problem"""
        if self.is_flow:
            return self.family
        if self.pattern == "nonconnected":
            return "mpc_nonconnected"
        return f"mpc_star_{self.stability}"


class AlgorithmSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    kind: Literal["alg1", "alg2", "alg3", "consensus", "nesterov"]
    rho: Optional[float] = Field(default=None, gt=0)
    lipschitz: Optional[float] = Field(default=None, gt=0)
    global_variable: bool = False
    augment: bool = False


class SweepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grid: Dict[str, List[float]] = Field(default_factory=dict)
    target: float = Field(default=1e-4, gt=0)


class ExperimentConfig(BaseModel):
    """One experiment: a network, a problem family and the algorithms to compare"""

    model_config = ConfigDict(extra="forbid")

    name: str
    seed: int = Field(ge=0)
    tolerance: float = Field(default=Config.DEFAULT_TOLERANCE, ge=0)
    max_cs: int = Field(default=Config.DEFAULT_MAX_CS, ge=1)
    target_error: Optional[float] = Field(default=None, gt=0)
    reference: Literal["centralized", "none"] = "centralized"
    graph: GraphSpec = Field(default_factory=GraphSpec)
    problem: ProblemSpec = Field(default_factory=ProblemSpec)
    algorithms: List[AlgorithmSpec] = Field(default_factory=list)
    sweep: Optional[SweepSpec] = None

    @model_validator(mode="after")
    def _check_algorithms(self):
        if not self.algorithms:
            raise ValueError("at least one [algorithm.<name>] section is required")
        names = [a.name for a in self.algorithms]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate algorithm names in {names}")
        presets = Config.RHO_PRESETS.get(self.problem.preset_key, {})
        stars = self.problem.is_flow or self.problem.pattern == "star"
        for spec in self.algorithms:
            if spec.kind in ("consensus", "nesterov"):
                if not stars:
                    raise ValueError(f"{spec.name}: {spec.kind} needs star-shaped components (flow or star MPC)")
                if spec.global_variable or spec.augment:
                    raise ValueError(f"{spec.name}: {spec.kind} runs on the original components only")
            if spec.kind == "nesterov":
                if spec.lipschitz is None and self.problem.family == "flow_delay":
                    spec.lipschitz = Config.DELAY_LIPSCHITZ
            elif spec.rho is None:
                if spec.kind not in presets:
                    raise ValueError(f"{spec.name}: rho is required (no preset for {self.problem.preset_key})")
                spec.rho = presets[spec.kind]
        if self.sweep is not None:
            unknown = set(self.sweep.grid) - set(names)
            if unknown:
                raise ValueError(f"sweep grid names unknown algorithms {sorted(unknown)}")
        return self

    def algorithm(self, name: str) -> AlgorithmSpec:
        for spec in self.algorithms:
            if spec.name == name:
                return spec
        raise ConfigError(f"no algorithm named {name!r}")


def _as_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _grid(value: str) -> List[float]:
    try:
        return [float(v) for v in value.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"not a list of numbers: {value!r}")


def parse_experiment(text: str, source: str = "<string>") -> ExperimentConfig:
    """
    Parse an experiment from INI text

    Sections: [experiment], [graph], [problem], [algorithm.<name>] (one per
    algorithm) and an optional [sweep] mapping algorithm names to value
    lists plus `target`.

    Raises:
        ConfigError on syntax errors, unknown keys' bad values or failed validation
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}")

    if not parser.has_section("experiment"):
        raise ConfigError(f"{source}: missing [experiment] section")
    unknown = [s for s in parser.sections() if s not in SECTIONS and not s.startswith("algorithm.")]
    if unknown:
        raise ConfigError(f"{source}: unknown sections {unknown}")
    raw = dict(parser["experiment"])
    raw["graph"] = dict(parser["graph"]) if parser.has_section("graph") else {}
    raw["problem"] = dict(parser["problem"]) if parser.has_section("problem") else {}

    algorithms = []
    for section in parser.sections():
        if not section.startswith("algorithm."):
            continue
        entry = dict(parser[section])
        entry["name"] = section[len("algorithm."):]
        for flag in ("global_variable", "augment"):
            if flag in entry:
                entry[flag] = _as_bool(entry[flag])
        algorithms.append(entry)
    raw["algorithms"] = algorithms

    if parser.has_section("sweep"):
        entries = dict(parser["sweep"])
        sweep = {"grid": {k: _grid(v) for k, v in entries.items() if k != "target"}}
        if "target" in entries:
            sweep["target"] = entries["target"]
        raw["sweep"] = sweep

    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{source}: {e}")


def load_experiment(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    return parse_experiment(text, source=str(path))
