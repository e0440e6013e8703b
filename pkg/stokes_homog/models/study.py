"""
Study configuration: validated with pydantic, loaded from JSON/YAML with dotted overrides
"""

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..core.errors import ConfigError
from .coefficient import FAMILIES


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Tolerances(_Section):
    solver: float = 1e-10
    compat: float = 1e-10
    noise_floor: float = 1e-9
    cell_mean: float = 1e-10
    cell_identity: float = 1e-8
    decomposition: float = 1e-1
    ellipticity: float = 1e-12
    div_identity: float = 2e-2
    oracle: float = 1e-6

    @field_validator("*")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0.0:
            raise ValueError("tolerances must be positive")
        return v


class Gates(_Section):
    l2_u_err: float = 0.9
    h1_v_err: float = 0.45
    l2_p_err: float = 0.45
    r2: float = 0.98


class MeshRule(_Section):
    """m(eps) = max(min_m, ceil(factor / eps))"""
    factor: float = 8.0
    min_m: int = 8

    @field_validator("factor")
    @classmethod
    def _resolves(cls, v: float) -> float:
        if v < 8.0:
            raise ValueError("mesh_rule.factor must be >= 8 so that h <= eps/8")
        return v

    def m_for(self, eps: float) -> int:
        return max(self.min_m, int(math.ceil(self.factor / eps - 1e-9)))


class DataSpec(_Section):
    kind: Literal["default", "manufactured", "bump"] = "default"
    u: List[str] = Field(default_factory=lambda: ["sin(pi*x2)", "sin(pi*x1)"])
    p: str = "cos(pi*x1)"
    center: List[float] = Field(default_factory=lambda: [0.5, 0.5])
    width: float = 0.2


class SolveSpec(_Section):
    eps: float = 0.125
    m: Optional[int] = None
    adjoint: bool = False


class MmsSpec(_Section):
    m_list: List[int] = Field(default_factory=lambda: [16, 32, 64])
    u: List[str] = Field(default_factory=lambda: ["sin(pi*x2)", "sin(pi*x1)"])
    p: str = "cos(pi*x1)"


class StudyConfig(_Section):
    """Everything a cell, solve or rate run needs"""
    family: str = "trig"
    params: List[float] = Field(default_factory=lambda: [0.5, 0.4])
    eps_list: List[float] = Field(default_factory=lambda: [0.25, 0.125, 0.0625, 0.03125])
    mesh_rule: MeshRule = Field(default_factory=MeshRule)
    cell_n: int = 64
    data_spec: DataSpec = Field(default_factory=DataSpec)
    seed: int = 0
    tolerances: Tolerances = Field(default_factory=Tolerances)
    gates: Gates = Field(default_factory=Gates)
    workers: int = Field(default=1, ge=1)
    flux_field: Optional[List[List[str]]] = Field(
        default_factory=lambda: [["1 + x1*x2", "x2"], ["sin(pi*x1)", "cos(pi*x2)"]]
    )
    solve: SolveSpec = Field(default_factory=SolveSpec)
    mms: MmsSpec = Field(default_factory=MmsSpec)
    dump_fields: bool = False

    @field_validator("family")
    @classmethod
    def _known_family(cls, v: str) -> str:
        if v not in FAMILIES:
            raise ValueError(f"unknown family '{v}', expected one of {list(FAMILIES)}")
        return v

    @field_validator("eps_list")
    @classmethod
    def _decreasing(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("eps_list must not be empty")
        if any(e <= 0.0 or e > 0.5 for e in v):
            raise ValueError("every eps must lie in (0, 1/2]")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("eps_list must be strictly decreasing")
        return v

    @field_validator("cell_n")
    @classmethod
    def _even(cls, v: int) -> int:
        if v < 4 or v % 2:
            raise ValueError("cell_n must be even and >= 4")
        return v

    @model_validator(mode="after")
    def _resolution(self) -> "StudyConfig":
        for eps in self.eps_list:
            if self.mesh_rule.m_for(eps) * eps < 8.0 - 1e-9:
                raise ValueError(f"mesh_rule does not resolve eps={eps}")
        return self

    @property
    def m_list(self) -> List[int]:
        return [self.mesh_rule.m_for(e) for e in self.eps_list]

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------- #
# Loading
# ---------------------------------------------------------------------- #
def _set_dotted(data: Dict[str, Any], path: str, value: Any):
    keys = path.split(".")
    node = data
    for k in keys[:-1]:
        child = node.get(k)
        if child is None:
            child = node[k] = {}
        if not isinstance(child, dict):
            raise ConfigError(f"cannot set '{path}': '{k}' is not a section", key=path)
        node = child
    node[keys[-1]] = value


def parse_override(text: str):
    """'a.b=value' -> ('a.b', parsed value)"""
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not key=value", key=text)
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override '{text}' has an empty key", key=text)
    return key, yaml.safe_load(raw)


def load_config(path: Optional[Path] = None, overrides: Sequence[str] = (),
                workers: Optional[int] = None) -> StudyConfig:
    """Read a JSON (or YAML) document, apply overrides, validate"""
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}", key="config")
        except yaml.YAMLError as e:
            raise ConfigError(f"config {path} is not valid JSON/YAML: {e}", key="config")
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object", key="config")
    for text in overrides:
        key, value = parse_override(text)
        _set_dotted(data, key, value)
    if workers is not None:
        data["workers"] = workers
    return validate_config(data)


def validate_config(data: Dict[str, Any]) -> StudyConfig:
    try:
        return StudyConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(p) for p in first["loc"]) or None
        raise ConfigError(f"invalid config at '{key}': {first['msg']}", key=key)
