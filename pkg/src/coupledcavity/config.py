"""Run configuration: a YAML file with geometry, grid, solve and output blocks.

Example::

    geometry: {R: 1.0, r: 0.2, l: 0.5, a: 1.0e-3, lambda: 5.0e-7}
    grid: {n: 2048, half_width: null, align_edges: true, apodization: false}
    solve: {operator_kind: coupled, n_modes: 10, parity: 1, q_range: null, refine: false}
    output: {directory: out, formats: [csv, json, png]}

Geometry lengths are metres.  ``half_width`` is in units of the mirror
half-width ``a``; ``null`` selects ``max(3, 1.5 M)``.  With ``align_edges``
the window is widened slightly so that the aperture edge falls on a cell
boundary.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import yaml

from .errors import DomainError
from .geometry import CavityGeometry
from .operators import OPERATOR_KINDS

FORMATS = ("csv", "json", "png", "pgm")


class ConfigError(DomainError):
    pass


@dataclass(frozen=True)
class GeometryConfig:
    R: float
    r: float
    l: float
    a: float
    lambda_: float

    def build(self) -> CavityGeometry:
        return CavityGeometry(self.R, self.r, self.l, self.a, self.lambda_)


@dataclass(frozen=True)
class GridConfig:
    n: int = 2048
    half_width: float | None = None
    align_edges: bool = True
    apodization: bool = False


@dataclass(frozen=True)
class SolveConfig:
    operator_kind: str = "coupled"
    n_modes: int = 10
    parity: int = 1
    q_range: tuple | None = None
    refine: bool = False


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv", "json", "png")


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig
    grid: GridConfig = field(default_factory=GridConfig)
    solve: SolveConfig = field(default_factory=SolveConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        for name in ("R", "r", "l", "a", "lambda_"):
            if not getattr(self.geometry, name) > 0:
                raise ConfigError(f"geometry.{name.rstrip('_')} must be positive")
        if self.solve.operator_kind not in OPERATOR_KINDS:
            raise ConfigError(
                f"solve.operator_kind must be one of {OPERATOR_KINDS}, got {self.solve.operator_kind!r}"
            )
        if self.solve.parity not in (1, -1):
            raise ConfigError(f"solve.parity must be 1 or -1, got {self.solve.parity!r}")
        if self.solve.n_modes < 1:
            raise ConfigError("solve.n_modes must be at least 1")
        bad = set(self.output.formats) - set(FORMATS)
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}; allowed {FORMATS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["geometry"]["lambda"] = d["geometry"].pop("lambda_")
        q = d["solve"]["q_range"]
        d["solve"]["q_range"] = list(q) if q is not None else None
        d["output"]["formats"] = list(d["output"]["formats"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        try:
            g = dict(d["geometry"])
        except (KeyError, TypeError) as exc:
            raise ConfigError("config needs a 'geometry' block") from exc
        try:
            geometry = GeometryConfig(
                R=float(g["R"]), r=float(g["r"]), l=float(g["l"]),
                a=float(g["a"]), lambda_=float(g["lambda"]),
            )
            gr = d.get("grid") or {}
            hw = gr.get("half_width")
            grid = GridConfig(
                n=int(gr.get("n", 2048)),
                half_width=None if hw is None else float(hw),
                align_edges=bool(gr.get("align_edges", True)),
                apodization=bool(gr.get("apodization", False)),
            )
            s = d.get("solve") or {}
            q = s.get("q_range")
            solve = SolveConfig(
                operator_kind=str(s.get("operator_kind", "coupled")),
                n_modes=int(s.get("n_modes", 10)),
                parity=int(s.get("parity", 1)),
                q_range=None if q is None else (int(q[0]), int(q[1])),
                refine=bool(s.get("refine", False)),
            )
            o = d.get("output") or {}
            output = OutputConfig(
                directory=str(o.get("directory", "out")),
                formats=tuple(o.get("formats", ("csv", "json", "png"))),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config value: {exc}") from exc
        return cls(geometry, grid, solve, output)


def loads(text: str) -> RunConfig:
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return RunConfig.from_dict(data)


def dumps(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def load(path) -> RunConfig:
    with open(path) as fh:
        return loads(fh.read())


def dump(cfg: RunConfig, path):
    with open(path, "w") as fh:
        fh.write(dumps(cfg))
