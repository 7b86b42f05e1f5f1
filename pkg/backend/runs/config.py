"""Run configuration: a sectioned ``key = value`` file plus command-line overrides.

    [run]
    subcommand = foel
    format = csv

    [model]
    model = heisenberg
    spin = 1
    L = 5

Every key has a default below; unknown sections and keys are errors.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

from spinlab.errors import ConfigError

log = logging.getLogger(__name__)

SUBCOMMANDS = ("spectrum", "foel", "liebmattis", "ssep", "droplet", "lightcone", "cluster", "perturb")
FORMATS = ("csv", "json")
MODELS = ("heisenberg", "aklt", "xxz_open", "xxz_periodic", "custom")
PERTURBATIONS = ("zz", "field", "anisotropy")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class Option:
    kind: str  # str | int | float | bool | floats | ints
    default: Any = None
    choices: Optional[Tuple[str, ...]] = None
    help: str = ""


SCHEMA: Dict[str, Dict[str, Option]] = {
    "run": {
        "subcommand": Option("str", "", SUBCOMMANDS, "campaign to run"),
        "out": Option("str", "", help="data file; defaults to SPINLAB_OUTPUT_DIR/<subcommand>.<format>"),
        "format": Option("str", "csv", FORMATS, "data file format"),
        "threads": Option("int", None, help="worker pool width; defaults to SPINLAB_THREADS"),
        "record": Option("bool", True, help="store a RunRecord row"),
    },
    "solver": {
        "tol": Option("float", None, help="tolerance of the campaign's main assertion"),
        "dense_cutoff": Option("int", None, help="overrides SPINLAB_DENSE_CUTOFF"),
        "lanczos_tol": Option("float", None, help="overrides SPINLAB_LANCZOS_TOL"),
        "degeneracy_tol": Option("float", None, help="overrides SPINLAB_DEGENERACY_TOL"),
    },
    "model": {
        "model": Option("str", "heisenberg", MODELS),
        "graph": Option("str", "", help="graph file; a chain of length L when empty"),
        "L": Option("int", 5),
        "spin": Option("str", "1/2"),
        "J": Option("float", 1.0),
        "periodic": Option("bool", False),
        "Delta": Option("float", None),
        "q": Option("float", None),
    },
    "droplet": {
        "n": Option("int", 1, help="overturned spins"),
        "Lmin": Option("int", 4),
        "Lmax": Option("int", 16),
    },
    "dynamics": {
        "lam": Option("float", 1.0, help="decay parameter of the interaction norm"),
        "times": Option("floats", (0.0, 0.1, 0.5, 1.0, 2.0)),
        "site": Option("int", None, help="site carrying B; the middle of the chain by default"),
        "b_points": Option("int", 5),
    },
    "perturbation": {
        "perturbation": Option("str", "zz", PERTURBATIONS),
        "lambdas": Option("floats", (-0.1, -0.05, 0.0, 0.05, 0.1)),
        "Ls": Option("ints", (6,)),
    },
}

# key -> section; keys are unique across sections
SECTION_OF: Dict[str, str] = {key: section for section, opts in SCHEMA.items() for key in opts}


def option(key: str) -> Option:
    return SCHEMA[SECTION_OF[key]][key]


def convert(key: str, raw: Any, line: Optional[int] = None) -> Any:
    """Typed value of `raw` for `key`; strings are parsed, typed values are checked."""
    if key not in SECTION_OF:
        raise ConfigError("unknown key", line=line, key=key)
    opt = option(key)
    if raw is None:
        return None
    text = raw.strip() if isinstance(raw, str) else raw
    if isinstance(text, str) and text.lower() == "none" and opt.default is None:
        return None
    try:
        if opt.kind == "int":
            value = int(text)
        elif opt.kind == "float":
            value = float(text)
        elif opt.kind == "bool":
            if isinstance(text, bool):
                value = text
            elif str(text).lower() in _TRUE:
                value = True
            elif str(text).lower() in _FALSE:
                value = False
            else:
                raise ValueError(f"not a boolean: {text!r}")
        elif opt.kind in ("floats", "ints"):
            cast = float if opt.kind == "floats" else int
            items = text.split(",") if isinstance(text, str) else list(text)
            value = tuple(cast(v) for v in items if str(v).strip())
            if not value:
                raise ValueError("empty list")
        else:
            value = str(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {opt.kind}: {exc}", line=line, key=key) from exc
    if opt.choices and value not in opt.choices:
        raise ConfigError(f"expected one of {opt.choices}, got {value!r}", line=line, key=key)
    return value


@dataclass
class RunConfig:
    subcommand: str
    values: Dict[str, Any] = field(default_factory=dict)
    sources: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}", key="subcommand")
        for key in SECTION_OF:
            if key not in self.values:
                self.values[key] = option(key).default
                self.sources.setdefault(key, "default")
        self.values["subcommand"] = self.subcommand

    def __getitem__(self, key: str) -> Any:
        if key not in SECTION_OF:
            raise KeyError(key)
        return self.values[key]

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        values, sources = dict(self.values), dict(self.sources)
        for key, raw in overrides.items():
            if raw is None:
                continue
            values[key] = convert(key, raw)
            sources[key] = "flag"
        sub = values.get("subcommand") or self.subcommand
        return RunConfig(sub, values, sources)

    def echo(self) -> Dict[str, Dict[str, Any]]:
        """section -> key -> value, JSON-safe."""
        out: Dict[str, Dict[str, Any]] = {}
        for section, opts in SCHEMA.items():
            out[section] = {k: list(v) if isinstance(v, tuple) else v
                            for k, v in ((k, self.values[k]) for k in opts)}
        return out


def parse_config(text: str) -> Dict[str, Any]:
    """Parse a config file into typed values; nothing is defaulted here."""
    section: Optional[str] = None
    values: Dict[str, Any] = {}
    seen: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header", line=lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError("unknown section", line=lineno, key=section)
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if section is None:
            raise ConfigError("key outside any section", line=lineno, key=key)
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key in [{section}]", line=lineno, key=key)
        if key in seen:
            raise ConfigError(f"duplicate key (first on line {seen[key]})", line=lineno, key=key)
        seen[key] = lineno
        values[key] = convert(key, value, line=lineno)
    return values


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    return parse_config(text)


def build_config(subcommand: str, path: Optional[Union[str, Path]] = None,
                 overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """File keys over defaults, flags over file keys."""
    values: Dict[str, Any] = {}
    sources: Dict[str, str] = {}
    if path:
        values = load_config(path)
        sources = {k: f"file:{path}" for k in values}
        declared = values.get("subcommand")
        if declared and declared != subcommand:
            raise ConfigError(f"config is for {declared!r}, not {subcommand!r}", key="subcommand")
    cfg = RunConfig(subcommand, values, sources)
    cfg = cfg.with_overrides(overrides or {})
    log.debug("run config", extra={"subcommand": subcommand, "path": str(path or ""),
                                   "overrides": sorted(k for k, v in (overrides or {}).items() if v is not None)})
    return cfg


def flag_keys(sections: Sequence[str]) -> Tuple[str, ...]:
    return tuple(k for s in sections for k in SCHEMA[s])
