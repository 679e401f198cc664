"""TOML run configuration: parsing, overrides, validation and canonical echo.

Schema (every key optional; missing keys take the subcritical reference values)::

    [model]
    theta = 2.0
    kappa = 0.5
    mu = "1 - sqrt(e)"      # numbers or arithmetic expressions in e, pi, sqrt, exp, log
    sigma = 0.2
    rho = 0.5
    y0 = 1.0
    s0 = 100.0

    [jumps]
    intensity = 1.0
    law = "normal"          # normal | one-sided-exponential | two-sided-exponential | none
    mean = -0.05            # normal
    sd = 0.1                # normal
    rate = 10.0             # one-sided-exponential
    rate_plus = 10.0        # two-sided-exponential
    rate_minus = 10.0
    p_plus = 0.5

    [grid]
    T = 300.0
    dt = 0.01               # or n = 30000

    [campaign]
    M = 1000
    seed = 0
    index = 0               # trajectory used by simulate / estimate
    regime = "auto"         # auto | subcritical | critical
    scheme = "implicit"     # implicit | truncated | symmetrized
    i3 = "i3"               # i3 | i3-tilde
    i45 = "wiener"          # wiener | price
    route = "matrix"        # matrix | coordinatewise
    block_size = 64
    workers = 1
    reference_draws = 100000
    sweep_T = []            # e.g. [10, 100, 300]
    bins = 40

    [thresholds]
    normal = 0.10
    centered = 0.12
    mixed = 0.10
    hitting_time = 0.10
    covariance = 0.15

    [output]
    dir = "out"
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .estimator import Route
from .experiments import CampaignConfig, KsThresholds
from .model import (
    JumpSpec,
    ModelParams,
    NormalJumps,
    OneSidedExponentialJumps,
    Regime,
    TwoSidedExponentialJumps,
)
from .simulate import SchemeKind, SimGrid
from .statistics import I3Variant, I45Variant

Number = Union[int, float, str]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field or line."""


# --------------------------------------------------------------------------
# arithmetic expressions for numeric fields
# --------------------------------------------------------------------------

_CONSTANTS = {"e": math.e, "pi": math.pi}
_FUNCTIONS = {"sqrt": math.sqrt, "exp": math.exp, "log": math.log}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def eval_expression(text: str) -> float:
    """Evaluate a small arithmetic expression such as ``"1 - sqrt(e)"``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _CONSTANTS:
            return _CONSTANTS[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCTIONS and len(node.args) == 1 and not node.keywords):
            return _FUNCTIONS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported element {ast.dump(node)}")

    try:
        return float(ev(ast.parse(text, mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError) as exc:
        raise ValueError(f"cannot evaluate {text!r}: {exc}") from None


# --------------------------------------------------------------------------
# schema
# --------------------------------------------------------------------------

_JUMP_LAWS = ("normal", "one-sided-exponential", "two-sided-exponential", "none")

DEFAULTS: dict[str, dict[str, Any]] = {
    "model": {"theta": 2.0, "kappa": 0.5, "mu": "1 - sqrt(e)", "sigma": 0.2, "rho": 0.5,
              "y0": 1.0, "s0": 100.0},
    "jumps": {"intensity": 1.0, "law": "normal", "mean": -0.05, "sd": 0.1, "rate": 10.0,
              "rate_plus": 10.0, "rate_minus": 10.0, "p_plus": 0.5},
    "grid": {"T": 300.0, "dt": 0.01, "n": None},
    "campaign": {"M": 1000, "seed": 0, "index": 0, "regime": "auto", "scheme": "implicit",
                 "i3": "i3", "i45": "wiener", "route": "matrix", "block_size": 64, "workers": 1,
                 "reference_draws": 100_000, "sweep_T": [], "bins": 40},
    "thresholds": {"normal": 0.10, "centered": 0.12, "mixed": 0.10, "hitting_time": 0.10,
                   "covariance": 0.15},
    "output": {"dir": None},
}

PRESETS = {
    "subcritical": {},
    "critical": {"model": {"sigma": "sqrt(2)"}, "grid": {"T": 300.0, "n": 30000, "dt": None}},
}

_CHOICES = {
    ("jumps", "law"): _JUMP_LAWS,
    ("campaign", "regime"): ("auto", "subcritical", "critical"),
    ("campaign", "scheme"): tuple(k.value for k in SchemeKind),
    ("campaign", "i3"): tuple(k.value for k in I3Variant),
    ("campaign", "i45"): tuple(k.value for k in I45Variant),
    ("campaign", "route"): tuple(k.value for k in Route),
}
_INTEGERS = {("campaign", k) for k in ("M", "seed", "index", "block_size", "workers", "reference_draws", "bins")}
_INTEGERS.add(("grid", "n"))


@dataclass
class RunConfig:
    """Raw, validated key/value tables; numeric expressions kept as written."""

    tables: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULTS.items()})

    def get(self, section: str, key: str):
        return self.tables[section][key]

    def number(self, section: str, key: str) -> float:
        value = self.tables[section][key]
        if isinstance(value, str):
            try:
                return eval_expression(value)
            except ValueError as exc:
                raise ConfigError(f"[{section}].{key}: {exc}") from None
        return float(value)

    # typed views ----------------------------------------------------------

    def jump_spec(self) -> JumpSpec:
        law = self.get("jumps", "law")
        num = lambda k: self.number("jumps", k)  # noqa: E731
        if law == "none":
            size_law = None
        elif law == "normal":
            size_law = NormalJumps(num("mean"), num("sd"))
        elif law == "one-sided-exponential":
            size_law = OneSidedExponentialJumps(num("rate"))
        else:
            size_law = TwoSidedExponentialJumps(num("rate_plus"), num("rate_minus"), num("p_plus"))
        return JumpSpec(num("intensity"), size_law)

    def model_params(self) -> ModelParams:
        m = {k: self.number("model", k) for k in DEFAULTS["model"]}
        return ModelParams(jump=self.jump_spec(), **m)

    def sim_grid(self) -> SimGrid:
        T = self.number("grid", "T")
        n = self.get("grid", "n")
        if n is not None:
            return SimGrid(T, int(n))
        return SimGrid.from_step(T, self.number("grid", "dt"))

    def regime(self) -> Optional[Regime]:
        r = self.get("campaign", "regime")
        return None if r == "auto" else Regime(r)

    def scheme(self) -> SchemeKind:
        return SchemeKind(self.get("campaign", "scheme"))

    def sweep(self) -> list[float]:
        return [float(t) for t in self.get("campaign", "sweep_T")]

    def campaign(self) -> CampaignConfig:
        c = self.tables["campaign"]
        th = KsThresholds(**{k: self.number("thresholds", k) for k in DEFAULTS["thresholds"]})
        return CampaignConfig(
            params=self.model_params(), grid=self.sim_grid(), M=c["M"], master_seed=c["seed"],
            regime=self.regime(), scheme=self.scheme(), i3_variant=I3Variant(c["i3"]),
            i45_variant=I45Variant(c["i45"]), route=Route(c["route"]), block_size=c["block_size"],
            workers=c["workers"], reference_draws=c["reference_draws"], thresholds=th,
        )


def _check_value(section: str, key: str, value):
    where = f"[{section}].{key}"
    if (section, key) in _CHOICES:
        if value not in _CHOICES[section, key]:
            raise ConfigError(f"{where}: expected one of {', '.join(_CHOICES[section, key])}, got {value!r}")
        return value
    if (section, key) in _INTEGERS:
        if value is None and (section, key) == ("grid", "n"):
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if key == "sweep_T":
        if not isinstance(value, list) or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in value):
            raise ConfigError(f"{where}: expected a list of numbers, got {value!r}")
        return value
    if key == "dir":
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if value is None and (section, key) == ("grid", "dt"):
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{where}: expected a number or expression, got {value!r}")
    if isinstance(value, str):
        try:
            eval_expression(value)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return value


def merge(cfg: RunConfig, updates: dict) -> RunConfig:
    """Apply a nested ``{section: {key: value}}`` update with schema checks."""
    for section, table in updates.items():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in table.items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"[{section}].{key}: unknown key")
            cfg.tables[section][key] = _check_value(section, key, value)
        if section == "grid" and "n" in table and "dt" not in table:
            cfg.tables["grid"]["dt"] = None
        if section == "grid" and "dt" in table and "n" not in table:
            cfg.tables["grid"]["n"] = None
    return cfg


def load(path: Optional[Union[str, Path]] = None, preset: str = "subcritical") -> RunConfig:
    """Defaults, then ``preset``, then the TOML file at ``path``."""
    cfg = merge(RunConfig(), PRESETS[preset])
    if path is None:
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return merge(cfg, data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def validate(cfg: RunConfig) -> None:
    """Build the typed objects once so bad values surface with their field name."""
    for section in ("model", "jumps", "thresholds"):
        for key in DEFAULTS[section]:
            if not (section == "jumps" and key == "law"):
                cfg.number(section, key)
    if cfg.get("grid", "n") is None and cfg.get("grid", "dt") is None:
        raise ConfigError("[grid]: give either dt or n")
    try:
        cfg.model_params()
        cfg.sim_grid()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------
# canonical echo
# --------------------------------------------------------------------------


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialise {v!r}")


def dumps(cfg: RunConfig) -> str:
    """Canonical TOML text; unset keys and the output location are omitted."""
    lines = []
    for section in DEFAULTS:
        if section == "output":
            continue
        lines.append(f"[{section}]")
        for key in DEFAULTS[section]:
            value = cfg.tables[section][key]
            if value is not None:
                lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)
