"""Run configuration: a flat, line-oriented key=value format with sections.

The format is diff-friendly and round-trips exactly: parsing the canonical
serialization reproduces the configuration bit for bit (floats are printed
with 17 significant digits).  Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field

from .chain import ChainParams
from .dynamics import required_half_width
from .errors import ConfigError
from .measures import (
    GLUE_NONE,
    GLUE_ORIGIN,
    HalfMeasureSpec,
    InitialMeasureSpec,
    gibbs_measure,
    white_measure,
)

_FLOAT_KEYS = {
    "chain": {"nu_minus", "nu_plus", "kappa_minus", "kappa_plus", "kappa_0"},
    "initial": {"temperature", "sigma_u", "sigma_v", "amplitude", "truncation_tol"},
    "grid": {"dt", "t_max", "dt_internal"},
    "run": {"tau_base"},
}
_INT_KEYS = {
    "grid": {"window_l", "n_theta", "x_obs"},
    "run": {"ensemble_n", "master_seed"},
    "initial": {"site"},
}
_STR_KEYS = {
    "initial": {"kind", "preset", "left_c0", "left_c1", "right_c0", "right_c1", "glue"},
    "run": {"mode", "solver", "tau_list", "output_dir"},
}
_BOOL_KEYS = {
    "initial": {"shared_driver"},
    "grid": {"midpoint"},
}
_SECTIONS = ("chain", "initial", "grid", "run")


def _known_keys(section: str) -> set:
    keys = set()
    for table in (_FLOAT_KEYS, _INT_KEYS, _STR_KEYS, _BOOL_KEYS):
        keys |= table.get(section, set())
    return keys


@dataclass(frozen=True)
class RunConfig:
    # chain
    nu_minus: float
    nu_plus: float
    kappa_minus: float = 0.0
    kappa_plus: float = 0.0
    kappa_0: float = 0.0
    # initial measure
    kind: str = "ma"                 # ma | point
    preset: str = "white"            # white | gibbs | custom (for kind=ma)
    temperature: float = 1.0
    sigma_u: float = 1.0
    sigma_v: float = 1.0
    truncation_tol: float = 1e-12
    left_c0: str = ""
    left_c1: str = ""
    right_c0: str = ""
    right_c1: str = ""
    shared_driver: bool = False
    glue: str = GLUE_ORIGIN
    site: int = 0                    # for kind=point
    amplitude: float = 1.0
    # grids
    window_l: int = 64
    dt: float = 0.1
    t_max: float = 10.0
    dt_internal: float = 1e-3
    n_theta: int = 2048
    x_obs: int = 4
    midpoint: bool = True
    # run
    mode: str = "perturbed"          # perturbed | unperturbed
    solver: str = "auto"             # auto | spectral | stepping
    ensemble_n: int = 4
    master_seed: int = 0
    tau_list: str = "5,10"
    tau_base: float = 10.0
    output_dir: str = "out"

    def params(self) -> ChainParams:
        return ChainParams(self.nu_minus, self.nu_plus, self.kappa_minus,
                           self.kappa_plus, self.kappa_0)

    def taus(self) -> tuple:
        try:
            return tuple(float(tok) for tok in self.tau_list.split(",") if tok.strip())
        except ValueError as exc:
            raise ConfigError(f"run.tau_list: {exc}") from None

    def measure(self) -> InitialMeasureSpec:
        if self.kind != "ma":
            raise ConfigError("measure() is only defined for kind=ma")
        if self.preset == "white":
            spec = white_measure(self.sigma_u, self.sigma_v)
        elif self.preset == "gibbs":
            spec = gibbs_measure(self.params(), self.temperature, self.truncation_tol)
        elif self.preset == "custom":
            left = HalfMeasureSpec(_parse_taps(self.left_c0, "initial.left_c0"),
                                   _parse_taps(self.left_c1, "initial.left_c1"),
                                   shared_driver=self.shared_driver)
            right = HalfMeasureSpec(_parse_taps(self.right_c0, "initial.right_c0"),
                                    _parse_taps(self.right_c1, "initial.right_c1"),
                                    shared_driver=self.shared_driver)
            return InitialMeasureSpec(left=left, right=right, glue=self.glue)
        else:
            raise ConfigError(f"initial.preset: unknown preset {self.preset!r}")
        if self.glue != GLUE_ORIGIN:
            spec = InitialMeasureSpec(left=spec.left, right=spec.right, glue=self.glue)
        return spec

    def validate(self) -> None:
        params = self.params()  # raises on bad constants
        if self.kind not in ("ma", "point"):
            raise ConfigError(f"initial.kind: unknown kind {self.kind!r}")
        if self.glue not in (GLUE_ORIGIN, GLUE_NONE):
            raise ConfigError(f"initial.glue: unknown rule {self.glue!r}")
        if self.mode not in ("perturbed", "unperturbed"):
            raise ConfigError(f"run.mode: unknown mode {self.mode!r}")
        if self.solver not in ("auto", "spectral", "stepping"):
            raise ConfigError(f"run.solver: unknown solver {self.solver!r}")
        if self.dt <= 0 or self.t_max < 0 or self.dt_internal <= 0:
            raise ConfigError("grid: dt, dt_internal must be positive and t_max >= 0")
        if self.ensemble_n < 1:
            raise ConfigError("run.ensemble_n must be >= 1")
        if not self.midpoint and min(self.kappa_minus, self.kappa_plus) == 0.0:
            # the dispersion vanishes at theta = 0; a grid containing that
            # point is a domain violation, not a parse problem
            raise ValueError("grid.midpoint=false is invalid with an unpinned half (kappa = 0)")
        taus = self.taus()
        horizon = self.t_max
        if taus:
            horizon = max(horizon, max(taus) + self.tau_base)
        need = required_half_width(self.x_obs, horizon, params)
        if self.window_l < need:
            raise ConfigError(
                f"grid.window_l={self.window_l} violates the signal-cone rule; need >= {need}"
            )


def _parse_taps(text: str, where: str) -> tuple:
    if not text.strip():
        return (0.0,)
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    values = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        known = _known_keys(section)
        for key, raw in cp.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {section}.{key}")
            try:
                if key in _FLOAT_KEYS.get(section, ()):
                    value = float(raw)
                    if not math.isfinite(value):
                        raise ValueError("not finite")
                elif key in _INT_KEYS.get(section, ()):
                    value = int(raw)
                elif key in _BOOL_KEYS.get(section, ()):
                    low = raw.strip().lower()
                    if low not in ("true", "false"):
                        raise ValueError("expected true or false")
                    value = low == "true"
                else:
                    value = raw.strip()
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: cannot parse {raw!r} ({exc})") from None
            values[key] = value
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    with open(path, "r") as fh:
        return parse_config(fh.read())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def canonical_text(cfg: RunConfig) -> str:
    """Stable serialization: fixed section/key order, full-precision floats."""
    order = {
        "chain": ("nu_minus", "nu_plus", "kappa_minus", "kappa_plus", "kappa_0"),
        "initial": ("kind", "preset", "temperature", "sigma_u", "sigma_v",
                    "truncation_tol", "left_c0", "left_c1", "right_c0", "right_c1",
                    "shared_driver", "glue", "site", "amplitude"),
        "grid": ("window_l", "dt", "t_max", "dt_internal", "n_theta", "x_obs", "midpoint"),
        "run": ("mode", "solver", "ensemble_n", "master_seed", "tau_list",
                "tau_base", "output_dir"),
    }
    out = io.StringIO()
    for section in _SECTIONS:
        out.write(f"[{section}]\n")
        for key in order[section]:
            out.write(f"{key} = {_fmt(getattr(cfg, key))}\n")
        out.write("\n")
    return out.getvalue()


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(canonical_text(cfg).encode()).hexdigest()
