"""Run configuration: INI schema, validation, echo, and digest.

One flat INI file drives a run. Unknown sections or keys are hard errors so
a typo in a tolerance key cannot silently weaken an estimate audit. Every
value has a default except the scenario name; load_config echoes the fully
resolved configuration so each run directory is self-describing.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field

from .pressure import EllipticConfig


class ConfigError(ValueError):
    """Configuration file rejected; message carries path and key context."""


_TWO_PI = 2.0 * math.pi

# Section -> key -> (parser, default). A default of _REQUIRED marks a key the
# file must provide.
_REQUIRED = object()


def _parse_float(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise ValueError("nan is not a valid value")
    return v


def _parse_pos_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise ValueError("must be a positive integer")
    return v


def _parse_nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise ValueError("must be a nonnegative integer")
    return v


_SCHEMA = {
    "grid": {
        "n": (_parse_pos_int, 128),
        "length": (_parse_float, _TWO_PI),
    },
    "time": {
        "t_end": (_parse_float, 1.0),
        "courant": (_parse_float, 0.4),
        "dt_max": (_parse_float, 0.01),
    },
    "physics": {
        "rho_star": (_parse_float, 0.5),
        "rho_star_upper": (_parse_float, 2.5),
    },
    "family": {
        "epsilon": (_parse_float, 0.5),
    },
    "elliptic": {
        "tol": (_parse_float, 1e-10),
        "max_iter": (_parse_pos_int, 500),
        "method": (str.strip, "pcg"),
        "delta": (_parse_float, 1.01),
    },
    "diagnostics": {
        "p": (_parse_float, math.inf),
        "q": (_parse_float, 2.0),
        "interior_margin_cells": (_parse_float, 3.0),
    },
    "scenario": {
        "name": (str.strip, _REQUIRED),
    },
    "output": {
        "record_stride": (_parse_pos_int, 5),
        "snapshot_stride": (_parse_nonneg_int, 0),
        "seed": (_parse_nonneg_int, 0),
    },
}

# Extra keys admitted in [scenario], by scenario name.
_SCENARIO_KEYS = {
    "taylor_green": {
        "amp": (_parse_float, 0.2),
        "marker_radius": (_parse_float, 0.5),
        "marker_count": (_parse_pos_int, 64),
    },
    "vortex_patch": {
        "center_x": (_parse_float, 3.2),
        "center_y": (_parse_float, 3.1),
        "semi_axis_x": (_parse_float, 1.3),
        "semi_axis_y": (_parse_float, 0.9),
        "width_cells": (_parse_float, 4.0),
        "rho_inside": (_parse_float, 2.0),
        "rho_outside": (_parse_float, 1.0),
        "amp": (_parse_float, 1.0),
        "marker_count": (_parse_pos_int, 256),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run parameters (defaults already applied)."""

    n: int = 128
    length: float = _TWO_PI
    t_end: float = 1.0
    courant: float = 0.4
    dt_max: float = 0.01
    rho_star: float = 0.5
    rho_star_upper: float = 2.5
    epsilon: float = 0.5
    elliptic: EllipticConfig = EllipticConfig()
    p: float = math.inf
    q: float = 2.0
    interior_margin_cells: float = 3.0
    scenario_name: str = "taylor_green"
    scenario_params: dict = field(default_factory=dict)
    record_stride: int = 5
    snapshot_stride: int = 0
    seed: int = 0

    def __post_init__(self):
        _validate(self)


def _fail(context: str, message: str):
    raise ConfigError(f"{context}: {message}")


def _validate(cfg: RunConfig):
    ctx = "config"  # bare construction; load_config prefixes the file path
    if cfg.n < 16 or (cfg.n & (cfg.n - 1)) != 0:
        _fail(f"{ctx} [grid] n", f"must be a power of two >= 16, got {cfg.n}")
    if not cfg.length > 0:
        _fail(f"{ctx} [grid] length", f"must be positive, got {cfg.length}")
    if not cfg.t_end > 0:
        _fail(f"{ctx} [time] t_end", f"must be positive, got {cfg.t_end}")
    if not (0.0 < cfg.courant <= 1.0):
        _fail(f"{ctx} [time] courant", f"must lie in (0, 1], got {cfg.courant}")
    if not cfg.dt_max > 0:
        _fail(f"{ctx} [time] dt_max", f"must be positive, got {cfg.dt_max}")
    if not (0.0 < cfg.rho_star <= cfg.rho_star_upper):
        _fail(
            f"{ctx} [physics]",
            f"need 0 < rho_star <= rho_star_upper, got rho_star={cfg.rho_star} "
            f"and rho_star_upper={cfg.rho_star_upper}",
        )
    if not (0.0 < cfg.epsilon < 1.0):
        _fail(
            f"{ctx} [family] epsilon",
            f"must lie in the admissible open interval ]0,1[, got {cfg.epsilon}",
        )
    if not cfg.p > 2.0:
        _fail(f"{ctx} [diagnostics] p", f"must lie in (2, inf], got {cfg.p}")
    if not (2.0 <= cfg.q < math.inf):
        _fail(f"{ctx} [diagnostics] q", f"must lie in [2, inf), got {cfg.q}")
    inv_p = 0.0 if math.isinf(cfg.p) else 1.0 / cfg.p
    if inv_p + 1.0 / cfg.q < 0.5:
        _fail(
            f"{ctx} [diagnostics]",
            f"indices p={cfg.p}, q={cfg.q} violate 1/p + 1/q >= 1/2",
        )
    if not cfg.interior_margin_cells > 0:
        _fail(f"{ctx} [diagnostics] interior_margin_cells", "must be positive")
    if cfg.scenario_name not in _SCENARIO_KEYS:
        _fail(
            f"{ctx} [scenario] name",
            f"unknown scenario {cfg.scenario_name!r}; "
            f"choose from {sorted(_SCENARIO_KEYS)}",
        )
    # EllipticConfig validates tol/max_iter/method/delta on construction.


def load_config(path) -> RunConfig:
    """Parse, validate, and resolve an INI run configuration file."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    return _resolve(parser, str(path))


def parse_config_text(text: str) -> RunConfig:
    """load_config for an in-memory string (tests and programmatic use)."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source="<config>")
    except configparser.Error as exc:
        raise ConfigError(f"<config>: parse error: {exc}") from exc
    return _resolve(parser, "<config>")


def _resolve(parser: configparser.ConfigParser, path: str) -> RunConfig:
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"{path}: unknown section [{section}]; "
                f"known sections: {sorted(_SCHEMA)}"
            )

    raw: dict[str, dict[str, str]] = {
        s: dict(parser.items(s)) for s in parser.sections()
    }
    name = raw.get("scenario", {}).get("name")
    if name is None:
        raise ConfigError(f"{path}: [scenario] name is required")
    name = name.strip()
    if name not in _SCENARIO_KEYS:
        raise ConfigError(
            f"{path}: [scenario] name: unknown scenario {name!r}; "
            f"choose from {sorted(_SCENARIO_KEYS)}"
        )

    values: dict[str, dict] = {}
    for section, keys in _SCHEMA.items():
        allowed = dict(keys)
        if section == "scenario":
            allowed.update(_SCENARIO_KEYS[name])
        got = raw.get(section, {})
        for key in got:
            if key not in allowed:
                raise ConfigError(
                    f"{path}: unknown key {key!r} in [{section}]; "
                    f"allowed: {sorted(allowed)}"
                )
        out = {}
        for key, (parse, default) in allowed.items():
            if key in got:
                try:
                    out[key] = parse(got[key])
                except ValueError as exc:
                    raise ConfigError(
                        f"{path}: [{section}] {key} = {got[key]!r}: {exc}"
                    ) from exc
            elif default is _REQUIRED:
                raise ConfigError(f"{path}: [{section}] {key} is required")
            else:
                out[key] = default
        values[section] = out

    scen = values["scenario"]
    params = {k: v for k, v in scen.items() if k != "name"}
    try:
        elliptic = EllipticConfig(
            tol=values["elliptic"]["tol"],
            max_iter=values["elliptic"]["max_iter"],
            method=values["elliptic"]["method"],
            delta=values["elliptic"]["delta"],
        )
        return RunConfig(
            n=values["grid"]["n"],
            length=values["grid"]["length"],
            t_end=values["time"]["t_end"],
            courant=values["time"]["courant"],
            dt_max=values["time"]["dt_max"],
            rho_star=values["physics"]["rho_star"],
            rho_star_upper=values["physics"]["rho_star_upper"],
            epsilon=values["family"]["epsilon"],
            elliptic=elliptic,
            p=values["diagnostics"]["p"],
            q=values["diagnostics"]["q"],
            interior_margin_cells=values["diagnostics"]["interior_margin_cells"],
            scenario_name=scen["name"],
            scenario_params=params,
            record_stride=values["output"]["record_stride"],
            snapshot_stride=values["output"]["snapshot_stride"],
            seed=values["output"]["seed"],
        )
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_ini(cfg: RunConfig) -> str:
    """Serialize the fully resolved configuration deterministically."""
    lines = []
    sections = {
        "grid": {"n": cfg.n, "length": cfg.length},
        "time": {"t_end": cfg.t_end, "courant": cfg.courant, "dt_max": cfg.dt_max},
        "physics": {"rho_star": cfg.rho_star, "rho_star_upper": cfg.rho_star_upper},
        "family": {"epsilon": cfg.epsilon},
        "elliptic": {
            "tol": cfg.elliptic.tol,
            "max_iter": cfg.elliptic.max_iter,
            "method": cfg.elliptic.method,
            "delta": cfg.elliptic.delta,
        },
        "diagnostics": {
            "p": cfg.p,
            "q": cfg.q,
            "interior_margin_cells": cfg.interior_margin_cells,
        },
        "scenario": {"name": cfg.scenario_name, **dict(sorted(cfg.scenario_params.items()))},
        "output": {
            "record_stride": cfg.record_stride,
            "snapshot_stride": cfg.snapshot_stride,
            "seed": cfg.seed,
        },
    }
    for section, kv in sections.items():
        lines.append(f"[{section}]")
        for key, val in kv.items():
            lines.append(f"{key} = {_fmt(val)}")
        lines.append("")
    return "\n".join(lines)


def config_digest(cfg: RunConfig) -> str:
    """Stable hexadecimal digest of the resolved configuration."""
    return hashlib.sha256(to_ini(cfg).encode("utf-8")).hexdigest()
