"""TOML configuration files and ``key=value`` overrides.

Layout (all tables and keys optional, unknown keys rejected)::

    scenario = "lawnmower4"      # or "helix6"
    duration = 500.0
    seed = 0

    [mac]        scheme, loss_prob, prop_delay, overhead
    [mpc]        hp, Ts, Nips, v_target, w_track, w_smooth, w_consensus,
                 rho, alpha, accel_max
    [quant]      mode ("fixed" | "double" | "off"), i_bits, w_fi, w1_bits, m_lsb
    [imputation] method ("velocity" | "jerk" | "none"), samples_per_interval
    [vehicle]    dt, kp, kd, dist_std, dist_max, dist_tau
    [metrics]    window_len, transient
    [scenario_options] init_spread, octahedron_edge
"""

from __future__ import annotations

import copy
import sys
from dataclasses import fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .codec import QuantScheme
from .dmpc import MpcParams, VehicleModel
from .errors import ConfigError
from .imputation import ExtrapolationMethod
from .mac import MacConfig
from .simulation import SimConfig, scenario_geometry

__all__ = ["load_config", "parse_config", "apply_overrides", "build_config", "DEFAULTS"]

DEFAULTS: dict = {
    "scenario": "lawnmower4",
    "duration": 500.0,
    "seed": 0,
    "mac": {"scheme": "tdma", "loss_prob": 0.0, "prop_delay": 0.02, "overhead": 0.0},
    "mpc": {f.name: f.default for f in fields(MpcParams)},
    "quant": {"mode": "fixed", "i_bits": 3, "w_fi": 10, "w1_bits": 32, "m_lsb": 0.05},
    "imputation": {"method": "velocity", "samples_per_interval": 2},
    "vehicle": {f.name: f.default for f in fields(VehicleModel)},
    "metrics": {"window_len": 10.0, "transient": 100.0},
    "scenario_options": {"init_spread": 2.0, "octahedron_edge": 10.0},
}


def _check_keys(raw: dict, ref: dict, prefix: str = "") -> None:
    for key, val in raw.items():
        path = f"{prefix}{key}"
        if key not in ref:
            raise ConfigError(f"unknown key '{path}'")
        if isinstance(ref[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{path}' must be a table")
            _check_keys(val, ref[key], path + ".")
        elif isinstance(val, dict):
            raise ConfigError(f"'{path}' must be a value, not a table")


def _merge(base: dict, raw: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in raw.items():
        if isinstance(val, dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse TOML text into a full settings tree (defaults filled in)."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    _check_keys(raw, DEFAULTS)
    return _merge(DEFAULTS, raw)


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, str(path))


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(tree: dict, overrides) -> dict:
    """Apply ``dotted.key=value`` strings; values are read as TOML literals."""
    out = copy.deepcopy(tree)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node, ref = out, DEFAULTS
        for p in parts[:-1]:
            if p not in ref or not isinstance(ref[p], dict):
                raise ConfigError(f"unknown key '{key}'")
            node, ref = node[p], ref[p]
        leaf = parts[-1]
        if leaf not in ref or isinstance(ref[leaf], dict):
            raise ConfigError(f"unknown key '{key}'")
        node[leaf] = _parse_value(value.strip())
    return out


def _typed(section: str, values: dict, types: dict) -> dict:
    out = {}
    for key, val in values.items():
        want = types.get(key)
        try:
            if want is int:
                if isinstance(val, bool) or (isinstance(val, float) and not val.is_integer()):
                    raise ValueError
                out[key] = int(val)
            elif want is float:
                if isinstance(val, bool):
                    raise ValueError
                out[key] = float(val)
            else:
                out[key] = val
        except (TypeError, ValueError):
            raise ConfigError(f"'{section}.{key}' expects {want.__name__}, got {val!r}") from None
    return out


def _types_of(section: dict) -> dict:
    return {k: type(v) for k, v in section.items()}


def build_config(tree: dict) -> SimConfig:
    """Validate a settings tree and assemble the :class:`SimConfig`."""
    try:
        top = _typed("", {k: tree[k] for k in ("duration", "seed")}, {"duration": float, "seed": int})
        mpc = MpcParams(**_typed("mpc", tree["mpc"], _types_of(DEFAULTS["mpc"])))
        scen = _typed("scenario_options", tree["scenario_options"], _types_of(DEFAULTS["scenario_options"]))
        _, form = scenario_geometry(tree["scenario"], scen["octahedron_edge"])
        macv = _typed("mac", tree["mac"], _types_of(DEFAULTS["mac"]))
        mac = MacConfig(
            scheme=str(macv["scheme"]).lower(),
            V=form.V,
            Ts=mpc.Ts,
            Nips=mpc.Nips,
            loss_prob=macv["loss_prob"],
            prop_delay=macv["prop_delay"],
            overhead=macv["overhead"],
            rng_seed=top["seed"],
        )
        q = _typed("quant", tree["quant"], _types_of(DEFAULTS["quant"]))
        mode = str(q["mode"]).lower()
        if mode == "fixed":
            quant = QuantScheme.from_width(q["w_fi"], q["i_bits"], w1_bits=q["w1_bits"], m_lsb=q["m_lsb"])
        elif mode == "double":
            quant = QuantScheme.double_precision()
        elif mode == "off":
            quant = None
        else:
            raise ConfigError(f"'quant.mode' must be fixed, double or off, got {q['mode']!r}")
        imp = _typed("imputation", tree["imputation"], _types_of(DEFAULTS["imputation"]))
        method = str(imp["method"]).lower()
        imputation = None if method == "none" else ExtrapolationMethod(method, imp["samples_per_interval"])
        vehicle = VehicleModel(**_typed("vehicle", tree["vehicle"], _types_of(DEFAULTS["vehicle"])))
        met = _typed("metrics", tree["metrics"], _types_of(DEFAULTS["metrics"]))
        return SimConfig(
            scenario=tree["scenario"],
            mac=mac,
            mpc=mpc,
            quant=quant,
            imputation=imputation,
            vehicle=vehicle,
            duration=top["duration"],
            seed=top["seed"],
            window_len=met["window_len"],
            transient=met["transient"],
            init_spread=scen["init_spread"],
            octahedron_edge=scen["octahedron_edge"],
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
