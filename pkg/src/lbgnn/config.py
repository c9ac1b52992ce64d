"""Scenario files: a flat TOML schema, one table per concern.

::

    schema_version = 1
    [graph]       nodes, edges ("complete" or list of 1-based pairs)
    [gnn]         hidden_dims, hidden_activation, output_activation,
                  init_low, init_high, seed, rng
    [gains]       k1, k2, k3, gamma, theta_bar, eps_proj, eps1, lambda4, eps_bar
    [dynamics]    name, n
    [trajectory]  name
    [initial]     x0, y0
    [integrator]  dt, horizon
    [logging]     decimation
"""

from __future__ import annotations

import hashlib
import json
import sys

import numpy as np

from .controller import Gains
from .gnn import GnnConfig
from .graph import build_graph, complete_graph
from .sim import RNG_FAMILY, ScenarioConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1

_SCHEMA = {
    "graph": {"nodes", "edges"},
    "gnn": {"hidden_dims", "hidden_activation", "output_activation", "init_low", "init_high", "seed", "rng"},
    "gains": {"k1", "k2", "k3", "gamma", "theta_bar", "eps_proj", "eps1", "lambda4", "eps_bar"},
    "dynamics": {"name", "n"},
    "trajectory": {"name"},
    "initial": {"x0", "y0"},
    "integrator": {"dt", "horizon"},
    "logging": {"decimation"},
}
_REQUIRED = {"graph": {"nodes"}, "initial": {"x0", "y0"}}


class ConfigError(ValueError):
    pass


def parse_config(data: dict) -> ScenarioConfig:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    for key in data:
        if key != "schema_version" and key not in _SCHEMA:
            raise ConfigError(f"unknown section [{key}]")
    for section, allowed in _SCHEMA.items():
        extra = set(data.get(section, {})) - allowed
        if extra:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}")
    for section, needed in _REQUIRED.items():
        missing = needed - set(data.get(section, {}))
        if missing:
            raise ConfigError(f"missing key(s) in [{section}]: {', '.join(sorted(missing))}")

    gr, gn, ga = data["graph"], data.get("gnn", {}), data.get("gains", {})
    dyn, trj, ini = data.get("dynamics", {}), data.get("trajectory", {}), data["initial"]
    itg, lg = data.get("integrator", {}), data.get("logging", {})
    try:
        N = int(gr["nodes"])
        edges = gr.get("edges", "complete")
        graph = complete_graph(N) if edges == "complete" else build_graph(N, edges)
        n = int(dyn.get("n", 3))
        rng = gn.get("rng", RNG_FAMILY)
        if rng != RNG_FAMILY:
            raise ConfigError(f"rng must be {RNG_FAMILY!r}, got {rng!r}")
        hidden_act = gn.get("hidden_activation", "swish")
        gnn_cfg = GnnConfig(
            input_dim=n * (N + 1),
            hidden_dims=tuple(gn.get("hidden_dims", (8, 8))),
            output_dim=n,
            hidden_activation=hidden_act if isinstance(hidden_act, str) else tuple(hidden_act),
            output_activation=gn.get("output_activation", "tanh"),
        )
        gamma = ga.get("gamma", 2.0)
        gains = Gains(
            k1=float(ga.get("k1", 3.5)), k2=float(ga.get("k2", 12.0)), k3=float(ga.get("k3", 0.001)),
            gamma=float(gamma) if np.ndim(gamma) == 0 else np.asarray(gamma, float),
            theta_bar=float(ga.get("theta_bar", 10.0)), eps_proj=float(ga.get("eps_proj", 0.1)),
            eps1=float(ga.get("eps1", 0.1)), lambda4=float(ga.get("lambda4", 0.01)),
        )
        cfg = ScenarioConfig(
            graph=graph, gnn=gnn_cfg, gains=gains,
            x0=ini["x0"], y0=ini["y0"], n=n,
            dynamics=str(dyn.get("name", "paper")), trajectory=str(trj.get("name", "paper")),
            weight_low=float(gn.get("init_low", 0.0)), weight_high=float(gn.get("init_high", 0.3)),
            seed=int(gn.get("seed", 0)),
            dt=float(itg.get("dt", 0.005)), horizon=float(itg.get("horizon", 360.0)),
            log_every=int(lg.get("decimation", 10)),
            eps_bar=float(ga.get("eps_bar", 1.0)),
        )
        cfg.validate()
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)


def config_dict(cfg: ScenarioConfig) -> dict:
    g = cfg.graph
    gamma = cfg.gains.gamma
    return {
        "schema_version": SCHEMA_VERSION,
        "graph": {"nodes": g.node_count, "edges": [list(e) for e in g.edges]},
        "gnn": {
            "hidden_dims": list(cfg.gnn.hidden_dims),
            "hidden_activation": list(cfg.gnn.hidden_activations),
            "output_activation": cfg.gnn.output_activation,
            "init_low": cfg.weight_low, "init_high": cfg.weight_high,
            "seed": cfg.seed, "rng": RNG_FAMILY,
        },
        "gains": {
            "k1": cfg.gains.k1, "k2": cfg.gains.k2, "k3": cfg.gains.k3,
            "gamma": float(gamma) if np.ndim(gamma) == 0 else np.asarray(gamma).tolist(),
            "theta_bar": cfg.gains.theta_bar, "eps_proj": cfg.gains.eps_proj,
            "eps1": cfg.gains.eps1, "lambda4": cfg.gains.lambda4, "eps_bar": cfg.eps_bar,
        },
        "dynamics": {"name": cfg.dynamics, "n": cfg.n},
        "trajectory": {"name": cfg.trajectory},
        "initial": {"x0": cfg.x0.tolist(), "y0": cfg.y0.tolist()},
        "integrator": {"dt": cfg.dt, "horizon": cfg.horizon},
        "logging": {"decimation": cfg.log_every},
    }


def config_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(config_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def dump_config(cfg: ScenarioConfig) -> str:
    d = config_dict(cfg)
    out = [f"schema_version = {d.pop('schema_version')}"]
    for section, table in d.items():
        out.append(f"\n[{section}]")
        out.extend(f"{k} = {_toml_value(v)}" for k, v in table.items())
    return "\n".join(out) + "\n"
