"""Scenario configuration: loading, overrides and validation."""
from __future__ import annotations

import copy
import json
import os
from importlib import resources
from pathlib import Path

import numpy as np

from .distributions import joint_from_spec, marginal_from_spec
from .exceptions import ConfigError, ConforError
from .losses import loss_from_spec
from .solver import Linear, SolverOptions, Total

SEED_ENV = "CONFOR_SEED"

DEFAULTS = {
    "loss": {"loss": "AD"},
    "solver": SolverOptions().to_dict(),
    "analysis": {
        "N": 1_000_000,
        "per_dimension": False,
        "keep_samples": True,
        "tau_pct": 0.5,
        "bins": 64,
        "epsilon_grid": [round(x, 2) for x in np.linspace(-0.1, 0.1, 21)],
        "lattice_size": 64,
        "n_jobs": None,
    },
}


def packaged_scenarios():
    """Names of the scenario files shipped with the package."""
    root = resources.files("confor.data").joinpath("scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read_json(text, source):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None


def load_config(ref):
    """Parse a scenario from a file path or a packaged scenario name.

    Returns ``(config, base_dir)``; relative data paths in the config resolve
    against ``base_dir``.
    """
    p = Path(ref)
    if p.is_file():
        return _read_json(p.read_text(), str(p)), p.resolve().parent
    name = ref[:-5] if ref.endswith(".json") else ref
    if name in packaged_scenarios():
        res = resources.files("confor.data").joinpath("scenarios", name + ".json")
        return _read_json(res.read_text(), name), None
    raise ConfigError(f"no config file or packaged scenario named {ref!r}")


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg, overrides):
    """Apply ``key.sub=value`` strings; values are parsed as JSON when possible."""
    cfg = copy.deepcopy(cfg)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        parts = key.strip().split(".")
        node = cfg
        for k in parts[:-1]:
            nxt = node.setdefault(k, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {key!r}: {k!r} is not a section")
            node = nxt
        node[parts[-1]] = _parse_value(val)
    return cfg


def resolve(cfg, seed=None):
    """Fill defaults and the seed.  The result is what gets embedded in outputs.

    Seed precedence: explicit argument, then the config, then ``CONFOR_SEED``,
    then 0.
    """
    out = copy.deepcopy(cfg)
    for section, vals in DEFAULTS.items():
        if section not in out:
            out[section] = copy.deepcopy(vals)
        elif isinstance(vals, dict) and isinstance(out[section], dict):
            for k, v in vals.items():
                out[section].setdefault(k, copy.deepcopy(v))
    if seed is not None:
        out["seed"] = seed
    elif out.get("seed") is None and os.environ.get(SEED_ENV):
        out["seed"] = os.environ[SEED_ENV]
    if out.get("seed") is None:
        out["seed"] = 0
    else:
        try:
            out["seed"] = int(out["seed"])
        except (TypeError, ValueError):
            raise ConfigError(f"seed: expected an integer, got {out['seed']!r}") from None
        if out["seed"] < 0:
            raise ConfigError("seed: must be non-negative")
    return out


class Scenario:
    """Validated objects built from a resolved config."""

    def __init__(self, cfg, base_dir=None):
        self.config = cfg
        self.base_dir = base_dir
        has_joint, has_margins = "joint" in cfg, "margins" in cfg
        if has_joint == has_margins:
            raise ConfigError("config needs exactly one of 'joint' or 'margins'")
        try:
            if has_joint:
                self.joint = joint_from_spec(self._section("joint", dict), base_dir)
                self.margins = self.joint.margins()
            else:
                self.joint = None
                self.margins = [marginal_from_spec(s, base_dir) for s in self._section("margins", list)]
            self.loss = loss_from_spec(cfg["loss"])
            self.loss.c(len(self.margins))
            self.solver = SolverOptions.from_dict(cfg.get("solver"))
        except ConfigError:
            raise
        except (ConforError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid scenario: {_describe(e)}") from None
        self.analysis = cfg["analysis"]
        self.seed = cfg.get("seed")

    def _section(self, key, kind):
        val = self.config[key]
        if not isinstance(val, kind):
            raise ConfigError(f"{key}: expected {'an object' if kind is dict else 'a list'}")
        return val

    @property
    def dim(self):
        return len(self.margins)

    def constraint(self):
        c = self.config.get("constraint")
        if not isinstance(c, dict) or "F" not in c:
            raise ConfigError("constraint: expected an object with 'F'")
        try:
            if "A" in c:
                A = np.asarray(c["A"], dtype=float)
                if A.ndim == 1:
                    A = A[:, None]
                if A.shape[0] != self.dim:
                    raise ConfigError(f"constraint.A: {A.shape[0]} rows for {self.dim} components")
                return Linear(A, np.atleast_1d(np.asarray(c["F"], dtype=float)))
            return Total(float(c["F"]))
        except ConfigError:
            raise
        except (ConforError, TypeError, ValueError) as e:
            raise ConfigError(f"constraint: {_describe(e)}") from None

    def total(self):
        con = self.constraint()
        if not isinstance(con, Total):
            raise ConfigError("constraint: this analysis needs a single total 'F'")
        return con.F

    def require_joint(self, what):
        if self.joint is None:
            raise ConfigError(f"{what} needs a 'joint' section")
        return self.joint


def _describe(e):
    if isinstance(e, KeyError):
        return f"missing field {e.args[0]!r}"
    return str(e)
