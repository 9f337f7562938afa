"""Builders for the packaged scenario files.

``python3 -m confor.fixtures`` regenerates ``confor/data``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .analysis import synthetic_joint

BIVARIATE_M = [float(np.log(7.0)), float(np.log(14.0))]
BIVARIATE_V = [0.04, 0.09]
BIVARIATE_F = (14.7, 21.4, 24.15)
BIVARIATE_RHO = (-0.7, 0.0, 0.7)
SEED = 20240917


def bivariate_cov(rho, v=BIVARIATE_V):
    s = float(np.sqrt(v[0] * v[1]))
    return [[v[0], rho * s], [rho * s, v[1]]]


def bivariate_config(F, rho, loss="AD"):
    return {
        "name": f"bivariate_F{F:g}_rho{rho:g}",
        "joint": {"kind": "mv_lognormal", "m": BIVARIATE_M, "V": bivariate_cov(rho)},
        "loss": {"loss": loss},
        "constraint": {"F": F},
        "seed": SEED,
        "analysis": {"N": 1_000_000, "per_dimension": True, "tau_pct": 0.5},
    }


def sweep_config():
    cfg = bivariate_config(BIVARIATE_F[0], 0.0)
    cfg["name"] = "bivariate_sweep"
    cfg["sweep"] = {"F": list(BIVARIATE_F), "rho": list(BIVARIATE_RHO)}
    return cfg


def synthetic_config(F=None):
    joint = synthetic_joint()
    if F is None:
        # a total somewhat below the typical one, like a conservative plan
        totals = joint.sample(200_000, SEED).sum(axis=1)
        F = float(round(0.9 * np.median(totals)))
    return {
        "name": "synthetic_n100",
        "joint": {"kind": "mv_lognormal", "m": joint.mean.tolist(), "V": joint.cov.tolist()},
        "loss": {"loss": "AD"},
        "constraint": {"F": F},
        "seed": SEED,
        "analysis": {"N": 200_000, "per_dimension": False},
    }


def _dump(path, cfg):
    path.write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n")


def write_all(root=None):
    root = Path(root) if root else Path(__file__).parent / "data"
    sc = root / "scenarios"
    sc.mkdir(parents=True, exist_ok=True)
    for F in BIVARIATE_F:
        for rho in BIVARIATE_RHO:
            cfg = bivariate_config(F, rho)
            _dump(sc / f"{cfg['name']}.json", cfg)
    _dump(sc / "bivariate_sweep.json", sweep_config())
    syn = synthetic_config()
    _dump(sc / "synthetic_n100.json", syn)
    _dump(root / "synthetic_n100.json", syn)


if __name__ == "__main__":
    write_all()
