"""Command-line driver: ``confor <subcommand> CONFIG [--out DIR] [--set k=v]``.

Exit status is 0 on success, 2 when a constraint cannot be met and 1 on
input errors.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, conditioning
from .config import Scenario, apply_overrides, load_config, packaged_scenarios, resolve
from .distributions import MultivariateNormal, joint_from_spec, write_samples_csv
from .exceptions import ConfigError, ConforError
from .solver import Total, solve

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2


class _Infeasible(Exception):
    pass


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return None if np.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


class Output:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.written = []

    def path(self, name):
        p = self.root / name
        self.written.append(p)
        return p

    def json(self, name, payload):
        text = json.dumps(_plain(payload), indent=1, sort_keys=True, allow_nan=False)
        self.path(name).write_text(text + "\n")

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _solve(sc):
    res = solve(sc.loss, sc.joint if sc.loss.name == "WAPE" else sc.margins, sc.constraint(), sc.solver)
    return res


def _require_solved(res):
    if not res.converged:
        raise _Infeasible(res.message)
    return res


def _forecast(sc):
    """Forecast to analyse: an explicit ``forecast`` entry or the constrained optimum."""
    if "forecast" in sc.config:
        f = np.asarray(sc.config["forecast"], dtype=float)
        if f.size != sc.dim:
            raise ConfigError(f"forecast: {f.size} values for {sc.dim} components")
        return f, None
    res = _require_solved(_solve(sc))
    return res.f_star, res


def cmd_solve(sc, out):
    res = _solve(sc)
    out.json("solve.json", {"config": sc.config, "result": res.to_dict()})
    if not res.converged:
        raise _Infeasible(res.message)
    return {"f_star": res.f_star, "lambda_star": res.lambda_star}


def cmd_loss_dist(sc, out):
    joint = sc.require_joint("loss-dist")
    a = sc.analysis
    f, res = _forecast(sc)
    kw = dict(per_dimension=bool(a["per_dimension"]), keep_samples=bool(a["keep_samples"]), n_jobs=a["n_jobs"])
    summary = analysis.loss_distribution(joint, sc.loss, f, int(a["N"]), sc.seed, **kw)
    payload = {"config": sc.config, "forecast": f, "summary": summary.to_dict()}
    if res is not None:
        payload["lambda_star"] = res.lambda_star
    if a.get("contrast") and isinstance(joint, MultivariateNormal):
        _, indep = analysis.dependence_contrast(joint, sc.loss, f, int(a["N"]), sc.seed, **kw)
        payload["independent_summary"] = indep.to_dict()
    if summary.samples is not None:
        payload["samples_csv"] = "loss_samples.csv"
        out.csv("loss_samples.csv", ["total", "loss"], summary.samples)
    out.json("loss_dist.json", payload)
    return summary.to_dict()


def cmd_sensitivity(sc, out):
    F = sc.total()
    grid = sc.analysis["epsilon_grid"]
    try:
        sens = analysis.sensitivity(sc.loss, sc.margins, F, grid, sc.solver)
    except ConforError as e:
        raise _Infeasible(str(e)) from None
    out.csv("sensitivity.csv", ["epsilon", "F", "component", "f_exact", "f_approx"], sens.rows())
    out.json("sensitivity.json", {"config": sc.config, "result": sens.to_dict(), "table_csv": "sensitivity.csv"})
    return {"envelopes": sens.envelopes()}


def _lattice(sc, out, name):
    joint = sc.joint
    if joint is None or joint.dim != 2 or not isinstance(joint, MultivariateNormal):
        return None
    x, y, Z = analysis.density_lattice(joint, int(sc.analysis["lattice_size"]))
    rows = ((x[j], y[i], Z[i, j]) for i in range(y.size) for j in range(x.size))
    out.csv(name, ["y1", "y2", "density"], rows)
    return name


def cmd_abc(sc, out):
    joint = sc.require_joint("abc")
    a = sc.analysis
    F = sc.total()
    res = conditioning.abc_condition(joint, F, float(a["tau_pct"]), int(a["N"]), sc.seed, a["n_jobs"])
    write_samples_csv(out.path("abc_accepted.csv"), res.accepted, getattr(joint, "names", None))
    hist_rows = []
    for i, (counts, edges) in enumerate(res.histograms(int(a["bins"]))):
        hist_rows += [(i, edges[b], edges[b + 1], int(counts[b])) for b in range(counts.size)]
    out.csv("abc_histograms.csv", ["component", "bin_lo", "bin_hi", "count"], hist_rows)
    payload = {
        "config": sc.config,
        "acceptance_rate": res.acceptance_rate,
        "tau_pct": res.tau_pct,
        "n_accepted": int(res.accepted.shape[0]),
        "accepted_csv": "abc_accepted.csv",
        "histograms_csv": "abc_histograms.csv",
        "density_csv": _lattice(sc, out, "density_lattice.csv"),
    }
    out.json("abc.json", payload)
    return {"acceptance_rate": res.acceptance_rate}


def cmd_condition(sc, out):
    joint = sc.require_joint("condition")
    if type(joint) is not MultivariateNormal:
        raise ConfigError("condition: exact conditioning needs a 'mv_normal' joint")
    spec = sc.config.get("condition", {})
    family = spec.get("family", "normal")
    F = sc.total()
    if family == "normal":
        res = conditioning.condition_normal(joint.mean, joint.cov, F)
    elif family == "t":
        if "k" not in spec:
            raise ConfigError("condition.k: degrees of freedom required for family 't'")
        res = conditioning.condition_t(
            float(spec["k"]), joint.mean, joint.cov, F, spec.get("dispersion", "conditional")
        )
    else:
        raise ConfigError(f"condition.family: expected 'normal' or 't', got {family!r}")
    out.json("condition.json", {"config": sc.config, "result": res.to_dict()})
    return res.to_dict()


def _with_rho(joint_spec, rho):
    spec = copy.deepcopy(joint_spec)
    V = np.asarray(spec["V"], dtype=float)
    sd = np.sqrt(np.diag(V))
    R = np.full(V.shape, float(rho))
    np.fill_diagonal(R, 1.0)
    spec["V"] = (R * np.outer(sd, sd)).tolist()
    return spec


def cmd_sweep(sc, out):
    """Solve, loss distribution and ABC over a (rho, F) grid.

    ``rho`` sets every off-diagonal correlation of the joint; margins stay
    fixed, so the optimum depends on F only.
    """
    joint_spec = sc.config.get("joint")
    if joint_spec is None:
        raise ConfigError("sweep needs a 'joint' section")
    grid = sc.config.get("sweep") or {}
    Fs = grid.get("F", [sc.total()])
    rhos = grid.get("rho", [None])
    a = sc.analysis
    results, rows, infeasible = [], [], False
    for rho in rhos:
        js = joint_spec if rho is None else _with_rho(joint_spec, rho)
        joint = joint_from_spec(js, sc.base_dir)
        for F in Fs:
            rec = {"rho": rho, "F": float(F)}
            res = solve(sc.loss, joint if sc.loss.name == "WAPE" else joint.margins(), Total(float(F)), sc.solver)
            rec["solve"] = res.to_dict()
            row = [rho if rho is not None else "", float(F), res.status.value]
            if res.converged:
                ld = analysis.loss_distribution(
                    joint, sc.loss, res.f_star, int(a["N"]), sc.seed, bool(a["per_dimension"]), n_jobs=a["n_jobs"]
                )
                ab = conditioning.abc_condition(joint, float(F), float(a["tau_pct"]), int(a["N"]), sc.seed, a["n_jobs"])
                rec["loss"] = ld.to_dict()
                rec["acceptance_rate"] = ab.acceptance_rate
                row += [ld.mean, ld.median, ld.q95, ab.acceptance_rate] + list(res.f_star)
            else:
                infeasible = True
            results.append(rec)
            rows.append(row)
    n = len(joint_from_spec(joint_spec, sc.base_dir).margins())
    header = ["rho", "F", "status", "loss_mean", "loss_median", "loss_q95", "acceptance_rate"]
    out.csv("sweep.csv", header + [f"f{i + 1}" for i in range(n)], rows)
    out.json("sweep.json", {"config": sc.config, "results": results, "table_csv": "sweep.csv"})
    if infeasible:
        raise _Infeasible("some grid points have unattainable totals")
    return {"points": len(results)}


COMMANDS = {
    "solve": cmd_solve,
    "loss-dist": cmd_loss_dist,
    "sensitivity": cmd_sensitivity,
    "abc": cmd_abc,
    "condition": cmd_condition,
    "sweep": cmd_sweep,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="confor", description="Constrained point forecasts and loss analysis")
    ap.add_argument("--list-scenarios", action="store_true", help="print packaged scenario names and exit")
    sub = ap.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON scenario file or packaged scenario name")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config entry")
        p.add_argument("--seed", type=int, default=None, help="overrides the config and CONFOR_SEED")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.list_scenarios:
        print("\n".join(packaged_scenarios()))
        return EXIT_OK
    if not args.command:
        ap.print_usage(sys.stderr)
        return EXIT_INPUT
    try:
        raw, base_dir = load_config(args.config)
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        cfg = resolve(apply_overrides(raw, args.set), args.seed)
        sc = Scenario(cfg, base_dir)
        out = Output(args.out)
        summary = COMMANDS[args.command](sc, out)
    except _Infeasible as e:
        print(f"confor {args.command}: infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConforError, OSError) as e:
        print(f"confor {args.command}: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(_plain(summary), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
