"""Command-line experiment runner.

    python3 -m parawolff <subcommand> --config exp.yaml [--out DIR] [--seed N]
                         [--threads N] [--tol-overrides key=val,...]

Subcommands: solve, wolff, functionals, iterate, verify, suite. ``suite``
runs the subcommands listed under ``run:`` in the config in dependency
order. Exit status: 0 success, 1 acceptance failure, 2 config error.
"""

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import SUBCOMMANDS, ConfigError, load_config
from .fieldio import FieldCache, FieldFormatError, read_field, write_slice_csv
from .functionals import Cylinder, DomainError, a_star, energy_audit, make_cutoffs
from .iteration import RootBracketError, make_iteration_params, run_iteration
from .solver import ConvergenceError, solve_ibvp
from .suite import iteration_invariants, run_suite
from .verifier import check_corollary, check_proposition, check_theorem_i, check_theorem_ii, \
    dyadic_radii, sample_points, theorem_radius
from .wolff import QuadratureError, wolff_potential

ORDER = ("solve", "wolff", "functionals", "iterate", "verify")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (tuple, list)):
        return " ".join(_fmt(v) for v in x)
    return str(x)


def write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")


class Runner:
    """Executes subcommands for one config, sharing the solved field."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.out = Path(cfg.output)
        self.cache = FieldCache(self.out / "cache")
        self._field = None

    def field(self):
        if self._field is None:
            path = self.cfg.solver.get("field")
            if path:
                self._field = read_field(path)
            else:
                self._field = self._solve()[0]
        return self._field

    def _solve(self):
        c = self.cfg
        opts = {"inner_tol": c.tolerances["inner_tol"], "width": c.solver.get("width")}
        u, key, hit = self.cache.get_or_solve(
            c.params, c.measure, c.grid, opts,
            lambda: solve_ibvp(c.measure, c.params, c.grid, width=opts["width"], inner_tol=opts["inner_tol"]))
        self._field = u
        return u, key, hit

    def solve(self):
        c = self.cfg
        u, key, hit = self._solve()
        self.out.mkdir(parents=True, exist_ok=True)
        for t in c.solver.get("slices", [c.grid.T / 2]):
            k = int(round(float(t) / c.grid.dt))
            write_slice_csv(self.out / f"slice_k{k:05d}.csv", u, k * c.grid.dt)
        # cache hits carry no solver diagnostics, so they are left out to keep reruns identical
        write_json(self.out / "solve.json", {"field": str(self.cache.path(key).name),
                                             "grid": c.grid.as_dict(), "params": c.params.as_dict(),
                                             "sup": float(np.max(u.values))})
        return 0

    def wolff(self):
        c = self.cfg
        pts = c.wolff.get("points") or [tuple([0.0] * c.grid.n)]
        radii = c.wolff.get("radii") or [c.grid.R]
        rows = []
        for x in pts:
            for R in radii:
                prof = wolff_potential(c.measure, c.params, x, R, c.tolerances["wolff_tol"])
                rows.append({"x": x, "R": R, "value": prof.value, "diverged": prof.diverged,
                             "inner_cutoff": prof.inner_cutoff, "error_estimate": prof.error_estimate,
                             "slope": prof.slope})
        self.out.mkdir(parents=True, exist_ok=True)
        write_csv(self.out / "wolff.csv", rows, ["x", "R", "value", "diverged", "inner_cutoff",
                                                 "error_estimate", "slope"])
        cor = check_corollary(c.measure, c.params, c.grid.R, c.grid, wolff_tol=c.tolerances["wolff_tol"])
        write_json(self.out / "wolff.json", {"profiles": rows, "corollary_bounded": cor.bounded,
                                             "sup_wolff": cor.sup_wolff})
        return 0

    def functionals(self):
        c = self.cfg
        u = self.field()
        f = c.functionals
        n = c.grid.n
        cyl = Cylinder(f.get("center", (0.0,) * n), f.get("time", c.grid.T / 2),
                       f.get("rho", c.grid.R / 4), f.get("delta", 1.0))
        level = f.get("level", 0.0)
        cut = make_cutoffs(c.grid, cyl, c.params)
        rep = a_star(u, cyl, level, cyl.delta, cut, c.params)
        lhs, ri, rm = energy_audit(u, cyl, level, cyl.delta, cut, c.measure, c.params)
        self.out.mkdir(parents=True, exist_ok=True)
        write_json(self.out / "functionals.json", {
            "cylinder": {"center": cyl.center, "time": cyl.time, "rho": cyl.rho, "delta": cyl.delta},
            "level": level, "first_term": rep.first_term, "second_term": rep.second_term,
            "a_value": rep.a_value, "energy": {"lhs": lhs, "rhs_interior": ri, "rhs_measure": rm,
                                               "gamma_emp": lhs / (ri + rm) if ri + rm > 0 else "inf"}})
        return 0

    def iterate(self):
        c = self.cfg
        u = self.field()
        itc = c.iteration
        x0 = itc.get("x0")
        if x0 is None:
            # node nearest (R/4, 0, ...)
            x0 = (round(c.grid.R / 4 / c.grid.h) * c.grid.h,) + (0.0,) * (c.grid.n - 1)
        t0 = itc.get("t0", c.grid.T / 2)
        it = make_iteration_params(u, c.params, x0, t0, kappa=itc.get("kappa", 0.1), R0=itc.get("R0"),
                                   J_max=itc.get("J_max", 40), root_tol=c.tolerances["root_tol"],
                                   stop_tol=c.tolerances["stop_tol"])
        state = run_iteration(u, it, c.params, c.measure, c.tolerances["wolff_tol"])
        rows = [{"j": j, "rho": state.rhos[j], "l": state.levels[j], "delta": state.deltas[j],
                 "A": state.a_values[j], "branch": state.branches[j], "gamma_j": state.gamma_ratios[j],
                 "slots": state.slot_counts[j], "cover_min": state.cover_min[j]}
                for j in range(state.j)]
        self.out.mkdir(parents=True, exist_ok=True)
        write_csv(self.out / "iteration.csv", rows, ["j", "rho", "l", "delta", "A", "branch", "gamma_j",
                                                     "slots", "cover_min"])
        inv = iteration_invariants(state, it)
        write_json(self.out / "iteration.json", {
            "x0": it.x0, "t0": it.t0, "R0": it.R0, "B": it.B, "kappa": it.kappa, "c_R0": it.c_R0,
            "stop_reason": state.stop_reason, "levels": state.j, "invariants": inv, **state.summary})
        return 0 if all(inv.values()) and state.summary["consistent"] else 1

    def verify(self):
        c = self.cfg
        s = c.suite
        name = s.get("name", "field")
        self.out.mkdir(parents=True, exist_ok=True)
        if name == "standard":
            rows, summary, failures = run_suite(
                dims=tuple(s.get("dims", (1, 2))), levels=tuple(s.get("levels", (1, 2))),
                samples=int(s.get("samples", 25)), seed=c.seed, cache=self.cache,
                measures=s.get("measures"), p_values=s.get("p_values"),
                wolff_tol=c.tolerances["wolff_tol"], stop_tol=s.get("stop_tol", 1e-4),
                iterate=bool(s.get("iterate", True)))
        else:
            rows, summary, failures = self._verify_field(int(s.get("samples", 25)))
        cols = ["case", "level", "kind", "x0", "t0", "R", "lhs", "gamma", "flags", "ok"]
        write_csv(self.out / "verify.csv", rows, cols)
        write_json(self.out / "verify.json", dict(summary, failure_messages=failures, seed=c.seed))
        return 1 if failures else 0

    def _verify_field(self, samples):
        c = self.cfg
        u = self.field()
        points = sample_points(c.grid, samples, c.seed)
        rows, failures = [], []
        tol = c.tolerances["wolff_tol"]
        for x0, t0 in points:
            radii = dyadic_radii(theorem_radius(c.grid, c.params, x0, t0))
            for rep in (check_theorem_i(u, c.measure, c.params, (x0, t0), radii, tol),
                        check_theorem_ii(u, c.measure, c.params, (x0, t0), radii, tol)):
                ok = bool(np.isfinite(rep.gamma_emp))
                rows.append({"case": "config", "level": 0, "kind": rep.kind, "x0": x0, "t0": t0,
                             "R": rep.meta["R"], "lhs": rep.lhs, "gamma": rep.gamma_emp,
                             "flags": "|".join(rep.flags), "ok": ok})
                if not ok:
                    failures.append(f"{rep.kind} at {x0}: gamma not finite")
        prop, mass = check_proposition(u, c.measure, c.params, wolff_tol=tol)
        for rep, ok in ((prop, bool(np.isfinite(prop.gamma_emp))), (mass, mass.meta["ok"])):
            rows.append({"case": "config", "level": 0, "kind": rep.kind, "x0": (), "t0": "", "R": c.grid.R,
                         "lhs": rep.lhs, "gamma": rep.gamma_emp, "flags": "|".join(rep.flags), "ok": ok})
            if not ok:
                failures.append(f"{rep.kind} fails")
        return rows, {"checks": len(rows), "proposition": prop.meta}, failures


def _parse_overrides(text):
    out = {}
    for part in filter(None, (text or "").split(",")):
        if "=" not in part:
            raise ConfigError(f"--tol-overrides:1: expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise ConfigError(f"--tol-overrides:1: {k.strip()} needs a number, got {v!r}") from None
    return out


def build_parser():
    ap = argparse.ArgumentParser(prog="parawolff", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=SUBCOMMANDS + ("suite",))
    ap.add_argument("--config", required=True, help="experiment YAML file")
    ap.add_argument("--out", help="output directory (overrides the config and PARAWOLFF_OUT)")
    ap.add_argument("--seed", type=int, help="sample-point seed (overrides the config)")
    ap.add_argument("--threads", type=int, default=1,
                    help="worker threads (the kernels are single-threaded; recorded only)")
    ap.add_argument("--tol-overrides", default="", help="comma separated key=value tolerances")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, _parse_overrides(args.tol_overrides), args.seed,
                          args.out or os.environ.get("PARAWOLFF_OUT"))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    runner = Runner(cfg)
    todo = [c for c in ORDER if c in cfg.run] if args.command == "suite" else [args.command]
    status = 0
    try:
        for name in todo:
            status = max(status, getattr(runner, name)() or 0)
    except (DomainError, FieldFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RootBracketError as exc:
        print(f"acceptance failure: {exc}", file=sys.stderr)
        return 1
    except (QuadratureError, ConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    return status


if __name__ == "__main__":
    sys.exit(main())
