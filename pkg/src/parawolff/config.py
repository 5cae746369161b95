"""Experiment configuration: one YAML tree per experiment.

Errors carry the file name and the line of the offending key, taken from
the node marks of ``yaml.compose``.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .grid import GridSpec
from .measure import RadialComponent, RadonMeasure, constant_annulus
from .params import RangeError, make_params

SUBCOMMANDS = ("solve", "wolff", "functionals", "iterate", "verify")
TOL_KEYS = ("wolff_tol", "inner_tol", "root_tol", "stop_tol")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with ``file:line:``."""


def _line_map(node, path=(), out=None):
    """Map key paths to 1-based line numbers."""
    out = {} if out is None else out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            out[path + (k.value,)] = k.start_mark.line + 1
            _line_map(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Reader:
    def __init__(self, data, lines, source):
        self.data, self.lines, self.source = data, lines, source

    def fail(self, path, msg):
        # missing keys report the line of their nearest present ancestor
        anc = tuple(path)
        line = self.lines.get(anc)
        while line is None and anc:
            anc = anc[:-1]
            line = self.lines.get(anc)
        where = f"{self.source}:{line or 1}"
        raise ConfigError(f"{where}: {'.'.join(map(str, path)) or '<root>'}: {msg}")

    def get(self, path, default=None, required=False):
        node = self.data
        for key in path:
            if isinstance(node, list) and isinstance(key, int) and key < len(node):
                node = node[key]
                continue
            if not isinstance(node, dict) or key not in node:
                if required:
                    self.fail(path, "missing required key")
                return default
            node = node[key]
        return node

    def number(self, path, default=None, required=False, integer=False, allow_none=False):
        raw = self.get(path, default, required)
        if raw is None:
            if allow_none or not required:
                return None
            self.fail(path, "value required")
        try:
            # YAML 1.1 reads "1e-6" as a string
            val = float(raw)
        except (TypeError, ValueError):
            self.fail(path, f"expected a number, got {raw!r}")
        if not np.isfinite(val):
            self.fail(path, "must be finite")
        if integer:
            if val != int(val):
                self.fail(path, f"expected an integer, got {raw!r}")
            return int(val)
        return val

    def vector(self, path, n, default=None, required=False):
        raw = self.get(path, None, required)
        if raw is None:
            return None if default is None else tuple(float(c) for c in default)
        if not isinstance(raw, list):
            if n != 1:
                self.fail(path, "expected a list of coordinates")
            return (self.number(path),)
        if len(raw) != n:
            self.fail(path, f"expected {n} coordinates, got {len(raw)}")
        return tuple(self.number(tuple(path) + (i,)) for i in range(n))


@dataclass
class ExperimentConfig:
    params: object
    measure: object
    grid: GridSpec
    solver: dict
    iteration: dict
    wolff: dict
    functionals: dict
    suite: dict
    run: tuple
    output: str
    seed: int
    tolerances: dict
    source: str = ""
    raw: dict = field(default_factory=dict)


def _parse_measure(rd, n, R):
    base = ("measure",)
    if rd.get(base) is None:
        return RadonMeasure(n, R)
    locs, masses = [], []
    for i, atom in enumerate(rd.get(base + ("atoms",), []) or []):
        p = base + ("atoms", i)
        locs.append(rd.vector(p + ("location",), n, required=True))
        masses.append(rd.number(p + ("mass",), required=True))
    comps = []
    for i, comp in enumerate(rd.get(base + ("radial",), []) or []):
        p = base + ("radial", i)
        try:
            if "inner" in comp:
                comps.append(constant_annulus(rd.vector(p + ("center",), n, default=[0.0] * n),
                                              rd.number(p + ("inner",), required=True),
                                              rd.number(p + ("outer",), required=True),
                                              rd.number(p + ("density",), required=True)))
            else:
                comps.append(RadialComponent(rd.vector(p + ("center",), n, default=[0.0] * n),
                                             [float(e) for e in comp["edges"]],
                                             [[float(c) for c in cs] for cs in comp["coeffs"]]))
        except (KeyError, TypeError, ValueError) as exc:
            rd.fail(p, f"bad radial component: {exc}")
    uniform = rd.number(base + ("uniform_density",), default=0.0)
    try:
        return RadonMeasure(n, R, np.asarray(locs, float).reshape(-1, n), np.asarray(masses, float),
                            tuple(comps), uniform)
    except ValueError as exc:
        rd.fail(base, str(exc))


def load_config(path, tol_overrides=None, seed=None, out=None):
    """Parse and validate an experiment config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}:1: cannot read config: {exc}") from exc
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"{path}:{mark.line + 1 if mark else 1}: YAML syntax error") from exc
    data = {} if data is None else data
    lines = _line_map(node) if node is not None else {}
    rd = _Reader(data, lines, str(path))
    if not isinstance(data, dict):
        rd.fail((), "top level must be a mapping")

    n = rd.number(("params", "n"), required=True, integer=True)
    if not 1 <= n <= 3:
        rd.fail(("params", "n"), "n must be 1, 2 or 3")
    try:
        params = make_params(n, rd.number(("params", "p"), required=True),
                             rd.number(("params", "eps_reg"), default=1e-6),
                             lam=rd.number(("params", "lambda"), allow_none=True),
                             k=rd.number(("params", "k"), allow_none=True))
    except RangeError as exc:
        msg = str(exc)
        key = next((k for k in ("lambda", "eps_reg", "k") if msg.startswith(k)), "p")
        rd.fail(("params", key), f"RangeError: {msg}")

    R = rd.number(("grid", "R"), default=1.0)
    T = rd.number(("grid", "T"), default=1.0)
    try:
        grid = GridSpec(n, rd.number(("grid", "nx"), default=33, integer=True),
                        rd.number(("grid", "nt"), default=64, integer=True), R, T)
    except ValueError as exc:
        rd.fail(("grid",), str(exc))
    measure = _parse_measure(rd, n, R)

    tolerances = {"wolff_tol": 1e-8, "inner_tol": 1e-10, "root_tol": 1e-7, "stop_tol": 1e-6}
    for key in TOL_KEYS:
        val = rd.number(("tolerances", key), allow_none=True)
        if val is not None:
            tolerances[key] = val
    for key, val in (tol_overrides or {}).items():
        if key not in TOL_KEYS:
            raise ConfigError(f"--tol-overrides:1: unknown tolerance {key!r} (known: {', '.join(TOL_KEYS)})")
        tolerances[key] = float(val)

    run = rd.get(("run",), []) or []
    if not isinstance(run, list):
        rd.fail(("run",), "expected a list of subcommands")
    for i, name in enumerate(run):
        if name not in SUBCOMMANDS:
            rd.fail(("run", i), f"unknown subcommand {name!r}")

    iteration = dict(rd.get(("iteration",), {}) or {})
    for key in ("kappa", "R0", "t0"):
        if key in iteration and iteration[key] is not None:
            iteration[key] = rd.number(("iteration", key))
    for key in ("J_max", "max_slots"):
        if key in iteration:
            iteration[key] = rd.number(("iteration", key), integer=True)
    if "x0" in iteration:
        iteration["x0"] = rd.vector(("iteration", "x0"), n)
    kappa = iteration.get("kappa", 0.1)
    if not 0 < kappa < 1:
        rd.fail(("iteration", "kappa"), "kappa must lie in (0, 1)")

    wolff = dict(rd.get(("wolff",), {}) or {})
    if "points" in wolff:
        wolff["points"] = [rd.vector(("wolff", "points", i), n) for i in range(len(wolff["points"]))]
    if "radii" in wolff:
        wolff["radii"] = [rd.number(("wolff", "radii", i)) for i in range(len(wolff["radii"]))]

    functionals = dict(rd.get(("functionals",), {}) or {})
    if "center" in functionals:
        functionals["center"] = rd.vector(("functionals", "center"), n)
    for key in ("time", "rho", "delta", "level"):
        if key in functionals:
            functionals[key] = rd.number(("functionals", key))

    suite = dict(rd.get(("suite",), {}) or {})
    seed_val = rd.number(("seed",), default=0, integer=True) if seed is None else int(seed)
    output = out or rd.get(("output",), "out")
    solver = dict(rd.get(("solver",), {}) or {})
    if "width" in solver and solver["width"] is not None:
        solver["width"] = rd.number(("solver", "width"))
    return ExperimentConfig(params, measure, grid, solver, iteration, wolff, functionals, suite,
                            tuple(run), str(output), seed_val, tolerances, str(path), data)
