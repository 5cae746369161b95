"""Running an experiment from a YAML config through the command line entry point.

Equivalent shell call: parawolff suite --config exp.yaml --out out/
"""
import json
import tempfile
from pathlib import Path

from parawolff.cli import main

CONFIG = """\
params: {n: 1, p: 1.5, eps_reg: 1e-6}
measure:
  atoms:
    - {location: [0.0], mass: 1.0}
grid: {nx: 65, nt: 64, R: 1.0, T: 1.0}
iteration: {kappa: 0.1, x0: [0.25], t0: 0.5}
wolff: {points: [[0.25], [0.0]], radii: [0.5, 1.0]}
functionals: {center: [0.25], time: 0.5, rho: 0.25, delta: 0.1, level: 0.05}
suite: {samples: 10}
run: [solve, wolff, functionals, iterate, verify]
seed: 1
"""

with tempfile.TemporaryDirectory() as tmp:
    cfg = Path(tmp) / "exp.yaml"
    cfg.write_text(CONFIG)
    out = Path(tmp) / "out"
    status = main(["suite", "--config", str(cfg), "--out", str(out)])
    print("exit status:", status)
    for f in sorted(out.glob("*.json")):
        print(f.name, sorted(json.loads(f.read_text()))[:6])
    print((out / "iteration.csv").read_text().splitlines()[:4])

    # a bad exponent is a config error with the file and line of the key
    cfg.write_text(CONFIG.replace("p: 1.5", "p: 0.9"))
    print("exit status:", main(["solve", "--config", str(cfg), "--out", str(out)]))
