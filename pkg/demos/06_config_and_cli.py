"""Driving a run from a configuration file, as the command line does.

Equivalent shell usage:
    tangentllg run demo.cfg
    tangentllg check-mesh box:4,4,4
    tangentllg macrospin demo.cfg
"""
import tempfile
from pathlib import Path

from tangentllg.cli import main
from tangentllg.output import read_csv

CONFIG = """
[mesh]
kind = box
nx = 2
ny = 2
nz = 2

[material]
alpha = 1.0
d2 = 0.01
h_ext = 0, 0, 2

[scheme]
variant = order2
tau = 0.01
T = 1.0
rho = zero       # regime (ii): tau below the mesh size
M = 1e6

[initial]
kind = uniform
m = 1, 0, 0

[output]
csv = energy.csv
vtk_dir = snapshots
stride = 25
"""

with tempfile.TemporaryDirectory() as tmp:
    cfg = Path(tmp) / "demo.cfg"
    cfg.write_text(CONFIG)
    print("run ->", main(["run", str(cfg)]))
    table = read_csv(Path(tmp) / "energy.csv")
    print("CSV rows:", table.shape[0], " final E_total:", table[-1, 1])
    print("snapshots:", sorted(p.name for p in (Path(tmp) / "snapshots").iterdir()))
    print("macrospin ->", main(["macrospin", str(cfg)]))
    print("check-mesh ->", main(["check-mesh", "box:4,4,4"]))
