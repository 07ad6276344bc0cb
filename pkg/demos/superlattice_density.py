"""Electron density of a small barrier stack at zero bias.

A 10 nm device with eight 0.6 nm barriers is solved with both solvers over
0..0.5 eV; the line density inside the stack should be mirror symmetric.
Pass ``--full`` for the 20 nm, 8 x 1 nm geometry (50 x 200 grid, 100 energies).
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from hscnegf.cli import cmd_solve
from hscnegf.observables import mirror_asymmetry

if "--full" in sys.argv:
    device = {"kind": "superlattice", "Nx": 50, "Ny": 200}
    count, stack = 100, (20, 170)
else:
    device = {"kind": "superlattice", "Nx": 50, "Ny": 100, "n_barriers": 8,
              "barrier_width": 0.6, "well_width": 0.4, "left_flat": 1.2, "right_flat": 1.2}
    count, stack = 40, (12, 88)

out = {}
with tempfile.TemporaryDirectory() as tmp:
    for solver in ("rgf", "hsc"):
        cfg = {"device": device, "solver": solver,
               "energy_grid": {"start": 0.0, "stop": 0.5, "count": count}}
        out[solver] = cmd_solve(cfg, Path(tmp) / solver)["line"]

line = out["rgf"]
print("line density (every 5th layer):")
print(np.array2string(line[::5], precision=4))
print("max mirror asymmetry in the stack:", f"{mirror_asymmetry(line, *stack).max():.2e}")
print("rgf vs hsc, max relative difference:",
      f"{np.abs(out['rgf'] - out['hsc']).max() / np.abs(line).max():.2e}")
