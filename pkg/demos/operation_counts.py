"""Ledger counts of both solvers on square synthetic devices.

Prints one row per size and the fitted log-log slopes. The default sizes
run in a few seconds; ``--large`` adds 128 and 256 (about a minute, 3 GB).
"""

import sys

from hscnegf.simulate import bench_point, loglog_slope

sizes = [16, 32, 64] + ([128, 256] if "--large" in sys.argv else [])
rows = {s: [bench_point(s, n, n) for n in sizes] for s in ("rgf", "hsc")}

print(f"{'N':>5} {'rgf G^r':>14} {'rgf G^<':>14} {'hsc total':>14}")
for k, n in enumerate(sizes):
    r, h = rows["rgf"][k], rows["hsc"][k]
    print(f"{n:>5} {r.gr.total:>14d} {r.gless.total:>14d} {h.total:>14d}")
for s in ("rgf", "hsc"):
    print(f"{s} slope: {loglog_slope(sizes, [r.total for r in rows[s]]):.2f}")
