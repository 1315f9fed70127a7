"""Convergence orders on nested meshes.

Each row solves the manufactured problem on the next uniform refinement and
records the error norms; the orders are log-ratios between consecutive rows.
For k = 1 the broken H1 error, the jump seminorm and the V-norm error of the
density decay at least like h, and the exterior point value like h^2.
"""
from dgbem.manufactured import make_dipole_case
from dgbem.verify import run_convergence_study

rows = run_convergence_study(make_dipole_case(), levels=5, k=1, xi=0, sigma=20.0)
keys = ("h1", "jump", "lambda_v", "l2", "c", "exterior")
print("level      h    " + "  ".join(f"{k:>9s} (eoc)" for k in keys) + "  quasi")
for r in rows:
    cells = "  ".join(f"{r[k]:9.2e} ({r['eoc_' + k]:4.2f})" for k in keys)
    print(f"{r['level']:5d} {r['h']:7.4f}  {cells}  {r['quasi_ratio']:.3f}")
