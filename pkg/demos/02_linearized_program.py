"""Write the big-M integer program for a small instance and check it against the exact solver.

    python demos/02_linearized_program.py [out.lp]

scipy's HiGHS interface solves the exported program when scipy is installed.
"""
import sys
from pathlib import Path

from mecmig.scenario import random_instance
from mecmig.solver import dp_solve, export_lp, linearize, point_values, validate_linearization

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo.lp")
inst = random_instance(3, 3, 2, 4)
sol = dp_solve(inst)
out.write_text(export_lp(inst))
print(f"wrote {out} ({out.stat().st_size} bytes)")

prog = linearize(inst)
families = sorted({c.family for c in prog.constraints})
print("constraints per family:", {f: prog.count(f) for f in families})

report = validate_linearization(inst, sol.trajectory)
print(f"optimal trajectory {sol.trajectory}")
print(f"exact value {sol.value:.6f}, linear objective at that point "
      f"{prog.objective_value(point_values(inst, sol.trajectory)):.6f}, consistent: {report.ok}")

try:
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp
except ImportError:
    sys.exit(0)

names = prog.binaries + prog.continuous
idx = {v: i for i, v in enumerate(names)}
c = np.zeros(len(names))
for v, a in prog.objective.items():
    c[idx[v]] = a
A = np.zeros((len(prog.constraints), len(names)))
lo = np.full(len(prog.constraints), -np.inf)
hi = np.full(len(prog.constraints), np.inf)
for i, con in enumerate(prog.constraints):
    for v, a in con.terms.items():
        A[i, idx[v]] = a
    if con.sense in ("<=", "="):
        hi[i] = con.rhs
    if con.sense in (">=", "="):
        lo[i] = con.rhs
ub = np.array([1.0] * len(prog.binaries) + [np.inf] * len(prog.continuous))
for v in prog.fixed_zero:
    ub[idx[v]] = 0.0
res = milp(c, constraints=LinearConstraint(A, lo, hi), bounds=Bounds(0, ub),
           integrality=[1] * len(prog.binaries) + [0] * len(prog.continuous))
print(f"MILP optimum {res.fun:.6f}")
