"""
Online covering with a live dual certificate
============================================

Rows of a covering program arrive one at a time. The engine raises x
continuously until each row is met and keeps a dual solution whose value
lower-bounds the offline optimum, so primal/dual bounds the competitive
ratio of every single run.
"""

import math

import numpy as np

from onlinepd import ConstraintRow, EngineConfig, Mode, ObjectiveSpec, PrimalDualState

# one variable, one row: x reaches 1 at tau = ln 2
state = PrimalDualState(ObjectiveSpec.linear([1.0]), EngineConfig(d=1))
state.process_constraint(ConstraintRow([0], [1.0]))
print("x =", state.x, "tau =", state.tau, "ln 2 =", math.log(2))
print("y =", state.y, "ln 2 / ln 3 =", math.log(2) / math.log(3))

# a random linear program with 30 rows of sparsity at most 4
rng = np.random.default_rng(0)
n, d = 8, 4
rows = []
for t in range(30):
    idx = np.sort(rng.choice(n, int(rng.integers(1, d + 1)), replace=False))
    rows.append(ConstraintRow(idx, rng.uniform(0.1, 10, idx.size), t))
c = rng.uniform(0.1, 10, n)

for mode in (Mode.WITH_DECREASE, Mode.MONOTONE):
    rho = max(r.values.max() for r in rows) / min(r.values.min() for r in rows)
    state = PrimalDualState(ObjectiveSpec.linear(c), EngineConfig(d=d, mode=mode, rho=rho))
    state.process_all(rows)
    rep = state.duality_report()
    print(f"{mode.value:>14}: primal {rep.primal:.4f}  dual {rep.dual:.4f}  "
          f"ratio {rep.ratio:.3f}  bound {rep.bound:.2f}")

# a convex objective: l2 norm squared of packing loads, delta = 1/(pL)
B = rng.uniform(0.1, 3, (3, n))
spec = ObjectiveSpec.from_forms(B, 2.0, 0.5)
L = 4 * math.log(1 + 2 * d ** 2)
state = PrimalDualState(spec, EngineConfig(d=d, delta=1 / (2 * L)))
state.process_all(rows)
rep = state.duality_report()
print(f"l2 loads: primal {rep.primal:.4f}  dual {rep.dual:.4f}  ratio {rep.ratio:.2f}  bound {rep.bound:.1f}")

# the step trace records primal and dual along the way
trace = state.trace_array()
print("steps:", len(trace), " last record (row, dt, tau, primal, dual):", trace[-1, :5])
