"""
Relaxations and online rounding
===============================

Set cover with several cost vectors, capacitated facility location with a
separation oracle, and profit maximization with production costs. Each
fractional run is computed once and then rounded under many seeds.
"""

import numpy as np

from onlinepd.harness import TrialSettings, generate_instance, run_trial, solve_fractional

settings = TrialSettings()

# set cover: 50 elements, 3 cost vectors, l2 of the cost loads
inst = generate_instance("setcover_multicost", {"n": 20, "universe": 50, "K": 3, "p": 2, "d": 5}, 0)
frac = solve_fractional(inst, settings)
reps = [run_trial(inst, s, settings, frac) for s in range(50)]
print("set cover   fractional ratio %.2f (bound %.1f)" % (reps[0].ratio, reps[0].bound))
print("            rounded l2 cost mean %.2f, fallbacks %d"
      % (np.mean([r.rounded_cost for r in reps]), sum(r.fallbacks for r in reps)))

# facility location: 8 facilities, 40 clients, guess-and-double phases
inst = generate_instance("ccfl", {"m": 8, "clients": 40}, 0)
frac = solve_fractional(inst, settings)
app = frac.app
print("ccfl        phases %d, M %.3g -> %.3g, at most %d rows per client"
      % (len(app.phases), app.M_initial, app.M_final, app.max_rows_per_client))
reps = [run_trial(inst, s, settings, frac) for s in range(50)]
print("            rounded cost mean %.2f, makespan mean %.2f"
      % (np.mean([r.rounded_cost for r in reps]), np.mean([r.max_load for r in reps])))

# profit maximization: 6 items, 20 buyers with explicit bundles
inst = generate_instance("pmpc", {"m": 6, "buyers": 20, "R": 10}, 0)
frac = solve_fractional(inst, settings)
print("pmpc        prices", np.round(frac.app.prices, 3))
reps = [run_trial(inst, s, settings, frac) for s in range(50)]
print("            profit mean %.3f, all audits pass: %s"
      % (np.mean([r.extra["profit"] for r in reps]), all(r.audit_pass for r in reps)))
