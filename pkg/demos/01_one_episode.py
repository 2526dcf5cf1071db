"""Realize one default-scenario episode and compare a few hand-made placements with the optimum.

    python demos/01_one_episode.py [seed]
"""
import sys

from mecmig.model import evaluate_objective
from mecmig.scenario import ScenarioConfig, nearest_assignment, realize
from mecmig.solver import dp_solve

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
cfg = ScenarioConfig()
ep = realize(cfg, seed, horizon=20)
inst = ep.instance

print(f"servers at {[s.position for s in inst.servers]}")
print(f"request sizes (kbit): {[round(float(s) / 1000, 1) for s in inst.sizes]}")
print(f"initial placement (nearest server): {inst.initial}")

# keep every service where it started
stay = [inst.initial] * inst.horizon
# follow the vehicles: nearest server in every slot
follow = [nearest_assignment(fleet, inst.servers) for fleet in ep.trace]
best = dp_solve(inst)

for name, traj in (("stay put", stay), ("follow nearest", follow), ("optimal", best.trajectory)):
    v = evaluate_objective(traj, inst)
    print(f"{name:>15}: compute {v.compute:8.4f}  comm {v.comm:8.4f}  "
          f"migration {v.migration:6.3f}  total {v.total:8.4f}")
