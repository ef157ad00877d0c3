"""Run the three speed policies on one small trace and compare their costs.

    python3 demos/single_run.py
"""
from tandemscale import PowerFunction, cost, gen_batch, make_policy, simulate

pf = PowerFunction(1.0, 2.0)
trace = gen_batch(6, 0.0, K=3)

for name in ("proposed", "autonomous", "replication"):
    traj = simulate(trace, make_policy(name, pf))
    rep = cost(traj)
    print(f"{name:12s} flow {rep.flow_time:8.3f}  energy {rep.energy:8.3f}  total {rep.total:8.3f}")

# the first few speed segments of the proposed run: every busy server shares one speed
traj = simulate(trace, make_policy("proposed", pf))
for t0, t1, speeds in traj.segments()[:5]:
    print(f"[{t0:6.3f}, {t1:6.3f})  " + "  ".join(f"{s:5.3f}" for s in speeds))
