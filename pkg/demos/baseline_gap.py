"""Why the naive single-server rules do not carry over to tandem servers.

    python3 demos/baseline_gap.py
"""
from tandemscale import PowerFunction, cost, gen_batch, gen_trickle_then_burst, make_policy, simulate

pf = PowerFunction(1.0, 2.0)

# a big batch: independent per-server rules overspend on the second server
for n in (8, 32, 64):
    tr = gen_batch(n, 0.0, K=2)
    p = cost(simulate(tr, make_policy("proposed", pf))).total
    a = cost(simulate(tr, make_policy("autonomous", pf))).total
    print(f"batch {n:3d}: proposed {p:9.2f}  autonomous {a:9.2f}  ratio {a / p:.3f}")

# job 2 starts alone and crawls; the burst behind it speeds server 1 up but the
# replayed profile on server 2 stays slow
tr = gen_trickle_then_burst(0.75, 20, K=2)
for name in ("proposed", "replication"):
    traj = simulate(tr, make_policy(name, pf))
    print(f"{name:12s} job 2 flow time {traj.finish[1] - tr.arrivals[1]:.4f}")
