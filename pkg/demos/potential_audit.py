"""Check the amortised argument numerically on a bursty trace.

The drift audit samples every event-free interval; the jump audit replays each
discontinuity; the integrated check compares total costs.

    python3 demos/potential_audit.py
"""
from tandemscale import (PowerFunction, audit_drift, audit_integrated, audit_jumps,
                         enhanced_opt, gen_trickle_then_burst, make_policy, simulate)

pf = PowerFunction(1.0, 2.0)
trace = gen_trickle_then_burst(0.5, 15, K=4)
alg = simulate(trace, make_policy("proposed", pf))
opt = enhanced_opt(trace, pf)

for c in (6.0, 0.1):
    d = audit_drift(alg, opt, pf, c=c)
    print(f"c={c}: {d.samples} samples, {len(d.violations)} drift violations")

j = audit_jumps(alg, opt, pf)
print(f"positive jumps {j.total_positive:.2f} against budget {j.budget:.2f}")
print(f"largest single jump {max(x.increase for x in j.jumps):.3f}")
i = audit_integrated(alg, opt, pf)
print(f"online cost {i.alg_cost:.2f} <= {i.bound:.2f}: {i.passed}")
