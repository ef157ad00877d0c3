"""Two lower bounds on the offline optimum, and how far the online policy sits above them.

    python3 demos/offline_bounds.py
"""
from tandemscale import (PowerFunction, closed_form_lb, cost, empirical_ratios, enhanced_opt,
                         gen_poisson, make_policy, simulate, worst_case_ratio_bound)

pf = PowerFunction(1.0, 2.0)
print(f"worst-case guarantee for P(s) = s^2: {worst_case_ratio_bound(pf):.1f}")

for K in (1, 2, 4, 8):
    trace = gen_poisson(2.0, 15.0, seed=3, K=K)
    alg = cost(simulate(trace, make_policy("proposed", pf))).total
    opt = enhanced_opt(trace, pf)
    r = empirical_ratios(trace, pf, alg, opt)
    print(f"K={K}: n={trace.n:3d}  online {alg:8.2f}  relaxed opt {opt.cost:8.2f} "
          f"({opt.sweeps} sweeps)  n*K*P'(s*) {closed_form_lb(trace.n, K, pf):8.2f}  "
          f"ratio <= {min(r['vs_opt_e'], r['vs_closed_form']):.3f}")
