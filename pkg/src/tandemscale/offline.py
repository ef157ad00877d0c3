"""Offline lower bounds on the optimal tandem cost.

``enhanced_opt`` relaxes the tandem constraint: every job is copied onto all
K servers at arrival, so the relaxed optimum runs one virtual server and
pays K times its energy.  For unit jobs FIFO order with a constant speed
per job is optimal, leaving a convex problem in the finish times ``f_j``:

    minimise  sum_j (f_j - a_j) + K * sum_j tau_j * P(1 / tau_j),
    tau_j = f_j - max(a_j, f_{j-1}).
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from typing import Optional

from ._golden import golden_section
from .power import PowerFunction
from .workload import Trace

TIME_TOL = 1e-12


def closed_form_lb(n: int, K: int, pf: PowerFunction) -> float:
    """``n * K * P'(s*)``: each job costs at least ``P'(s*)`` on each server."""
    if n < 0 or K < 0:
        raise ValueError("n and K must be nonnegative")
    return n * K * pf.per_job_opt_cost()


@dataclass
class OptSchedule:
    """FIFO single-virtual-server schedule of the relaxed offline optimum."""

    trace: Trace
    power: PowerFunction
    starts: list
    finishes: list
    cost: float
    sweeps: int = 0

    @property
    def K(self) -> int:
        return self.trace.servers

    @property
    def n(self) -> int:
        return self.trace.n

    @property
    def arrivals(self) -> tuple:
        return self.trace.arrivals

    @property
    def speeds(self) -> list:
        return [1.0 / (f - b) for b, f in zip(self.starts, self.finishes)]

    def flow_time(self) -> float:
        return math.fsum(f - a for f, a in zip(self.finishes, self.arrivals))

    def energy(self) -> float:
        return self.K * math.fsum(_job_energy(self.power, f - b)
                                  for b, f in zip(self.starts, self.finishes))

    def state(self, t: float, side: str = "post", arrived: Optional[int] = None):
        """``(outstanding, head_remaining, head_speed)`` on the virtual server.

        ``side="pre"`` is the left limit at ``t``: a job finishing exactly
        at ``t`` is still present with zero remaining work.  ``arrived``
        overrides how many jobs have been released (used when replaying
        simultaneous events one at a time).
        """
        if arrived is None:
            arrived = bisect.bisect_right(self.arrivals, t + TIME_TOL)
        if side == "post":
            done = bisect.bisect_right(self.finishes, t + TIME_TOL)
        else:
            done = bisect.bisect_left(self.finishes, t - TIME_TOL)
        done = min(done, arrived)
        count = arrived - done
        if count <= 0:
            return 0, 0.0, 0.0
        b, f = self.starts[done], self.finishes[done]
        if b > t + TIME_TOL:
            return count, 1.0, 0.0
        rem = min(1.0, max(0.0, (f - t) / (f - b)))
        return count, rem, 1.0 / (f - b)

    def event_times(self) -> list:
        return sorted(set(self.arrivals) | set(self.starts) | set(self.finishes))

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "power": self.power.to_dict(),
            "jobs": [{"a": a, "b": b, "f": f, "speed": 1.0 / (f - b)}
                     for a, b, f in zip(self.arrivals, self.starts, self.finishes)],
            "flow_time": self.flow_time(),
            "energy": self.energy(),
            "cost": self.cost,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def _job_energy(pf: PowerFunction, tau: float) -> float:
    """Energy to process one unit of work in time ``tau`` at constant speed."""
    return tau * pf._raw(1.0 / tau)


def _single_job_duration(pf: PowerFunction, K: int) -> float:
    """Minimiser of ``tau + K * tau * P(1/tau)`` over ``tau > 0``."""
    c, a = pf.coefficient, pf.exponent
    return (K * c * (a - 1) / (1.0 + K * pf.offset)) ** (1.0 / a)


class _Solver:
    def __init__(self, arrivals, K, pf, rtol):
        self.a = list(arrivals)
        self.n = len(self.a)
        self.K = K
        self.pf = pf
        self.rtol = rtol
        self.tmin = 1.0 / pf.speed_cap if pf.speed_cap is not None else 0.0
        self.tstar = max(_single_job_duration(pf, K), self.tmin)

    def E(self, tau):
        if tau <= 0 or tau < self.tmin * (1 - 1e-12):
            return math.inf
        return _job_energy(self.pf, tau)

    def start(self, f, j):
        return self.a[j] if j == 0 else max(self.a[j], f[j - 1])

    def objective(self, f):
        total = 0.0
        for j in range(self.n):
            total += f[j] - self.a[j] + self.K * self.E(f[j] - self.start(f, j))
        return total

    def initial(self):
        f = []
        for j in range(self.n):
            st = self.a[j] if j == 0 else max(self.a[j], f[-1])
            f.append(st + self.tstar)
        return f

    def move_finish(self, f, j):
        """Optimise ``f_j`` alone, later finish times fixed."""
        K, E, a = self.K, self.E, self.a
        st = self.start(f, j)
        lo = st + self.tmin
        hi = st + self.tstar
        last = j == self.n - 1
        if not last:
            nxt = f[j + 1]
            hi = min(hi, nxt - self.tmin)

            def g(x):
                return x + K * E(x - st) + K * E(nxt - max(a[j + 1], x))
        else:
            def g(x):
                return x + K * E(x - st)
        if hi <= lo:
            return
        x, gx = golden_section(g, lo, hi, rtol=self.rtol)
        if gx < g(f[j]):
            f[j] = x

    def _shift_table(self, f, j, last):
        """Tables for the shift of ``f_{j+1..last}`` when ``f_j`` moves by ``d``.

        With fixed durations, job ``k`` moves by ``max(0, d - G_k)`` for
        ``d >= 0`` (``G_k`` = idle gaps between ``j`` and ``k``) and by
        ``max(d, -M_k)`` for ``d < 0`` (``M_k`` = least overlap ``f_{i-1} - a_i``
        on the way).  Both are monotone in ``k``, so sums over ``k`` reduce to
        a bisection plus prefix sums.
        """
        a = self.a
        G, M = [], []
        g = 0.0
        m = math.inf
        prev = f[j]
        for k in range(j + 1, last + 1):
            g += max(0.0, a[k] - prev)
            m = min(m, max(0.0, prev - a[k]))
            G.append(g)
            M.append(-m)
            prev = f[k]
        pG = [0.0]
        for x in G:
            pG.append(pG[-1] + x)
        pM = [0.0]
        for x in M:
            pM.append(pM[-1] + x)
        return G, pG, M, pM

    @staticmethod
    def _total_shift(d, G, pG, M, pM):
        if d >= 0:
            i = bisect.bisect_left(G, d)
            return i * d - pG[i]
        i = bisect.bisect_right(M, d)
        return i * d + pM[-1] - pM[i]

    def move_duration(self, f, j):
        """Optimise ``tau_j`` with later durations fixed (later jobs shift)."""
        K, E, a, n = self.K, self.E, self.a, self.n
        st = self.start(f, j)
        tau0 = f[j] - st
        G, pG, M, pM = self._shift_table(f, j, n - 1)
        shift = self._total_shift

        def g(tau):
            d = tau - tau0
            return d + shift(d, G, pG, M, pM) + K * E(tau)

        lo, hi = self.tmin, self.tstar
        if hi <= lo:
            return
        tau, gt = golden_section(g, lo, hi, rtol=self.rtol)
        if gt < g(tau0):
            self._apply_shift(f, j, n - 1, st + tau)

    def _apply_shift(self, f, j, last, fj):
        a = self.a
        taus = [f[k] - self.start(f, k) for k in range(j + 1, last + 1)]
        prev = f[j] = fj
        for i, tk in enumerate(taus, start=1):
            prev = max(a[j + i], prev) + tk
            f[j + i] = prev

    def period_end(self, f, j):
        """Last job of the busy stretch containing ``j``."""
        k = j
        while k + 1 < self.n and f[k] > self.a[k + 1] + TIME_TOL:
            k += 1
        return k

    def move_exchange(self, f, j):
        """Trade service time between job ``j`` and the last job ``e`` of its
        busy stretch, holding ``f_e`` (and everything after) fixed."""
        K, E, a = self.K, self.E, self.a
        e = self.period_end(f, j)
        # a stretch ending strictly before the next release is already
        # handled by duration moves
        if e == j or e == self.n - 1 or a[e + 1] - f[e] > 1e-6 * max(1.0, a[e + 1]):
            return
        st = self.start(f, j)
        tau0 = f[j] - st
        fe = f[e]
        G, pG, M, pM = self._shift_table(f, j, e - 1)
        shift = self._total_shift
        f_before_e = f[e - 1]

        def g(tau):
            d = tau - tau0
            if e - 1 == j:
                d_last = d
            elif d >= 0:
                d_last = max(0.0, d - G[-1])
            else:
                d_last = max(d, M[-1])
            return (d + shift(d, G, pG, M, pM) + K * E(tau)
                    + K * E(fe - max(a[e], f_before_e + d_last)))

        lo = self.tmin
        hi = min(self.tstar, tau0 + (fe - self.start(f, e)))
        if hi <= lo:
            return
        tau, gt = golden_section(g, lo, hi, rtol=self.rtol)
        if gt < g(tau0):
            self._apply_shift(f, j, e - 1, st + tau)


def enhanced_opt(trace: Trace, pf: PowerFunction, *, rtol: float = 1e-9,
                 sweep_tol: float = 1e-10, max_sweeps: int = 100_000) -> OptSchedule:
    """Cost-minimising FIFO schedule on one virtual server with K-fold energy.

    Cyclic coordinate descent alternating two coordinate families: single
    finish times, and single service durations (which shift later jobs).
    Each coordinate is a convex one-dimensional problem solved by golden
    section; iteration stops once a full sweep gains less than
    ``sweep_tol`` relative.
    """
    n, K = trace.n, trace.servers
    if n == 0:
        return OptSchedule(trace, pf, [], [], 0.0, 0)
    solver = _Solver(trace.arrivals, K, pf, rtol)
    f = solver.initial()
    J = solver.objective(f)
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        for j in range(n):
            solver.move_duration(f, j)
        for j in range(n):
            solver.move_exchange(f, j)
        for j in range(n - 1, -1, -1):
            solver.move_finish(f, j)
        J_new = solver.objective(f)
        gain = J - J_new
        J = J_new
        if gain < sweep_tol * J:
            break
    starts = [solver.start(f, j) for j in range(n)]
    return OptSchedule(trace, pf, starts, list(f), J, sweeps)


def empirical_ratios(trace: Trace, pf: PowerFunction, alg_cost: float,
                     opt: Optional[OptSchedule] = None) -> dict:
    """Instance ratios of an online cost against both offline lower bounds.

    Both denominators lower-bound the true optimum, so each ratio is an
    upper bound on the instance's competitive ratio.
    """
    n, K = trace.n, trace.servers
    if n == 0:
        return {"vs_opt_e": None, "vs_closed_form": None, "finalbound_slack": 0.0 - alg_cost,
                "opt_e": 0.0, "closed_form": 0.0}
    if opt is None:
        opt = enhanced_opt(trace, pf)
    lb = closed_form_lb(n, K, pf)
    if opt.cost <= 0 or lb <= 0:
        raise ZeroDivisionError("lower bound vanished on a nonempty trace")
    bound = 6.0 * opt.cost + 12.0 * pf.delta(1.0) * n * K
    return {
        "vs_opt_e": alg_cost / opt.cost,
        "vs_closed_form": alg_cost / lb,
        "finalbound_slack": bound - alg_cost,
        "opt_e": opt.cost,
        "closed_form": lb,
    }


def worst_case_ratio_bound(pf: PowerFunction) -> float:
    """``6 + 12 * delta(1) / P'(s*)``; equals 18 for ``P(s) = s**2``."""
    return 6.0 + 12.0 * pf.delta(1.0) / pf.per_job_opt_cost()
