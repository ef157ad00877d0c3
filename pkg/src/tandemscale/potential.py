"""Potential function for the tandem speed-scaling analysis, and auditors.

For the algorithm's state (queue lengths ``n^k`` and head-job remaining work
per server) and the relaxed optimum's first-server state, the potential is

    Phi = K * Phi_1 + sum_{j=2..K} Phi_j^ALG

    Phi_1       = c  * int_0^1 F_K( max(0, n^1(q) - n_o(q)) ) dq
    Phi_j^ALG   = c_j * int_0^1 F_{A+1}( sum_{k=2}^{j-1} n^k + n^j(q) ) dq

with ``F_a(m) = sum_{i=1..m} delta(i / a)`` and ``n(q)`` the number of jobs
with remaining work at least ``q``.  Every integrand is piecewise constant
in ``q`` with breakpoints at head-job remaining sizes, so the integrals are
exact finite sums.

Server indices are 0-based: server 0 receives external arrivals.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .engine import Epoch, Trajectory
from .offline import OptSchedule
from .power import PowerFunction

TIME_TOL = 1e-12
DEFAULT_C = 6.0
# shorter intervals leave a difference step near machine resolution
MIN_INTERVAL = 1e-9


class AuditError(ValueError):
    """Inputs to an audit are inconsistent (different traces, not drained)."""


class FTable:
    """Cached partial sums ``F_a(m) = sum_{i<=m} delta(i/a)`` per base ``a``."""

    def __init__(self, pf: PowerFunction):
        self.pf = pf
        self._tables: dict[int, list] = {}

    def __call__(self, m: int, a: int) -> float:
        if m <= 0:
            return 0.0
        tab = self._tables.get(a)
        if tab is None or len(tab) <= m:
            size = max(m + 1, 2 * len(tab) if tab else 64)
            d = [self.pf.delta(i / a) for i in range(1, size)]
            tab = [0.0]
            tab.extend(np.cumsum(d).tolist())
            self._tables[a] = tab
        return tab[m]


# ----------------------------------------------------------------------
# snapshot states
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class AlgState:
    counts: tuple
    rem: tuple  # head remaining work per server (0 when empty)


@dataclass(frozen=True)
class OptState:
    count: int
    rem: float  # head remaining work (1.0 for jobs not yet started)


def _count_at(count: int, rem: float, q: float) -> int:
    """Jobs with remaining work >= q given ``count`` jobs, only the head partial."""
    if count <= 0:
        return 0
    return count - 1 + (1 if q <= rem else 0)


def phi1(alg: AlgState, opt: OptState, pf: PowerFunction, c: float = DEFAULT_C,
         K: Optional[int] = None, table: Optional[FTable] = None) -> float:
    """First-server term: ``c * int_0^1 F_K(max(0, n^1(q) - n_o(q))) dq``."""
    K = len(alg.counts) if K is None else K
    F = table or FTable(pf)
    n1, r1 = alg.counts[0], alg.rem[0]
    no, ro = opt.count, opt.rem
    cuts = sorted({0.0, 1.0, min(1.0, max(0.0, r1)), min(1.0, max(0.0, ro))})
    total = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        if hi <= lo:
            continue
        q = hi  # integrand is left-open/right-closed constant: n(q) counts rem >= q
        m = _count_at(n1, r1, q) - _count_at(no, ro, q)
        if m > 0:
            total += (hi - lo) * F(m, K)
    return c * total


def phi_alg(alg: AlgState, pf: PowerFunction, j: int, c_j: float = DEFAULT_C,
            table: Optional[FTable] = None) -> float:
    """Downstream term for 0-based server ``j >= 1``."""
    if j < 1:
        raise ValueError("phi_alg is defined for downstream servers only")
    F = table or FTable(pf)
    counts = alg.counts
    A = sum(1 for k in range(1, len(counts)) if counts[k] > 0)
    base = A + 1
    upstream = sum(counts[1:j])
    nj = counts[j]
    if nj == 0:
        return c_j * F(upstream, base)
    r = min(1.0, max(0.0, alg.rem[j]))
    return c_j * (r * F(upstream + nj, base) + (1.0 - r) * F(upstream + nj - 1, base))


@dataclass(frozen=True)
class PotentialSnapshot:
    time: float
    phi1: float
    phi_alg: tuple  # one entry per downstream server 2..K
    A: int
    ranks: tuple  # r_i for each downstream server (0 when inactive)

    @property
    def K(self) -> int:
        return len(self.phi_alg) + 1

    @property
    def total(self) -> float:
        # Phi_1 enters every server's term
        return self.K * self.phi1 + math.fsum(self.phi_alg)


def snapshot(t: float, alg: AlgState, opt: OptState, pf: PowerFunction,
             c: float = DEFAULT_C, table: Optional[FTable] = None) -> PotentialSnapshot:
    F = table or FTable(pf)
    K = len(alg.counts)
    p1 = phi1(alg, opt, pf, c, K, F)
    palg = tuple(phi_alg(alg, pf, j, c, F) for j in range(1, K))
    ranks = []
    r = 0
    for k in range(1, K):
        if alg.counts[k] > 0:
            r += 1
            ranks.append(r)
        else:
            ranks.append(0)
    return PotentialSnapshot(t, p1, palg, r, tuple(ranks))


def potential(alg: AlgState, opt: OptState, pf: PowerFunction, c: float = DEFAULT_C,
              table: Optional[FTable] = None) -> float:
    return snapshot(0.0, alg, opt, pf, c, table).total


# ----------------------------------------------------------------------
# merged replay of the algorithm's trajectory and the relaxed optimum
# ----------------------------------------------------------------------
def _alg_state_in(epoch: Epoch, t: float) -> AlgState:
    return AlgState(epoch.counts, epoch.remaining(t))


def _opt_state(opt: OptSchedule, t: float, side: str = "post",
               arrived: Optional[int] = None) -> tuple:
    count, rem, speed = opt.state(t, side, arrived)
    return OptState(count, rem if count else 0.0), speed


def _check_pair(alg: Trajectory, opt: OptSchedule):
    if not alg.complete:
        raise AuditError("algorithm trajectory did not run to an empty system")
    if alg.trace.arrivals != opt.trace.arrivals or alg.K != opt.K:
        raise AuditError("trajectory and schedule were built for different traces")
    if any(math.isnan(f) for f in alg.finish):
        raise AuditError("algorithm trajectory has unfinished jobs")


def _timeline(alg: Trajectory, opt: OptSchedule) -> list:
    times = sorted(set(e.time for e in alg.events) | set(opt.event_times()))
    merged: list = []
    for t in times:
        if merged and t - merged[-1] <= TIME_TOL:
            continue
        merged.append(t)
    return merged


@dataclass
class Violation:
    time: float
    lhs: float
    rhs: float
    check: str = "running"

    def as_dict(self):
        return {"time": self.time, "lhs": self.lhs, "rhs": self.rhs, "check": self.check}


@dataclass
class AuditReport:
    """Outcome of the drift audit at inter-event midpoints."""

    c: float
    samples: int = 0
    skipped: int = 0  # intervals too short to difference in floating point
    violations: list = field(default_factory=list)
    component_violations: list = field(default_factory=list)
    worst_margin: float = math.inf  # min over samples of rhs + tol - lhs

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "check": "drift",
            "c": self.c,
            "passed": self.passed,
            "samples": self.samples,
            "skipped": self.skipped,
            "violations": len(self.violations),
            "worst_margin": None if math.isinf(self.worst_margin) else self.worst_margin,
            "violation_list": [v.as_dict() for v in self.violations],
            "component_violations": [v.as_dict() for v in self.component_violations],
        }


def audit_drift(alg: Trajectory, opt: OptSchedule, pf: Optional[PowerFunction] = None,
                c: float = DEFAULT_C, rel_step: float = 1e-3,
                slack: float = 1e-6) -> AuditReport:
    """Check ``n + sum P(s_k) + dPhi/dt <= c (n_o + K P(s_o))`` between events.

    At the midpoint of every maximal event-free interval of either
    trajectory, ``dPhi/dt`` is a central difference with step
    ``rel_step`` times the interval length.  Also checks the per-term drift
    bounds: ``dPhi_1/dt <= c (P(s_o) - (n^1 - n_o)/K)`` when ``n_o < n^1``,
    ``<= 0`` when ``n_o > n^1``, and
    ``dPhi_i^ALG/dt <= -c r_i / (A + 1)`` for every busy downstream server.
    """
    pf = pf or alg.power
    _check_pair(alg, opt)
    report = AuditReport(c)
    if alg.n == 0:
        return report
    F = FTable(pf)
    K = alg.K
    times = _timeline(alg, opt)
    for t0, t1 in zip(times, times[1:]):
        if t1 - t0 <= TIME_TOL:
            continue
        mid = 0.5 * (t0 + t1)
        if t1 - t0 < MIN_INTERVAL * max(1.0, abs(mid)):
            report.skipped += 1
            continue
        h = rel_step * (t1 - t0)
        ep = alg.epoch_at(mid)
        a_lo, a_hi = _alg_state_in(ep, mid - h), _alg_state_in(ep, mid + h)
        o_mid, s_o = _opt_state(opt, mid)
        o_lo, _ = _opt_state(opt, mid - h)
        o_hi, _ = _opt_state(opt, mid + h)
        snap_lo = snapshot(mid - h, a_lo, o_lo, pf, c, F)
        snap_hi = snapshot(mid + h, a_hi, o_hi, pf, c, F)
        dphi = (snap_hi.total - snap_lo.total) / (2 * h)

        n_alg = sum(ep.counts)
        power_alg = math.fsum(pf.eval(s) for s in ep.speeds if s > 0)
        power_opt = K * pf.eval(s_o) if s_o > 0 else 0.0
        lhs = n_alg + power_alg + dphi
        rhs = c * (o_mid.count + power_opt)
        tol = slack * (1.0 + abs(rhs))
        report.samples += 1
        report.worst_margin = min(report.worst_margin, rhs + tol - lhs)
        if lhs > rhs + tol:
            report.violations.append(Violation(mid, lhs, rhs))

        # per-term bounds
        n1, no = ep.counts[0], o_mid.count
        d1 = (snap_hi.phi1 - snap_lo.phi1) / (2 * h)
        p_o = pf.eval(s_o) if s_o > 0 else 0.0
        tol1 = slack * (1.0 + c * (no + n1 + p_o))
        if no < n1:
            bound = c * (p_o - (n1 - no) / K)
            if d1 > bound + tol1:
                report.component_violations.append(Violation(mid, d1, bound, "phi1"))
        elif no > n1 and d1 > tol1:
            report.component_violations.append(Violation(mid, d1, 0.0, "phi1"))
        A = snap_lo.A
        for idx, r in enumerate(snap_lo.ranks):
            if r == 0:
                continue
            dj = (snap_hi.phi_alg[idx] - snap_lo.phi_alg[idx]) / (2 * h)
            bound = -c * r / (A + 1)
            if dj > bound + slack * (1.0 + abs(bound)):
                report.component_violations.append(
                    Violation(mid, dj, bound, f"phi_alg[{idx + 2}]"))
    return report


@dataclass
class Jump:
    time: float
    kind: str  # "arrival" | "transfer" | "departure" | "opt-finish"
    server: int
    increase: float
    phi1_increase: float
    phi_alg_increase: tuple

    def as_dict(self):
        return {"time": self.time, "kind": self.kind, "server": self.server,
                "increase": self.increase}


@dataclass
class JumpReport:
    c: float
    n: int
    K: int
    delta1: float
    jumps: list = field(default_factory=list)
    boundary_ok: bool = True
    failures: list = field(default_factory=list)

    @property
    def total_positive(self) -> float:
        return math.fsum(max(0.0, j.increase) for j in self.jumps)

    @property
    def budget(self) -> float:
        return 2.0 * self.c * self.n * self.K * self.delta1

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {
            "check": "jumps",
            "c": self.c,
            "passed": self.passed,
            "total_positive": self.total_positive,
            "budget": self.budget,
            "boundary_ok": self.boundary_ok,
            "events": len(self.jumps),
            "max_single": max((j.increase for j in self.jumps), default=0.0),
            "failures": self.failures,
        }


def _apply_alg_event(counts: list, rem: list, kind: str, server: int) -> None:
    K = len(counts)
    if kind == "arrival":
        counts[0] += 1
        if counts[0] == 1:
            rem[0] = 1.0
        return
    k = server
    counts[k] -= 1
    rem[k] = 1.0 if counts[k] else 0.0
    if kind == "transfer":
        counts[k + 1] += 1
        if counts[k + 1] == 1:
            rem[k + 1] = 1.0
    elif k != K - 1:
        raise AuditError(f"departure from non-final server {k}")


def audit_jumps(alg: Trajectory, opt: OptSchedule, pf: Optional[PowerFunction] = None,
                c: float = DEFAULT_C, tol: float = 1e-9) -> JumpReport:
    """Replay every discontinuity of ``Phi`` one atomic event at a time.

    At a shared timestamp the algorithm's completions (downstream first) are
    applied, then the relaxed optimum's completions, then external arrivals,
    which reach both systems together.
    """
    pf = pf or alg.power
    _check_pair(alg, opt)
    K, n = alg.K, alg.n
    rep = JumpReport(c, n, K, pf.delta(1.0))
    if n == 0:
        return rep
    F = FTable(pf)
    times = _timeline(alg, opt)
    arrived = 0
    ei = 0
    events = alg.events

    for t in times:
        # left limit at t
        ep = alg.epoch_at(t - TIME_TOL) if t > alg.epochs[0].t0 else alg.epochs[0]
        if t <= alg.epochs[0].t0:
            counts = [0] * K
            rem = [0.0] * K
        else:
            st = _alg_state_in(ep, t)
            counts, rem = list(st.counts), list(st.rem)
        ostate, _ = _opt_state(opt, t, "pre", arrived)
        cur = snapshot(t, AlgState(tuple(counts), tuple(rem)), ostate, pf, c, F)
        if arrived == 0 and abs(cur.total) > tol:
            rep.boundary_ok = False
            rep.failures.append(f"t={t}: Phi={cur.total} before first arrival")

        batch = []
        while ei < len(events) and events[ei].time <= t + TIME_TOL:
            if events[ei].kind != "speed":
                batch.append(events[ei])
            ei += 1
        alg_moves = [e for e in batch if e.kind in ("transfer", "departure")]
        arrivals = [e for e in batch if e.kind == "arrival"]

        def step(kind, server, new_alg, new_opt):
            nonlocal cur
            nxt = snapshot(t, new_alg, new_opt, pf, c, F)
            inc = nxt.total - cur.total
            rep.jumps.append(Jump(t, kind, server, inc, nxt.phi1 - cur.phi1,
                                  tuple(b - a for a, b in zip(cur.phi_alg, nxt.phi_alg))))
            cur = nxt

        for e in alg_moves:
            _apply_alg_event(counts, rem, e.kind, e.server)
            step(e.kind, e.server, AlgState(tuple(counts), tuple(rem)), ostate)
        post_opt, _ = _opt_state(opt, t, "post", arrived)
        if post_opt != ostate:
            step("opt-finish", 0, AlgState(tuple(counts), tuple(rem)), post_opt)
            ostate = post_opt
        for e in arrivals:
            _apply_alg_event(counts, rem, "arrival", 0)
            arrived += 1
            ostate, _ = _opt_state(opt, t, "post", arrived)
            step("arrival", 0, AlgState(tuple(counts), tuple(rem)), ostate)
        if tuple(counts) != alg.epoch_at(t + TIME_TOL).counts:
            raise AuditError(f"t={t}: replayed queues {counts} disagree with the trajectory")

    # boundary: empty after the last departure
    end_alg = AlgState(tuple([0] * K), tuple([0.0] * K))
    end_opt, _ = _opt_state(opt, max(times[-1], opt.finishes[-1]) + 1.0, "post", n)
    final = snapshot(times[-1], end_alg, end_opt, pf, c, F).total
    if abs(final) > tol:
        rep.boundary_ok = False
        rep.failures.append(f"Phi={final} after all jobs finished")

    d1 = rep.delta1
    if rep.total_positive > rep.budget + tol:
        rep.failures.append(f"total jump {rep.total_positive} exceeds budget {rep.budget}")
    for j in rep.jumps:
        if j.kind == "arrival" and abs(j.increase) > tol * max(1.0, abs(cur.total)):
            rep.failures.append(f"t={j.time}: arrival moved Phi by {j.increase}")
        if j.increase > c * d1 * K + tol:
            rep.failures.append(f"t={j.time}: single jump {j.increase} > c*K*delta(1)")
        if j.kind == "transfer":
            for idx, inc in enumerate(j.phi_alg_increase):
                if inc > c * d1 + tol:
                    rep.failures.append(
                        f"t={j.time}: transfer raised Phi_{idx + 2}^ALG by {inc} > c*delta(1)")
        if j.kind == "departure" and j.increase > c * d1 * K + tol:
            rep.failures.append(f"t={j.time}: departure jump {j.increase} > c*K*delta(1)")
        if j.kind == "opt-finish" and abs(j.increase) > tol:
            rep.failures.append(f"t={j.time}: optimum completion moved Phi by {j.increase}")
    return rep


@dataclass
class IntegratedCheck:
    alg_cost: float
    opt_cost: float
    n: int
    K: int
    delta1: float

    @property
    def bound(self) -> float:
        return 6.0 * self.opt_cost + 12.0 * self.delta1 * self.n * self.K

    @property
    def slack(self) -> float:
        return self.bound - self.alg_cost

    @property
    def passed(self) -> bool:
        return self.alg_cost <= self.bound + 1e-6 * max(1.0, self.bound)

    def as_dict(self) -> dict:
        return {"check": "integrated", "passed": self.passed, "alg_cost": self.alg_cost,
                "opt_e_cost": self.opt_cost, "bound": self.bound, "slack": self.slack}


def audit_integrated(alg: Trajectory, opt: OptSchedule,
                     pf: Optional[PowerFunction] = None) -> IntegratedCheck:
    """``C_alg <= 6 C_opt_e + 12 delta(1) n K``."""
    from .engine import cost

    pf = pf or alg.power
    _check_pair(alg, opt)
    return IntegratedCheck(cost(alg).total, opt.cost, alg.n, alg.K, pf.delta(1.0))


def rank_sum(A: int) -> float:
    """``sum_{l=1..A} l / (A + 1)``; equals ``A / 2``."""
    return math.fsum(l / (A + 1) for l in range(1, A + 1))


def audit_all(alg: Trajectory, opt: OptSchedule, c: float = DEFAULT_C) -> dict:
    drift = audit_drift(alg, opt, c=c)
    jumps = audit_jumps(alg, opt, c=c)
    integ = audit_integrated(alg, opt)
    return {
        "passed": drift.passed and jumps.passed and integ.passed,
        "violations": len(drift.violations) + len(jumps.failures) + (0 if integ.passed else 1),
        "drift": drift.as_dict(),
        "jumps": jumps.as_dict(),
        "integrated": integ.as_dict(),
    }
