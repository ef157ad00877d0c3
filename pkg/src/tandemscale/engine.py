"""Event-driven simulator for K tandem servers processing unit jobs.

Between events every server works its head-of-line job at the speed chosen
by the policy; the next event time is found analytically.  Events at the
same instant are handled downstream-first (server K, K-1, ..., 1), then
external arrivals, so a job never crosses two servers in one instant.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .power import PowerFunction
from .workload import Trace

MERGE_TOL = 1e-12
MAX_EVENTS = 10_000_000


class SimulationError(RuntimeError):
    """The run could not be completed (policy misbehaviour or runaway)."""


class PolicyContractError(SimulationError):
    """The policy returned an invalid speed vector."""


class InvariantError(SimulationError):
    """A structural property that must hold during a run was violated."""


@dataclass(frozen=True)
class Event:
    time: float
    kind: str  # "arrival" | "transfer" | "departure" | "speed"
    job: int  # -1 for speed events
    server: int  # 0-based; transfer k means k -> k+1


@dataclass(frozen=True)
class Epoch:
    """Interval ``[t0, t1)`` of constant speeds and queue contents.

    ``rem0`` holds each server's head-job remaining work at ``t0``
    (0.0 for an empty server).
    """

    t0: float
    t1: float
    counts: tuple
    rem0: tuple
    speeds: tuple

    def remaining(self, t: float) -> tuple:
        dt = t - self.t0
        return tuple(max(0.0, r - s * dt) if n else 0.0
                     for r, s, n in zip(self.rem0, self.speeds, self.counts))


class SystemState:
    """Live state of the tandem network during a run.

    Server indices are 0-based: server 0 receives external arrivals.
    ``pieces[j][k]`` lists the ``(t0, t1, speed)`` service pieces job ``j``
    received on server ``k``.
    """

    def __init__(self, K: int, arrivals):
        self.K = K
        self.clock = 0.0
        self.arrivals = arrivals
        self.queues = [deque() for _ in range(K)]
        self.head_rem = [0.0] * K
        self.pieces: dict[int, list[list[tuple]]] = {}

    @property
    def counts(self) -> tuple:
        return tuple(len(q) for q in self.queues)

    def head(self, k: int) -> Optional[int]:
        q = self.queues[k]
        return q[0] if q else None

    @property
    def outstanding(self) -> int:
        return sum(len(q) for q in self.queues)


@dataclass
class CostReport:
    flow_time: float
    energy: float

    @property
    def total(self) -> float:
        return self.flow_time + self.energy

    def as_dict(self) -> dict:
        return {"flow_time": self.flow_time, "energy": self.energy, "total": self.total}


@dataclass
class Trajectory:
    """Full record of a simulation run."""

    trace: Trace
    power: PowerFunction
    policy: str
    events: list = field(default_factory=list)
    epochs: list = field(default_factory=list)
    finish: list = field(default_factory=list)
    pieces: dict = field(default_factory=dict)
    flow_integral: float = 0.0
    energy: float = 0.0
    complete: bool = False

    @property
    def K(self) -> int:
        return self.trace.servers

    @property
    def n(self) -> int:
        return self.trace.n

    @property
    def end_time(self) -> float:
        return self.epochs[-1].t1 if self.epochs else 0.0

    def segments(self) -> list:
        """Piecewise-constant speed segments ``(t0, t1, speeds)``, merged."""
        out: list = []
        for ep in self.epochs:
            if ep.t1 <= ep.t0:
                continue
            if out and out[-1][2] == ep.speeds and out[-1][1] == ep.t0:
                out[-1] = (out[-1][0], ep.t1, ep.speeds)
            else:
                out.append((ep.t0, ep.t1, ep.speeds))
        return out

    def epoch_at(self, t: float) -> Epoch:
        """Epoch whose half-open interval contains ``t`` (binary search)."""
        lo, hi = 0, len(self.epochs) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.epochs[mid].t0 <= t:
                lo = mid
            else:
                hi = mid - 1
        return self.epochs[lo]

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "policy": self.policy,
            "power": self.power.to_dict(),
            "arrivals": list(self.trace.arrivals),
            "finish": list(self.finish),
            "events": [[e.time, e.kind, e.job, e.server] for e in self.events],
            "segments": [[t0, t1, list(s)] for t0, t1, s in self.segments()],
            "cost": cost(self).as_dict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def cost(traj: Trajectory) -> CostReport:
    """Flow time plus energy of a completed run."""
    if not traj.complete:
        raise SimulationError("trajectory is incomplete")
    flow = math.fsum(f - a for f, a in zip(traj.finish, traj.trace.arrivals))
    return CostReport(flow, traj.energy)


def simulate(trace: Trace, policy, *, check_invariants: bool = True,
             max_events: int = MAX_EVENTS) -> Trajectory:
    """Run ``policy`` on ``trace`` until every job has left server K.

    ``policy`` must provide ``speeds(state) -> sequence`` and may provide
    ``breakpoints(state, speeds)`` (per-server remaining-work thresholds at
    which it wants to be re-queried) and ``check(state, speeds)``.
    """
    K = trace.servers
    arr = trace.arrivals
    n = len(arr)
    pf = policy.power
    state = SystemState(K, arr)
    traj = Trajectory(trace, pf, getattr(policy, "name", type(policy).__name__))
    finish = [math.nan] * n
    events = traj.events
    breakpoints = getattr(policy, "breakpoints", None)
    checker = getattr(policy, "check", None) if check_invariants else None

    next_arr = 0
    t = 0.0
    if n:
        t = arr[0]
    speeds = (0.0,) * K
    seg_start = {}  # (job, server) -> time service piece opened

    def open_pieces(at):
        for k in range(K):
            if speeds[k] > 0:
                seg_start[k] = at

    while True:
        # -- apply everything due at time t ------------------------------
        # completions were already popped at the end of the previous step;
        # arrivals are admitted here
        while next_arr < n and arr[next_arr] <= t + MERGE_TOL:
            j = next_arr
            state.queues[0].append(j)
            state.pieces[j] = [[] for _ in range(K)]
            if len(state.queues[0]) == 1:
                state.head_rem[0] = 1.0
            events.append(Event(t, "arrival", j, 0))
            next_arr += 1
            if len(events) > max_events:
                raise SimulationError(f"event limit {max_events} exceeded at t={t}")

        state.clock = t
        new_speeds = tuple(float(s) for s in policy.speeds(state))
        if len(new_speeds) != K:
            raise PolicyContractError(f"policy returned {len(new_speeds)} speeds for {K} servers")
        for k, s in enumerate(new_speeds):
            if not (s >= 0 and math.isfinite(s)):
                raise PolicyContractError(f"server {k}: invalid speed {s}")
            if s > 0 and not state.queues[k]:
                raise PolicyContractError(f"server {k}: positive speed {s} on an empty server")
            if pf.speed_cap is not None and s > pf.speed_cap * (1 + 1e-12):
                raise PolicyContractError(f"server {k}: speed {s} above cap {pf.speed_cap}")
        if checker is not None:
            checker(state, new_speeds)
        if new_speeds != speeds:
            events.append(Event(t, "speed", -1, -1))
        speeds = new_speeds

        if state.outstanding == 0 and next_arr >= n:
            traj.epochs.append(Epoch(t, t, state.counts, tuple(state.head_rem), speeds))
            break

        # -- next event time ---------------------------------------------
        dt = math.inf
        if next_arr < n:
            dt = arr[next_arr] - t
        thresholds = breakpoints(state, speeds) if breakpoints is not None else None
        for k in range(K):
            s = speeds[k]
            if s > 0:
                dt = min(dt, state.head_rem[k] / s)
                if thresholds is not None and thresholds[k] is not None:
                    dt = min(dt, (state.head_rem[k] - thresholds[k]) / s)
        if not math.isfinite(dt):
            raise SimulationError(f"deadlock at t={t}: jobs outstanding but all speeds zero")
        dt = max(dt, 0.0)
        t_next = t + dt

        traj.epochs.append(Epoch(t, t_next, state.counts, tuple(state.head_rem), speeds))
        # -- advance ------------------------------------------------------
        traj.flow_integral += state.outstanding * dt
        traj.energy += math.fsum(pf.eval(s) for s in speeds if s > 0) * dt
        completing = []
        for k in range(K):
            s = speeds[k]
            if s <= 0:
                continue
            j = state.queues[k][0]
            state.pieces[j][k].append((t, t_next, s))
            due = state.head_rem[k] / s
            if due - dt <= MERGE_TOL:
                state.head_rem[k] = 0.0
                completing.append(k)
                continue
            rem = state.head_rem[k] - s * dt
            if thresholds is not None and thresholds[k] is not None:
                if (state.head_rem[k] - thresholds[k]) / s - dt <= MERGE_TOL:
                    rem = thresholds[k]
            state.head_rem[k] = rem
        t = t_next

        # -- completions, downstream first ----------------------------------
        for k in sorted(completing, reverse=True):
            j = state.queues[k].popleft()
            if k == K - 1:
                finish[j] = t
                events.append(Event(t, "departure", j, k))
            else:
                state.queues[k + 1].append(j)
                if len(state.queues[k + 1]) == 1:
                    state.head_rem[k + 1] = 1.0
                events.append(Event(t, "transfer", j, k))
            state.head_rem[k] = 1.0 if state.queues[k] else 0.0
        if len(events) > max_events:
            raise SimulationError(f"event limit {max_events} exceeded at t={t}")

    traj.finish = finish
    traj.pieces = state.pieces
    traj.complete = True
    return traj
