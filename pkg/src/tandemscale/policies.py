"""Speed policies for the tandem network.

``proposed_speeds`` runs server 1 and every busy downstream server at the
common speed ``P^{-1}((n1 + A + 1) / (A + 1))``, where ``n1`` is the queue
length at server 1 and ``A`` the number of busy servers among 2..K.  The two
baselines extend the single-server rule ``P^{-1}(n + 1)`` naively: each
server on its own queue length (autonomous), or downstream servers
replaying the speed profile a job saw on server 1 (replication).
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

from .engine import InvariantError, SystemState
from .power import PowerFunction

_WORK_TOL = 1e-12


def proposed_speeds(counts: Sequence[int], pf: PowerFunction) -> list[float]:
    n1 = counts[0]
    active = [k for k in range(1, len(counts)) if counts[k] > 0]
    A = len(active)
    out = [0.0] * len(counts)
    if n1 > 0:
        s = pf.inverse((n1 + A + 1) / (A + 1))
        out[0] = s
    else:
        s = pf.inverse(2.0)
    for k in active:
        out[k] = s
    return out


def autonomous_speeds(counts: Sequence[int], pf: PowerFunction) -> list[float]:
    return [pf.inverse(n + 1) if n > 0 else 0.0 for n in counts]


class SpeedPolicy:
    """Base class: maps the live system state to one speed per server."""

    name = "base"

    def __init__(self, power: PowerFunction):
        self.power = power

    def speeds(self, state: SystemState) -> list[float]:
        raise NotImplementedError

    def breakpoints(self, state: SystemState, speeds) -> Optional[list]:
        return None

    def check(self, state: SystemState, speeds) -> None:
        pass


class ProposedPolicy(SpeedPolicy):
    name = "proposed"

    def speeds(self, state):
        return proposed_speeds(state.counts, self.power)

    def check(self, state, speeds):
        counts = state.counts
        for k in range(1, len(counts)):
            if counts[k] > 1:
                raise InvariantError(
                    f"t={state.clock}: server {k + 1} holds {counts[k]} jobs")
        if self.power.speed_cap is not None:
            return
        A = sum(1 for c in counts[1:] if c > 0)
        total = math.fsum(self.power.eval(s) for s in speeds if s > 0)
        expected = counts[0] + A + 1 if counts[0] > 0 else 2 * A
        if abs(total - expected) > 1e-9 * max(1.0, expected):
            raise InvariantError(
                f"t={state.clock}: total power {total} != {expected}")


class AutonomousPolicy(SpeedPolicy):
    name = "autonomous"

    def speeds(self, state):
        return autonomous_speeds(state.counts, self.power)


class ReplicationPolicy(SpeedPolicy):
    """Server 1 uses ``P^{-1}(n1 + 1)``; servers 2..K replay each job's
    server-1 speed profile, indexed by work done, from the moment the job
    reaches the head of their queue."""

    name = "replication"

    def _profile_speed(self, state, k):
        """Replay speed for server ``k``'s head job and the remaining-work
        level at which the replayed profile changes speed (or None)."""
        j = state.queues[k][0]
        profile = state.pieces[j][0]
        if not profile:
            raise InvariantError(f"job {j} reached server {k + 1} without a server-1 profile")
        done = 1.0 - state.head_rem[k]
        cum = 0.0
        for idx, (t0, t1, s) in enumerate(profile):
            cum += s * (t1 - t0)
            if cum - done > _WORK_TOL:
                if idx == len(profile) - 1:
                    return s, None
                return s, 1.0 - cum
        if abs(cum - 1.0) > 1e-9:
            raise InvariantError(f"job {j}: incomplete server-1 profile (work {cum})")
        return profile[-1][2], None

    def speeds(self, state):
        counts = state.counts
        out = [0.0] * len(counts)
        if counts[0] > 0:
            out[0] = self.power.inverse(counts[0] + 1)
        for k in range(1, len(counts)):
            if counts[k] > 0:
                out[k] = self._profile_speed(state, k)[0]
        return out

    def breakpoints(self, state, speeds):
        out: list = [None] * len(speeds)
        for k in range(1, len(speeds)):
            if state.queues[k]:
                out[k] = self._profile_speed(state, k)[1]
        return out


POLICIES = {
    "proposed": ProposedPolicy,
    "autonomous": AutonomousPolicy,
    "replication": ReplicationPolicy,
}


def make_policy(name: str, power: PowerFunction) -> SpeedPolicy:
    try:
        return POLICIES[name](power)
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
