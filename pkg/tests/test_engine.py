import math

import pytest
from hypothesis import given, settings, strategies as st

from tandemscale.engine import (MAX_EVENTS, PolicyContractError, SimulationError, Trajectory,
                                cost, simulate)
from tandemscale.policies import SpeedPolicy, make_policy
from tandemscale.power import PowerFunction
from tandemscale.workload import Trace, gen_batch

import oracles

SQ = PowerFunction(1.0, 2.0)
R2 = math.sqrt(2.0)


def run(trace, name="proposed", pf=SQ):
    return simulate(trace, make_policy(name, pf))


def test_single_job_two_servers_hand_trace():
    traj = run(gen_batch(1, 0, 2))
    kinds = [(e.kind, e.server) for e in traj.events if e.kind != "speed"]
    assert kinds == [("arrival", 0), ("transfer", 0), ("departure", 1)]
    transfer = next(e for e in traj.events if e.kind == "transfer")
    assert transfer.time == pytest.approx(1 / R2, rel=1e-14)
    assert traj.finish[0] == pytest.approx(R2, rel=1e-14)
    rep = cost(traj)
    assert rep.flow_time == pytest.approx(R2, rel=1e-14)
    assert rep.energy == pytest.approx(2 * R2, rel=1e-14)
    assert rep.total == pytest.approx(3 * R2, rel=1e-14)
    assert rep.total == pytest.approx(4.2426, abs=1e-4)


def test_single_job_single_server():
    rep = cost(run(gen_batch(1, 0, 1)))
    assert rep.total == pytest.approx(3 / R2, rel=1e-14)
    assert rep.total == pytest.approx(2.1213, abs=1e-4)


@pytest.mark.parametrize("K", [1, 2, 3, 5, 8])
def test_single_job_matches_oracle(K):
    assert cost(run(gen_batch(1, 0, K))).total == pytest.approx(
        oracles.single_job_tandem_cost(K), rel=1e-13)


def test_empty_trace_zero_cost():
    traj = run(Trace((), 3))
    assert traj.complete
    assert cost(traj).as_dict() == {"flow_time": 0.0, "energy": 0.0, "total": 0.0}


def test_disjoint_jobs_are_additive():
    single = cost(run(gen_batch(1, 0, 2))).total
    both = cost(run(Trace((0.0, 100.0), 2))).total
    assert both == pytest.approx(2 * single, rel=1e-13)


def test_incomplete_trajectory_rejected():
    with pytest.raises(SimulationError):
        cost(Trajectory(gen_batch(1, 0, 1), SQ, "x"))


class _Greedy(SpeedPolicy):
    name = "greedy"

    def speeds(self, state):
        return [1.0] * state.K


class _Negative(SpeedPolicy):
    def speeds(self, state):
        return [-1.0] * state.K


class _Frozen(SpeedPolicy):
    def speeds(self, state):
        return [0.0] * state.K


class _TooFast(SpeedPolicy):
    def speeds(self, state):
        return [5.0 if n else 0.0 for n in state.counts]


def test_policy_contract_errors():
    tr = gen_batch(1, 0, 2)
    with pytest.raises(PolicyContractError):
        simulate(tr, _Greedy(SQ))
    with pytest.raises(PolicyContractError):
        simulate(tr, _Negative(SQ))
    with pytest.raises(PolicyContractError):
        simulate(tr, _TooFast(PowerFunction(1.0, 2.0, speed_cap=2.0)))
    with pytest.raises(SimulationError):
        simulate(tr, _Frozen(SQ))


def test_event_limit_guard():
    assert MAX_EVENTS == 10_000_000
    with pytest.raises(SimulationError):
        simulate(gen_batch(20, 0, 3), make_policy("proposed", SQ), max_events=10)


traces = st.builds(
    lambda gaps, K: Trace(tuple(_cumsum(gaps)), K),
    st.lists(st.floats(0.0, 3.0), min_size=0, max_size=15),
    st.integers(1, 5),
)


def _cumsum(xs):
    out, t = [], 0.0
    for x in xs:
        t += x
        out.append(t)
    return out


@given(traces, st.sampled_from(["proposed", "autonomous", "replication"]))
@settings(max_examples=60, deadline=None)
def test_run_invariants(trace, name):
    traj = run(trace, name)
    n, K = trace.n, trace.K
    kinds = [e.kind for e in traj.events]
    assert kinds.count("arrival") == n
    assert kinds.count("transfer") == n * (K - 1)
    assert kinds.count("departure") == n
    # flow time two ways
    rep = cost(traj)
    assert rep.flow_time == pytest.approx(traj.flow_integral, rel=1e-9, abs=1e-12)
    # work conservation per job and server
    for j in range(n):
        for k in range(K):
            work = math.fsum(s * (t1 - t0) for t0, t1, s in traj.pieces[j][k])
            assert work == pytest.approx(1.0, abs=1e-9)
    # causality: transfers of a job happen in server order
    last = {}
    for e in traj.events:
        if e.kind in ("transfer", "departure"):
            assert last.get(e.job, -1) == e.server - 1
            last[e.job] = e.server
    # each job appears in at most one queue at each epoch; head remaining in [0, 1]
    for ep in traj.epochs:
        assert sum(ep.counts) <= n
        assert all(0.0 <= r <= 1.0 for r in ep.rem0)
        assert all((s == 0.0) or c > 0 for s, c in zip(ep.speeds, ep.counts))


@given(traces)
@settings(max_examples=20, deadline=None)
def test_deterministic(trace):
    a, b = run(trace), run(trace)
    assert a.dumps() == b.dumps()


def test_trajectory_json_export():
    traj = run(gen_batch(2, 0, 2))
    d = traj.to_json()
    assert d["K"] == 2 and d["policy"] == "proposed"
    assert d["cost"]["total"] == pytest.approx(cost(traj).total)
    assert len(d["segments"]) >= 2
    for t0, t1, speeds in d["segments"]:
        assert t1 > t0 and len(speeds) == 2


def test_epoch_lookup():
    traj = run(gen_batch(3, 0, 2))
    for ep in traj.epochs[:-1]:
        if ep.t1 > ep.t0:
            mid = 0.5 * (ep.t0 + ep.t1)
            assert traj.epoch_at(mid) is ep
