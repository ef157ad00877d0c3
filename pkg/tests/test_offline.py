import math

import pytest
from hypothesis import given, settings, strategies as st

from tandemscale.engine import cost, simulate
from tandemscale.offline import (OptSchedule, closed_form_lb, empirical_ratios, enhanced_opt,
                                 worst_case_ratio_bound)
from tandemscale.policies import make_policy
from tandemscale.power import PowerFunction
from tandemscale.workload import Trace, gen_batch, gen_poisson

import oracles

SQ = PowerFunction(1.0, 2.0)
CUBE = PowerFunction(1.0, 3.0)


def test_closed_form_lb():
    assert closed_form_lb(1, 2, SQ) == pytest.approx(4.0)
    assert closed_form_lb(0, 3, SQ) == 0.0
    assert closed_form_lb(10, 3, CUBE) == pytest.approx(90 * 0.5 ** (2 / 3), rel=1e-13)
    assert closed_form_lb(10, 3, CUBE) == pytest.approx(56.70, abs=5e-3)
    with pytest.raises(ValueError):
        closed_form_lb(-1, 1, SQ)


def test_single_job():
    o = enhanced_opt(gen_batch(1, 0, 1), SQ)
    assert o.cost == pytest.approx(2.0, abs=1e-6)
    assert o.finishes[0] - o.starts[0] == pytest.approx(1.0, abs=1e-4)
    o2 = enhanced_opt(gen_batch(1, 0, 2), SQ)
    assert o2.cost == pytest.approx(2 * math.sqrt(2.0), abs=1e-6)


def test_empty_trace():
    o = enhanced_opt(Trace((), 2), SQ)
    assert o.cost == 0.0 and o.starts == [] and o.finishes == []


# fixtures with n <= 3 compared against the brute-force grid
GRID_FIXTURES = [
    ((0.0,), 1), ((0.0,), 3), ((0.0, 0.0), 1), ((0.0, 0.5), 2), ((0.0, 3.0), 1),
    ((0.0, 0.0, 0.0), 1), ((0.0, 0.3, 1.2), 2), ((0.0, 0.1, 0.2), 1),
]


@pytest.mark.parametrize("arrivals,K", GRID_FIXTURES)
def test_matches_grid_search(arrivals, K):
    got = enhanced_opt(Trace(arrivals, K), SQ).cost
    assert abs(got - oracles.relaxed_cost_grid(arrivals, K)) <= 1e-2


@pytest.mark.parametrize("seed", range(6))
def test_matches_generic_convex_solver(seed):
    tr = gen_poisson(1.5, 12.0, seed, 1 + seed % 4)
    if tr.n == 0:
        return
    got = enhanced_opt(tr, SQ).cost
    ref = oracles.relaxed_cost_cvxpy(tr.arrivals, tr.K)
    assert got == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("n,K", [(1, 1), (5, 2), (20, 4), (40, 8)])
def test_batch_closed_form(n, K):
    assert enhanced_opt(gen_batch(n, 0, K), SQ).cost == pytest.approx(
        oracles.batch_relaxed_cost(n, K), rel=1e-9)


def test_cube_power_against_generic_solver():
    tr = Trace((0.0, 0.2, 0.2, 1.5, 4.0), 3)
    got = enhanced_opt(tr, CUBE).cost
    assert got == pytest.approx(oracles.relaxed_cost_cvxpy(tr.arrivals, 3, 1.0, 3.0), rel=1e-6)


def _schedule_cost(arrivals, K, pf, taus):
    f_prev, total = -math.inf, 0.0
    for a, tau in zip(arrivals, taus):
        f = max(a, f_prev) + tau
        total += f - a + K * tau * pf.eval(1 / tau)
        f_prev = f
    return total


@given(st.lists(st.floats(0.0, 2.0), min_size=1, max_size=8), st.integers(1, 4),
       st.lists(st.floats(0.2, 3.0), min_size=8, max_size=8))
@settings(max_examples=40, deadline=None)
def test_no_worse_than_hand_schedules(gaps, K, taus):
    arr = []
    t = 0.0
    for g in gaps:
        t += g
        arr.append(t)
    o = enhanced_opt(Trace(tuple(arr), K), SQ)
    assert o.cost <= _schedule_cost(arr, K, SQ, taus[:len(arr)]) + 1e-9
    # schedule structure and reported cost
    for j, (a, b, f) in enumerate(zip(arr, o.starts, o.finishes)):
        assert b >= a and f > b
        if j:
            assert b >= o.finishes[j - 1]
    assert o.cost == pytest.approx(o.flow_time() + o.energy(), rel=1e-12)


@given(st.integers(0, 5000), st.sampled_from([1, 2, 4]))
@settings(max_examples=15, deadline=None)
def test_both_bounds_below_a_feasible_run(seed, K):
    tr = gen_poisson(2.0, 6.0, seed, K)
    alg = cost(simulate(tr, make_policy("proposed", SQ))).total
    o = enhanced_opt(tr, SQ)
    assert o.cost <= alg + 1e-9
    assert closed_form_lb(tr.n, K, SQ) <= alg + 1e-9


def test_doubling_servers_raises_cost():
    for arr in [(0.0,), (0.0, 0.4, 0.4), (0.0, 1.0, 5.0, 5.1)]:
        c1 = enhanced_opt(Trace(arr, 2), SQ).cost
        c2 = enhanced_opt(Trace(arr, 4), SQ).cost
        assert c2 > c1


def test_empirical_ratios_examples():
    r = empirical_ratios(gen_batch(1, 0, 2), SQ, 3 * math.sqrt(2))
    assert r["vs_opt_e"] == pytest.approx(1.5, rel=1e-6)
    assert r["vs_closed_form"] == pytest.approx(3 * math.sqrt(2) / 4, rel=1e-12)
    r1 = empirical_ratios(gen_batch(1, 0, 1), SQ, 3 / math.sqrt(2))
    assert r1["vs_opt_e"] == pytest.approx(1.0607, abs=1e-4)
    empty = empirical_ratios(Trace((), 2), SQ, 0.0)
    assert empty["vs_opt_e"] is None and empty["vs_closed_form"] is None


def test_worst_case_ratio_bound():
    assert worst_case_ratio_bound(SQ) == pytest.approx(18.0)


def test_virtual_server_state():
    o = enhanced_opt(gen_batch(2, 0, 1), SQ)
    b1, f1 = o.starts[1], o.finishes[1]
    count, rem, speed = o.state(0.5 * o.finishes[0])
    assert count == 2 and 0 < rem < 1 and speed == pytest.approx(1 / o.finishes[0])
    assert o.state(0.5 * (b1 + f1))[0] == 1
    assert o.state(f1 + 1.0) == (0, 0.0, 0.0)
    # left limit at a completion keeps the finishing job
    assert o.state(o.finishes[0], side="pre")[0] == 2
    assert o.state(o.finishes[0], side="post")[0] == 1


def test_schedule_json():
    o = enhanced_opt(gen_batch(2, 0, 2), SQ)
    d = o.to_json()
    assert isinstance(o, OptSchedule)
    assert len(d["jobs"]) == 2 and d["cost"] == pytest.approx(o.cost)
    for job in d["jobs"]:
        assert job["speed"] == pytest.approx(1 / (job["f"] - job["b"]))
