import itertools
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acoustic_dmpc.codec import payload_bits
from acoustic_dmpc.errors import ArgumentError, InfeasibleError
from acoustic_dmpc.mac import Scheme
from acoustic_dmpc.simulation import SimConfig
from acoustic_dmpc.tuning import (
    COORDINATE_ORDER,
    DEFAULT_GRIDS,
    HyperParams,
    SimulationEvaluator,
    audit_rows,
    coordinate_descent,
    data_rate,
)

GRIDS = {"hp": (4, 6, 10), "Ts": (1.0, 3.0, 6.0, 9.0), "Nips": (1, 2, 3, 4), "w_fi": tuple(range(4, 16))}


def test_rate_example():
    assert data_rate(HyperParams(6, 8.0, 3, 10), 6) == pytest.approx(563 * 3 / 8)
    assert data_rate(HyperParams(6, 8.0, 6, 10), 6) == pytest.approx(2 * 211.125)
    with pytest.raises(ArgumentError):
        HyperParams(6, 8.0, 0, 10)


def test_rate_monotone_on_grid():
    for V in (4, 6):
        for hp, Ts, Nips, w in itertools.product((3, 4, 6, 10), (1.0, 3.0, 6.0, 9.0), (1, 2, 3, 4), (4, 8, 15)):
            r = data_rate(HyperParams(hp, Ts, Nips, w), V)
            assert data_rate(HyperParams(hp + 1, Ts, Nips, w), V) > r
            assert data_rate(HyperParams(hp, Ts, Nips + 1, w), V) > r
            assert data_rate(HyperParams(hp, Ts, Nips, w + 1), V) > r
            assert data_rate(HyperParams(hp, Ts + 1.0, Nips, w), V) < r


def test_defaults():
    assert COORDINATE_ORDER == ("w_fi", "Nips", "Ts", "hp")
    assert DEFAULT_GRIDS["hp"] == (3, 4, 6, 10)
    assert DEFAULT_GRIDS["w_fi"][:12] == tuple(range(4, 16)) and 53 in DEFAULT_GRIDS["w_fi"]


def planted(p):
    # separable convex bowl with optimum at (6, 6.0, 2, 9)
    f = (p.hp - 6) ** 2 + (p.Ts - 6.0) ** 2 + 3 * (p.Nips - 2) ** 2 + 0.5 * (p.w_fi - 9) ** 2
    return True, f


@pytest.mark.parametrize("start", [HyperParams(4, 1.0, 4, 15), HyperParams(10, 9.0, 1, 4)])
def test_planted_separable_optimum(start):
    res = coordinate_descent(start, planted, GRIDS)
    assert res.best == HyperParams(6, 6.0, 2, 9)
    assert res.best_rate == 0.0


def test_planted_constraint_with_rate_ordering():
    # minimum rate subject to threshold-like monotone feasibility
    def feasible(p):
        return p.w_fi >= 8 and p.Nips >= 2 and p.Ts <= 6.0 and p.hp >= 6

    def ev(p):
        return feasible(p), data_rate(p, 4)

    res = coordinate_descent(HyperParams(10, 1.0, 4, 15), ev, GRIDS, rate=lambda p: data_rate(p, 4))
    brute = min((q for q in itertools.starmap(HyperParams, itertools.product(*(GRIDS[k] for k in ("hp", "Ts", "Nips", "w_fi")))) if feasible(q)),
                key=lambda q: data_rate(q, 4))
    assert res.best == brute == HyperParams(6, 6.0, 2, 8)
    plain = coordinate_descent(HyperParams(10, 1.0, 4, 15), ev, GRIDS)
    assert plain.best == res.best and len(res.log) < len(plain.log)


def test_one_cycle_when_start_optimal():
    grids = {k: (v[0], v[1]) for k, v in GRIDS.items()}
    start = HyperParams(4, 3.0, 1, 4)
    res = coordinate_descent(start, lambda p: (True, data_rate(p, 4)), grids)
    assert res.best == start and res.cycles == 1
    assert len(res.log) == 5  # start plus one alternative per coordinate


def test_infeasible():
    with pytest.raises(InfeasibleError):
        coordinate_descent(HyperParams(), lambda p: (False, 1.0), GRIDS)


def test_budget_and_cache():
    calls = []

    def ev(p):
        calls.append(p)
        return planted(p)

    res = coordinate_descent(HyperParams(4, 1.0, 4, 15), ev, GRIDS, budget=7)
    assert len(res.log) == len(calls) == 7 and res.exhausted
    assert len(set(calls)) == len(calls)
    with pytest.raises(ArgumentError):
        coordinate_descent(HyperParams(), planted, {"hp": (4,)})


def test_audit_rows():
    res = coordinate_descent(HyperParams(4, 1.0, 4, 15), planted, GRIDS, budget=10)
    rows = audit_rows(res)
    assert [r["index"] for r in rows] == list(range(len(res.log)))
    assert set(rows[0]) == {"index", "hp", "Ts", "Nips", "w_fi", "rate_bps", "feasible"}


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(GRIDS["hp"]), st.sampled_from(GRIDS["Ts"]), st.sampled_from(GRIDS["Nips"]), st.sampled_from(GRIDS["w_fi"]),
       st.integers(4, 14))
def test_result_never_worse_than_feasible_start(hp, Ts, Nips, w, threshold):
    start = HyperParams(hp, Ts, Nips, w)

    def ev(p):
        return p.w_fi >= threshold or p == start, data_rate(p, 4)

    res = coordinate_descent(start, ev, GRIDS, budget=60)
    assert res.best_rate <= data_rate(start, 4)
    assert len(res.log) <= 60
    assert ev(res.best)[0]


def test_simulation_evaluator_marks_invalid_points():
    cfg = SimConfig(duration=20.0)
    base = replace(cfg, mac=replace(cfg.mac, scheme=Scheme.TDMA, prop_delay=0.1))
    ev = SimulationEvaluator(base)
    ok, r = ev(HyperParams(3, 8.0, 3, 10))
    assert not ok and r == pytest.approx(payload_bits(4, 32, 10, 3) * 3 / 8)
    # TDMA slot too short for the propagation delay
    assert ev(HyperParams(6, 1.0, 5, 10))[0] is False
