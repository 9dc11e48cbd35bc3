import pytest

from erasurelab.errors import IncompleteTrace, InfeasibleSupply, PEqualsOne
from erasurelab.protocols import ProtocolTrace, run_protocol
from erasurelab.resources import (
    ResourceInequality,
    ResourceLedger,
    ResourceVector,
    ebit_supply,
    inequality_csv,
    ledger_reconcile,
    net_rate,
    protocol_rate,
    standard_errors,
    sub1_inequality,
    sub2_inequality,
)

from conftest import big_run

GRID = [i / 100 for i in range(101)]


@pytest.mark.parametrize("ineq,p,expected", [
    (sub1_inequality, 0.25, 3 / 8),
    (sub1_inequality, 0.75, 0.1),
    (sub2_inequality, 0.25, 9 / 16),
])
def test_net_rate_examples(ineq, p, expected):
    assert net_rate(ineq(p), ebit_supply(p)) == pytest.approx(expected, abs=1e-12)


def test_sub1_coefficients():
    i0, ih = sub1_inequality(0.0), sub1_inequality(0.5)
    assert (i0.lhs.channel_uses, i0.rhs.ebits_AB, i0.rhs.ghz_ABE) == (2, 2, 0)
    assert (ih.lhs.channel_uses, ih.rhs.ebits_AB, ih.rhs.ghz_ABE) == (4, 1, 1)


def test_sub2_coefficients():
    i0, ih = sub2_inequality(0.0), sub2_inequality(0.5)
    assert (i0.lhs.ebits_AB, i0.lhs.channel_uses, i0.rhs.ebits_AB, i0.rhs.ebits_BE) == (2, 1, 2, 0)
    assert (ih.lhs.ebits_AB, ih.lhs.channel_uses, ih.rhs.ebits_BE) == (3, 2, 1)


def test_p_one():
    with pytest.raises(PEqualsOne):
        sub1_inequality(1.0)
    assert protocol_rate(1.0, "auto") == 0.0


def test_infeasible_supply():
    with pytest.raises(InfeasibleSupply):
        net_rate(sub1_inequality(0.6), ebit_supply(1.0))
    bad = ResourceInequality(ResourceVector(ebits_AB=1.0), ResourceVector(ebits_AB=1.0))
    with pytest.raises(InfeasibleSupply):
        net_rate(sub1_inequality(0.6), bad)


def test_crossover():
    for p in GRID[:-1]:
        r1, r2 = protocol_rate(p, "sub1"), protocol_rate(p, "sub2")
        assert (r2 >= r1) == (p <= 0.5), p


@pytest.mark.parametrize("protocol", ["sub1", "sub2", "auto"])
def test_rates_in_unit_interval_and_monotone(protocol):
    rates = [protocol_rate(p, protocol) for p in GRID]
    assert all(0.0 <= r <= 1.0 for r in rates)
    assert all(b <= a + 1e-15 for a, b in zip(rates, rates[1:]))


def test_inequality_csv():
    text = inequality_csv([0.0, 0.5])
    lines = text.strip().split("\n")
    assert lines[0].startswith("p,protocol,lhs_channel_uses")
    assert len(lines) == 5


def test_vector_arithmetic_and_ledger_merge():
    v = ResourceVector(channel_uses=1, ebits_AB=2)
    assert (v + v - v).astuple() == v.astuple()
    assert (2 * v).ebits_AB == 4
    with pytest.raises(ValueError):
        ResourceInequality(ResourceVector(channel_uses=-1), ResourceVector())
    a = ResourceLedger(message_uses=3, ghz_ABE=1)
    b = ResourceLedger(message_uses=2, supply_uses=4)
    c = ResourceLedger(qbits=1)
    assert a.merge(b).merge(c) == a.merge(b.merge(c))
    assert a.merge(b).channel_uses == 9


def test_reconcile_requires_complete_trace():
    with pytest.raises(IncompleteTrace):
        ledger_reconcile(ProtocolTrace(p=0.5))
    trace = run_protocol(0.3, 20, "sub1", seed=1).trace
    trace.complete = False
    with pytest.raises(IncompleteTrace):
        ledger_reconcile(trace)


def test_reconcile_p_zero_sub2():
    ineq = ledger_reconcile(run_protocol(0.0, 50, "sub2", seed=2).trace)
    assert ineq.lhs.channel_uses == 1.0
    assert ineq.rhs.ebits_BE == 0.0


def _within(mean, target, se, sigmas=5.0):
    return abs(mean - target) <= sigmas * se


def test_reconcile_sub1_half():
    trace = big_run(0.5, "sub1").trace
    ineq, se = ledger_reconcile(trace), standard_errors(trace)
    assert abs(ineq.lhs.channel_uses - 4.0) <= 0.05
    assert abs(ineq.rhs.ghz_ABE - 1.0) <= 0.01
    assert _within(ineq.rhs.ghz_ABE, 1.0, se["ghz_ABE"])


def test_reconcile_sub2_half():
    trace = big_run(0.5, "sub2").trace
    ineq, se = ledger_reconcile(trace), standard_errors(trace)
    assert abs(ineq.rhs.ebits_BE - 1.0) <= 0.01
    assert _within(ineq.rhs.ebits_BE, 1.0, se["ebits_BE"])
    assert _within(ineq.lhs.channel_uses, 2.0, se["channel_uses"])
    assert _within(ineq.lhs.ebits_AB, 3.0, se["ebits_consumed"])
