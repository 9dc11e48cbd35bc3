import math

import pytest

from erasurelab.core import (
    Party,
    SystemLabel,
    make_bell,
    make_rng,
    prepare_message,
    projector,
    tensor,
    trace_distance,
)
from erasurelab.errors import (
    DimensionMismatch,
    MissingE,
    OutOfValidityWindow,
    OverlappingParts,
    SnapshotsMissing,
)
from erasurelab.infotheory import (
    FANNES_WINDOW,
    LEMMA1_PARTS,
    TripartiteSample,
    audit_run,
    depolarize,
    distance_sweep,
    fannes_bound,
    fannes_gap,
    fannes_sweep,
    fidelity_distance_gap,
    lemma1_slack,
    lemma1_slacks,
    lemma1_sweep,
    random_tripartite,
    sweep_violations,
    theorem1_audit,
)
from erasurelab.protocols import run_protocol


def _q(name, theta=0.4, phi=0.0):
    return prepare_message(theta, phi, SystemLabel(name, Party.ALICE))


# --------------------------------------------------------------------------- #
# Entropy inequalities (i)-(iv)

def test_product_state_slack_i_zero():
    s = tensor(_q("a"), _q("b", 1.0), _q("c", 2.0))
    sample = TripartiteSample(s, ("a",), ("b",), ("c",))
    assert lemma1_slack(sample, "i") == pytest.approx(0.0, abs=1e-9)


def test_decoupled_c_slack_ii_zero():
    s = tensor(make_bell(["a", "b"]), _q("c"))
    sample = TripartiteSample(s, ("a",), ("b",), ("c",))
    assert lemma1_slack(sample, "ii") == pytest.approx(0.0, abs=1e-9)


def test_lemma1_errors():
    s = tensor(make_bell(["a", "b"]), _q("c"))
    with pytest.raises(OverlappingParts):
        TripartiteSample(s, ("a",), ("a",), ("c",))
    with pytest.raises(OverlappingParts):
        TripartiteSample(s, ("a",), ("b",), ("c",), E=("c",))
    with pytest.raises(MissingE):
        lemma1_slack(TripartiteSample(s, ("a",), ("b",), ("c",)), "iv")
    with pytest.raises(ValueError):
        lemma1_slack(TripartiteSample(s, ("a",), ("b",), ("c",)), "v")


def test_hidden_purifier_makes_abc_mixed():
    rng = make_rng(0, 0)
    sample = random_tripartite((1, 1, 1), rng, hidden=1)
    assert sample.hidden == ("h0",)
    assert set(lemma1_slacks(sample)) == set(LEMMA1_PARTS)


def test_lemma1_random_three_qubit():
    rng = make_rng(1, 0)
    worst = math.inf
    for _ in range(2000):
        sample = random_tripartite((1, 1, 1), rng)
        worst = min(worst, *lemma1_slacks(sample).values())
    assert worst >= -1e-9


def test_lemma1_sweep_report_shape():
    rep = lemma1_sweep(20, seed=3)
    assert set(rep) == {"1x1x1", "1x2x1", "2x1x1"}
    for per in rep.values():
        for stats in per.values():
            assert stats["samples"] == 20
            assert set(stats) == {"samples", "min_slack", "mean_slack", "violations"}
    assert sweep_violations(rep) == 0


# --------------------------------------------------------------------------- #
# Fannes and distance steps

def _bell_pair_projector():
    s = tensor(make_bell(["a1", "b1"]), make_bell(["a2", "b2"]))
    return projector(s)


def test_fannes_equal_states():
    rho = _bell_pair_projector()
    assert fannes_gap(rho, rho) == pytest.approx(0.0, abs=1e-12)


def test_fannes_depolarized_bell_pairs():
    rho = _bell_pair_projector()
    # depolarizing a pure state by lam moves it a trace distance lam (1 - 1/d)
    d = 16
    lam = 0.01 / (1 - 1 / d)
    sigma = depolarize(rho, lam)
    dist = trace_distance(rho, sigma)
    assert dist == pytest.approx(0.01, abs=1e-12)
    # analytic entropy of the depolarized pure state
    top = 1 - lam + lam / d
    rest = lam / d
    h = -(top * math.log2(top) + (d - 1) * rest * math.log2(rest))
    m = 4
    assert fannes_gap(rho, sigma) == pytest.approx(fannes_bound(0.01, m) - h, abs=1e-9)
    assert fannes_gap(rho, sigma) >= 0


def test_fannes_window_enforced():
    rho = projector(_q("x", 0.0))
    sigma = projector(_q("x", math.pi))
    with pytest.raises(OutOfValidityWindow):
        fannes_gap(rho, sigma)
    assert FANNES_WINDOW == pytest.approx(0.18393972, abs=1e-8)


def test_fannes_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        fannes_gap(projector(_q("x")), projector(_q("y")))


def test_fidelity_distance_gap_examples():
    rho = projector(_q("x", 0.7))
    assert fidelity_distance_gap(rho, rho) == pytest.approx(0.0, abs=1e-9)
    zero, one = projector(_q("x", 0.0)), projector(_q("x", math.pi))
    assert fidelity_distance_gap(zero, one) == pytest.approx(0.0, abs=1e-9)


def test_sweeps_small():
    assert fannes_sweep(200, seed=1)["fannes"]["violations"] == 0
    assert distance_sweep(200, seed=1)["distance"]["violations"] == 0


# --------------------------------------------------------------------------- #
# Audit of traced runs

def test_audit_needs_snapshots():
    with pytest.raises(SnapshotsMissing):
        theorem1_audit(run_protocol(0.0, 2, "sub1", seed=1).trace, 1)


@pytest.mark.parametrize("strategy", ["sub1", "sub2"])
@pytest.mark.parametrize("m", [1, 2])
def test_audit_p_zero(strategy, m):
    audit = theorem1_audit(audit_run(strategy, 0.0, m, seed=1), m)
    assert audit.epsilon == 0.0
    assert audit.fidelity == pytest.approx(1.0, abs=1e-9)
    assert audit.sum_erased == 0.0
    assert audit.holds_i and audit.holds_ii
    assert audit.sum_delivered >= 2 * m - 2


def test_audit_sub2_no_erasure_single_ebit():
    audit = theorem1_audit(audit_run("sub2", 0.0, 1, seed=0), 1)
    assert audit.n <= 4
    assert audit.sum_delivered >= 0


def test_direct_bell_half_contributes_two():
    # sending the half of a fresh reference-entangled pair: I(S;R) = 2
    from erasurelab.channel import ChannelConfig
    from erasurelab.core import mutual_information
    from erasurelab.protocols import Session

    sess = Session.new(ChannelConfig(p=0.0), live=True, snapshots=True)
    psi = make_bell(["R", "S"], parties=(Party.REFERENCE, Party.ALICE))
    sess.send(psi, "S", "direct")
    snap = sess.trace.snapshots[0]
    assert mutual_information(snap.state, [snap.sent], ["R"]) == pytest.approx(2.0)


def test_audit_with_erasures_holds():
    for run in range(4):
        audit = theorem1_audit(audit_run("sub1", 0.25, 1, seed=5, run_index=run), 1)
        assert audit.holds_i and audit.holds_ii
