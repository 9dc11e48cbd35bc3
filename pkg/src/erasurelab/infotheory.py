"""Numerical checks of the entropy inequalities behind the capacity upper bound.

Each check returns a *slack*: right-hand side minus left-hand side, which
the inequality promises to be non-negative.  Sweeps report min/mean slack
and count violations below ``-SLACK_TOL``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import (
    MAX_QUBITS,
    DensityOp,
    LabeledState,
    Party,
    entropy,
    fidelity,
    make_bell,
    make_rng,
    marginal_entropy,
    mutual_information,
    partial_trace,
    random_pure_state,
    trace_distance,
)
from .errors import (
    DimensionMismatch,
    MissingE,
    OutOfValidityWindow,
    OverlappingParts,
    SizeCap,
    SnapshotsMissing,
    UnknownLabel,
)

SLACK_TOL = 1e-9
EXACT_TOL = 1e-9
FANNES_WINDOW = 1.0 / (2.0 * math.e)
ROUNDOFF_INFIDELITY = 1e-14
LEMMA1_PARTS = ("i", "ii", "iii", "iv")
PROFILES = ((1, 1, 1), (1, 2, 1), (2, 1, 1))


@dataclass(frozen=True)
class TripartiteSample:
    """Disjoint parts A, B, C of a pure state; anything else is a hidden purifier."""

    state: LabeledState
    A: tuple[str, ...]
    B: tuple[str, ...]
    C: tuple[str, ...]
    E: tuple[str, ...] | None = None

    def __post_init__(self):
        parts = [self.A, self.B, self.C]
        flat = [x for part in parts for x in part]
        if len(set(flat)) != len(flat):
            raise OverlappingParts("A, B and C must be disjoint")
        for x in flat:
            if x not in self.state:
                raise UnknownLabel(x)
        if self.E is not None and not set(self.E) <= set(self.B):
            raise OverlappingParts("E must be a subset of B")

    @property
    def hidden(self) -> tuple[str, ...]:
        used = set(self.A) | set(self.B) | set(self.C)
        return tuple(x for x in self.state.ids if x not in used)


class _Entropies:
    """Memoized marginal entropies of one state."""

    def __init__(self, state):
        self.state = state
        self.cache: dict[frozenset, float] = {}

    def __call__(self, *parts: Iterable[str]) -> float:
        key = frozenset(x for part in parts for x in part)
        if key not in self.cache:
            self.cache[key] = marginal_entropy(self.state, sorted(key)) if key else 0.0
        return self.cache[key]

    def mi(self, a, b) -> float:
        return self(a) + self(b) - self(a, b)

    def ci(self, a, b) -> float:
        return self(b) - self(a, b)


def _slack(h: _Entropies, s: TripartiteSample, which: str) -> float:
    A, B, C = s.A, s.B, s.C
    if which == "i":
        return h.mi(A, B + C) - (h.mi(A + B, C) - h.mi(B, C))
    if which == "ii":
        return h.ci(A, B + C) - h.ci(A, B)
    if which == "iii":
        return h.ci(A + B, C) - (h.ci(A, C) + h.ci(B, C))
    if which == "iv":
        if s.E is None:
            raise MissingE("inequality (iv) needs a designated E inside B")
        return 2.0 * h(C, s.E) - (h.ci(A, B + C) - h.ci(A, B))
    raise ValueError(f"unknown part {which!r}; expected one of {LEMMA1_PARTS}")


def lemma1_slack(sample: TripartiteSample, which: str) -> float:
    """RHS - LHS of one of the four inequalities (i)-(iv)."""
    return _slack(_Entropies(sample.state), sample, which)


def lemma1_slacks(sample: TripartiteSample) -> dict[str, float]:
    h = _Entropies(sample.state)
    return {w: _slack(h, sample, w) for w in LEMMA1_PARTS if w != "iv" or sample.E is not None}


def random_tripartite(profile: Sequence[int], rng: np.random.Generator, hidden: int = 0) -> TripartiteSample:
    """Haar-random pure state split into A, B, C plus ``hidden`` purifier qubits.

    With a purifier the state on ABC is mixed.  E is a uniformly random
    subset of B (possibly empty or all of B).
    """
    na, nb, nc = profile
    total = na + nb + nc + hidden
    names = [f"a{i}" for i in range(na)] + [f"b{i}" for i in range(nb)] \
        + [f"c{i}" for i in range(nc)] + [f"h{i}" for i in range(hidden)]
    state = random_pure_state(total, rng, labels=names)
    B = tuple(names[na:na + nb])
    mask = rng.integers(0, 2, size=nb).astype(bool)
    E = tuple(b for b, keep in zip(B, mask) if keep)
    return TripartiteSample(state, tuple(names[:na]), B, tuple(names[na + nb:na + nb + nc]), E)


@dataclass
class SlackStats:
    samples: int = 0
    min_slack: float = math.inf
    mean_slack: float = 0.0
    violations: int = 0
    _total: float = field(default=0.0, repr=False)

    def add(self, v: float) -> None:
        self.samples += 1
        self._total += v
        self.min_slack = min(self.min_slack, v)
        self.mean_slack = self._total / self.samples
        if v < -SLACK_TOL:
            self.violations += 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("_total")
        return d


def lemma1_sweep(samples: int, seed: int, profiles: Sequence[Sequence[int]] = PROFILES) -> dict:
    """Random sweep of all four inequalities; odd samples carry a hidden purifier."""
    report = {}
    for pi, profile in enumerate(profiles):
        rng = make_rng(seed, (3, pi))
        stats = {w: SlackStats() for w in LEMMA1_PARTS}
        for n in range(samples):
            s = random_tripartite(profile, rng, hidden=n % 2)
            for w, v in lemma1_slacks(s).items():
                stats[w].add(v)
        report["x".join(map(str, profile))] = {w: st.to_dict() for w, st in stats.items()}
    return report


def sweep_violations(report: dict) -> int:
    return sum(v["violations"] for per in report.values() for v in per.values())


# --------------------------------------------------------------------------- #
# Continuity steps                                                            #
# --------------------------------------------------------------------------- #


def _same_shape(rho: DensityOp, sigma: DensityOp) -> None:
    if rho.num_qubits != sigma.num_qubits or set(rho.ids) != set(sigma.ids):
        raise DimensionMismatch("states must live on the same registers")


def fannes_bound(d_trace: float, m: int) -> float:
    """2Dm - 2D log2(2D): the entropy continuity bound on m qubits."""
    t = 2.0 * d_trace
    return t * m - (t * math.log2(t) if t > 0 else 0.0)


def fannes_gap(rho: DensityOp, sigma: DensityOp) -> float:
    """Continuity bound minus |H(rho) - H(sigma)|; non-negative in the window."""
    _same_shape(rho, sigma)
    d = trace_distance(rho, sigma)
    if d > FANNES_WINDOW:
        raise OutOfValidityWindow(f"trace distance {d:.4f} exceeds 1/(2e)")
    return fannes_bound(d, rho.num_qubits) - abs(entropy(rho) - entropy(sigma))


def fidelity_distance_gap(rho: DensityOp, sigma: DensityOp) -> float:
    """sqrt(1 - F^2) - D, non-negative for any pair of states."""
    _same_shape(rho, sigma)
    f = fidelity(rho, sigma)
    infid = 1.0 - f * f
    # sqrt would turn round-off in F = 1 into a spurious 1e-8 gap
    if infid < ROUNDOFF_INFIDELITY:
        infid = 0.0
    return math.sqrt(infid) - trace_distance(rho, sigma)


def random_density(num_qubits: int, rng: np.random.Generator, labels: Sequence[str] | None = None,
                   rank_qubits: int | None = None) -> DensityOp:
    """Random mixed state: the marginal of a Haar state with ``rank_qubits`` traced out."""
    extra = num_qubits if rank_qubits is None else rank_qubits
    names = list(labels) if labels is not None else [f"q{i}" for i in range(num_qubits)]
    if extra == 0:
        return partial_trace(random_pure_state(num_qubits, rng, labels=names), names)
    pure = random_pure_state(num_qubits + extra, rng, labels=names + [f"env{i}" for i in range(extra)])
    return partial_trace(pure, names)


def mix(rho: DensityOp, sigma: DensityOp, t: float) -> DensityOp:
    """(1 - t) rho + t sigma."""
    sigma = sigma.permuted(rho.ids)
    return DensityOp((1.0 - t) * rho.matrix + t * sigma.matrix, rho.labels, check=False)


def depolarize(rho: DensityOp, lam: float) -> DensityOp:
    d = rho.matrix.shape[0]
    return DensityOp((1.0 - lam) * rho.matrix + lam * np.eye(d) / d, rho.labels, check=False)


def fannes_sweep(pairs: int, seed: int, num_qubits: int = 2, max_distance: float = 0.05) -> dict:
    """Near-identical random pairs with trace distance below ``max_distance``."""
    rng = make_rng(seed, 4)
    stats = SlackStats()
    skipped = 0
    while stats.samples < pairs:
        rho = random_density(num_qubits, rng, rank_qubits=int(rng.integers(0, num_qubits + 1)))
        other = random_density(num_qubits, rng)
        sigma = mix(rho, other, float(rng.uniform(0.0, max_distance)))
        if trace_distance(rho, sigma) > min(max_distance, FANNES_WINDOW):
            skipped += 1
            continue
        stats.add(fannes_gap(rho, sigma))
    out = stats.to_dict()
    out["skipped_outside_window"] = skipped
    return {"fannes": out}


def distance_sweep(pairs: int, seed: int, max_qubits: int = 3) -> dict:
    """Random pairs of mixed and pure states of 1..max_qubits qubits."""
    rng = make_rng(seed, 5)
    stats = SlackStats()
    for n in range(pairs):
        q = 1 + n % max_qubits
        ra = int(rng.integers(0, q + 1))
        rb = int(rng.integers(0, q + 1))
        stats.add(fidelity_distance_gap(random_density(q, rng, rank_qubits=ra),
                                        random_density(q, rng, rank_qubits=rb)))
    return {"distance": stats.to_dict()}


# --------------------------------------------------------------------------- #
# Audit of the proof quantities on small traced runs                          #
# --------------------------------------------------------------------------- #


@dataclass
class Theorem1Audit:
    n: int
    m: int
    fidelity: float
    epsilon: float
    sum_delivered: float
    sum_erased: float
    bound_delivered: float
    bound_erased: float
    info: list[tuple[int, bool, float]]

    @property
    def holds_i(self) -> bool:
        return self.sum_delivered >= self.bound_delivered - SLACK_TOL

    @property
    def holds_ii(self) -> bool:
        return self.sum_erased <= self.bound_erased + SLACK_TOL

    def to_dict(self) -> dict:
        d = asdict(self)
        d["info"] = [{"use": i, "delivered": dlv, "mutual_information": v} for i, dlv, v in self.info]
        d["holds_i"] = self.holds_i
        d["holds_ii"] = self.holds_ii
        return d


def decoding_error_term(m: int, epsilon: float) -> float:
    """2 sqrt(2) m sqrt(eps) + 1."""
    return 2.0 * math.sqrt(2.0) * m * math.sqrt(max(epsilon, 0.0)) + 1.0


def theorem1_audit(trace, m: int) -> Theorem1Audit:
    """Evaluate both sums of I(S_i; B_{i-1} R) on a traced run.

    The run must have been recorded with snapshots in a live session and
    must have sent ``m`` halves of Bell pairs whose partners are Reference
    registers.  Epsilon is one minus the measured fidelity of Bob's decoded
    registers and the references with m Bell pairs.
    """
    if trace.snapshots is None:
        raise SnapshotsMissing("run was recorded without snapshots")
    if len(trace.snapshots) != trace.event_count:
        raise SnapshotsMissing("snapshot count does not match channel uses")
    if trace.final_state is None or len(trace.decoded_register) < m or len(trace.reference_register) < m:
        raise SnapshotsMissing("trace lacks the decoded and reference registers")
    for snap in trace.snapshots:
        if snap.state.num_qubits > MAX_QUBITS:
            raise SizeCap("audits are limited to tiny runs")

    info = []
    sum_b = sum_e = 0.0
    for snap, delivered in zip(trace.snapshots, trace.outcomes):
        st = snap.state
        bob_ref = [x.id for x in st.labels if x.party in (Party.BOB, Party.REFERENCE)]
        v = mutual_information(st, [snap.sent], bob_ref) if bob_ref else 0.0
        info.append((snap.use_index, bool(delivered), v))
        if delivered:
            sum_b += v
        else:
            sum_e += v

    final = trace.final_state
    pairs = list(zip(trace.reference_register[:m], trace.decoded_register[:m]))
    keep = [x for pair in pairs for x in pair]
    mu = partial_trace(final, keep)
    v = np.ones(1, dtype=complex)
    for _ in pairs:
        v = np.kron(v, make_bell().amplitudes)
    f = min(math.sqrt(max(float(np.vdot(v, mu.matrix @ v).real), 0.0)), 1.0)
    # round-off in a fidelity of 1 would otherwise be amplified by sqrt(eps)
    eps = 0.0 if f >= 1.0 - EXACT_TOL else 1.0 - f
    n = trace.event_count
    err = decoding_error_term(m, eps)
    return Theorem1Audit(
        n=n, m=m, fidelity=f, epsilon=eps,
        sum_delivered=sum_b, sum_erased=sum_e,
        bound_delivered=2 * m - 2 * err,
        bound_erased=n - m + 4 * err,
        info=info,
    )


def audit_run(strategy: str, p: float, m: int, seed: int, run_index: int = 0):
    """Send m reference-entangled qubits in a live, snapshotting session.

    All ebits are generated through the channel, so every channel use the
    protocol relies on is part of the trace.
    """
    from .channel import ChannelConfig
    from .protocols import SENDERS, ProtocolTrace, Session, choose_strategy

    send = SENDERS[choose_strategy(strategy, p)]
    session = Session.new(ChannelConfig(p=p, seed=seed), run_index, live=True, snapshots=True,
                          trace=ProtocolTrace(p=p, keep_events=True))
    for j in range(m):
        psi = make_bell([f"R{j}", f"M{j}"], parties=(Party.REFERENCE, Party.ALICE))
        send(psi, session, message=f"M{j}")
    return session.trace


def theorem1_report(audits: Sequence[Theorem1Audit]) -> dict:
    return {
        "theorem1": {
            "samples": len(audits),
            "violations_i": sum(not a.holds_i for a in audits),
            "violations_ii": sum(not a.holds_ii for a in audits),
            "min_slack_i": min((a.sum_delivered - a.bound_delivered for a in audits), default=math.nan),
            "min_slack_ii": min((a.bound_erased - a.sum_erased for a in audits), default=math.nan),
            "violations": sum((not a.holds_i) + (not a.holds_ii) for a in audits),
        }
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
