"""Erasure-channel protocols assisted by backward classical communication.

Two ways of sending one qubit, both built on coherent teleportation:

* Subprotocol 1 retransmits coherent copies of the two correction bits until
  each is delivered.  Erased copies leave GHZ states shared with Eve.
* Subprotocol 2 sends the two correction bits by coherent superdense coding,
  spending one fresh ebit per attempt.  Erased attempts leave Bell pairs
  between Eve and Bob.

Every message is simulated exactly on a state vector and checked against
the final state the protocol promises.  Ebits are generated on demand
through the channel when the pool runs dry.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import ChannelConfig, ErasureChannel, TransmitOutcome
from .core import (
    MAX_QUBITS,
    LabeledState,
    Party,
    SystemLabel,
    apply_gate,
    coherent_copy,
    factor_out,
    fresh_label,
    split_off,
    make_bell,
    make_ghz,
    make_rng,
    prepare_message,
    tensor,
)
from .errors import (
    NoEbitAvailable,
    NotOwnedByBob,
    RetransmitCapExceeded,
    SizeCap,
    VerificationFailed,
)
from .resources import ResourceLedger

EXACT_TOL = 1e-9

SUB1, SUB2, AUTO = "sub1", "sub2", "auto"
STRATEGIES = (SUB1, SUB2, AUTO)

_EMPTY = LabeledState([1.0], [])


def choose_strategy(strategy: str, p: float) -> str:
    """Resolve ``auto``: superdense coding up to p = 1/2 (ties included)."""
    strategy = strategy.lower()
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == AUTO:
        return SUB2 if p <= 0.5 else SUB1
    return strategy


# --------------------------------------------------------------------------- #
# Trace records                                                               #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class FidelityReport:
    fidelity: float
    epsilon: float

    @classmethod
    def of(cls, f: float) -> "FidelityReport":
        f = min(max(f, 0.0), 1.0)
        return cls(f, 1.0 - f)


@dataclass(frozen=True, slots=True)
class MessageRecord:
    strategy: str
    k: int
    l: int
    uses: int
    ebits_consumed: int
    ebits_produced: int
    ghz: int
    ebits_BE: int
    fidelity: float
    settled: int = 0

    @property
    def indicator_k(self) -> int:
        return int(self.k > 0)

    @property
    def indicator_l(self) -> int:
        return int(self.l > 0)


@dataclass(frozen=True)
class Snapshot:
    """Global state immediately before a channel use, with the qubit about to go."""

    state: LabeledState
    sent: str
    use_index: int
    purpose: str


@dataclass
class ProtocolTrace:
    """Ordered channel events plus per-message bookkeeping for one run.

    ``outcomes`` stores every channel event compactly (1 delivered, 0
    erased); the full ``events`` list is kept only when requested.
    """

    p: float
    keep_events: bool = True
    events: list[TransmitOutcome] = field(default_factory=list)
    outcomes: bytearray = field(default_factory=bytearray)
    messages: list[MessageRecord] = field(default_factory=list)
    snapshots: list[Snapshot] | None = None
    decoded_register: tuple[str, ...] = ()
    reference_register: tuple[str, ...] = ()
    final_state: LabeledState | None = None
    supply_uses: int = 0
    complete: bool = True

    @property
    def event_count(self) -> int:
        return len(self.outcomes)

    @property
    def per_message(self) -> list[tuple[int, int, int, int]]:
        return [(r.k, r.l, r.indicator_k, r.indicator_l) for r in self.messages]

    def record(self, outcome: TransmitOutcome) -> None:
        self.outcomes.append(1 if outcome.delivered else 0)
        if self.keep_events:
            self.events.append(outcome)


# --------------------------------------------------------------------------- #
# Session                                                                     #
# --------------------------------------------------------------------------- #


@dataclass
class Session:
    """Everything one sequential protocol run shares between messages.

    With ``live=True`` every register (pooled ebits, Eve's shares, the
    delivered messages) stays in one global state, which is what the
    information-theoretic audit needs.  Otherwise registers of a finished
    message are verified and retired so the state never outgrows the cap,
    and pooled ebits are kept as a count.
    """

    channel: ErasureChannel
    ledger: ResourceLedger = field(default_factory=ResourceLedger)
    trace: ProtocolTrace | None = None
    live: bool = False
    snapshots: bool = False
    on_demand: bool = True
    state: LabeledState = _EMPTY
    pool_pairs: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.trace is None:
            self.trace = ProtocolTrace(p=self.channel.p)
        if self.snapshots:
            if not self.live:
                raise ValueError("snapshots require a live session")
            self.trace.snapshots = []

    @classmethod
    def new(cls, cfg: ChannelConfig, run_index: int = 0, **kw) -> "Session":
        return cls(ErasureChannel(cfg, run_index), **kw)

    @property
    def max_retransmits(self) -> int:
        return self.channel.cfg.max_retransmits

    def send(self, state: LabeledState, qubit: str, purpose: str) -> tuple[LabeledState, TransmitOutcome]:
        if self.trace.snapshots is not None:
            self.trace.snapshots.append(Snapshot(state, qubit, self.channel.uses, purpose))
        state, outcome = self.channel.transmit(state, qubit)
        self.trace.record(outcome)
        return state, outcome

    def take_ebit(self, state: LabeledState, tag: str) -> tuple[LabeledState, str, str]:
        """Pull one Alice-Bob ebit into ``state``; returns (state, alice, bob)."""
        if self.ledger.pool == 0:
            if not self.on_demand:
                raise NoEbitAvailable("ebit pool is empty")
            state = self._refill(state)
        self.ledger.pool -= 1
        self.ledger.ebits_consumed += 1
        if self.live:
            a, b = self.pool_pairs.pop(0)
            return state, a, b
        a, b = fresh_label(tag + "A", Party.ALICE), fresh_label(tag + "B", Party.BOB)
        return tensor(state, make_bell([a, b])), a.id, b.id

    def return_ebit(self, a: str, b: str) -> None:
        self.ledger.pool += 1
        self.ledger.ebits_returned += 1
        if self.live:
            self.pool_pairs.append((a, b))

    def _refill(self, state: LabeledState) -> LabeledState:
        for _ in range(self.max_retransmits + 1):
            state, pair = _generate_into(state, self)
            if pair is not None:
                return state
        raise RetransmitCapExceeded(
            f"no ebit delivered in {self.max_retransmits + 1} attempts"
        )


def _generate_into(state: LabeledState, session: Session) -> tuple[LabeledState, tuple[str, str] | None]:
    a, s = fresh_label("eA", Party.ALICE), fresh_label("eS", Party.ALICE)
    state = tensor(state, make_bell([a, s]))
    state, out = session.send(state, s.id, "ebit")
    session.ledger.supply_uses += 1
    session.trace.supply_uses += 1
    if not out.delivered:
        session.ledger.supply_wasted += 1
        if not session.live:
            state = factor_out(state, make_bell([a, s.to(Party.EVE)]))
        return state, None
    session.ledger.ebits_generated += 1
    session.ledger.pool += 1
    if session.live:
        session.pool_pairs.append((a.id, s.id))
    else:
        state = factor_out(state, make_bell([a, s.to(Party.BOB)]))
    return state, (a.id, s.id)


def generate_ebit(session: Session) -> LabeledState | None:
    """Try once to share an ebit through the channel.

    On delivery the pair joins the session's pool and a copy of the shared
    Bell state is returned; on erasure ``None`` is returned and the use is
    booked as wasted.
    """
    state, pair = _generate_into(session.state, session)
    session.state = state
    if pair is None:
        return None
    a, b = pair
    return make_bell([SystemLabel(a, Party.ALICE), SystemLabel(b, Party.BOB)])


# --------------------------------------------------------------------------- #
# Verification helpers                                                        #
# --------------------------------------------------------------------------- #


def _check_blocks(state: LabeledState, blocks: list[LabeledState], retire: bool, what: str) -> LabeledState:
    """Confirm each pure block factors out of ``state``; optionally remove it."""
    for block in blocks:
        f, rest = split_off(state, block)
        if f < 1.0 - EXACT_TOL:
            raise VerificationFailed(f"{what}: block {list(block.ids)} has fidelity {f!r}")
        if retire:
            state = rest
    return state


def _decoded_target(psi: LabeledState, message: str, decoded: str) -> LabeledState:
    labels = tuple(SystemLabel(decoded, Party.BOB) if lab.id == message else lab for lab in psi.labels)
    return LabeledState(psi.amplitudes, labels, check=False)


def _finish(state: LabeledState, session: Session, blocks: list[LabeledState],
            psi: LabeledState, m: str, b: str, what: str) -> float:
    """Verify residual resources and the delivered message; retire if allowed.

    Returns the message fidelity.
    """
    retire = not session.live
    state = _check_blocks(state, blocks, retire, what)
    target = _decoded_target(psi, m, b)
    fid, rest = split_off(state, target)
    if fid < 1.0 - EXACT_TOL:
        raise VerificationFailed(f"{what}: delivered fidelity {fid!r}")
    session.state = rest if retire else state
    return fid


def _message_label(psi: LabeledState, message: str | None) -> str:
    if message is not None:
        return message
    alice = psi.owned_by(Party.ALICE)
    if len(alice) != 1:
        raise ValueError("pass `message` when the input has several Alice registers")
    return alice[0].id


def _lab(state: LabeledState, name: str) -> SystemLabel:
    return state.label(name)


# --------------------------------------------------------------------------- #
# Subprotocol 1                                                               #
# --------------------------------------------------------------------------- #


def _send_copies(state: LabeledState, source: str, session: Session, tag: str):
    """Retransmit coherent copies of ``source`` until one is delivered.

    Returns ``(state, delivered_label, erasures, eve_copies)``.  Outside live
    sessions Eve's later copies are folded onto her first one right away by
    an Eve-local CNOT and retired, so she holds one register per source.
    """
    eve: list[str] = []
    for erasures in range(session.max_retransmits + 1):
        c = fresh_label(tag, Party.ALICE)
        state = coherent_copy(state, source, c)
        state, out = session.send(state, c.id, tag)
        if out.delivered:
            return state, c.id, erasures, eve
        eve.append(c.id)
        if not session.live and len(eve) > 1:
            state = _compress_eve(state, eve)
            del eve[1:]
    raise RetransmitCapExceeded(
        f"register {source} erased {session.max_retransmits + 1} times in a row"
    )


def _compress_eve(state: LabeledState, copies: list[str]) -> LabeledState:
    """Map Eve's |i>^(x)k onto |i>|0>^(k-1) and drop the blank registers."""
    for extra in copies[1:]:
        state = apply_gate(state, "CX", [copies[0], extra])
        state = factor_out(state, LabeledState.basis([state.label(extra)]))
    return state


def subprotocol1_send(psi: LabeledState, session: Session, message: str | None = None):
    """Send ``psi`` by coherent teleportation, retransmitting erased copies.

    Returns ``(final_state, trace)``; ``final_state`` is the state right
    after Bob's corrections and Eve's compression, before any retirement.
    """
    m = _message_label(psi, message)
    start_uses = session.channel.uses
    start_supply = session.trace.supply_uses
    session.trace.complete = False

    state = tensor(session.state, psi)
    state, a, b = session.take_ebit(state, "tp")
    state = apply_gate(state, "BellBasisChange", [m, a])

    state, d1, k, e1 = _send_copies(state, m, session, "C1")
    state, d2, l, e2 = _send_copies(state, a, session, "C2")
    state = apply_gate(state, "CX", [d1, b])
    state = apply_gate(state, "CZ", [d2, b])

    state = _compress_eve(state, e1)
    state = _compress_eve(state, e2)

    blocks = []
    for src, dst, eve in ((m, d1, e1), (a, d2, e2)):
        if eve:
            blocks.append(make_ghz([_lab(state, src), _lab(state, dst), _lab(state, eve[0])]))
        else:
            blocks.append(make_bell([_lab(state, src), _lab(state, dst)]))
    final = state
    fid = _finish(state, session, blocks, psi, m, b, "subprotocol 1")
    ghz = int(k > 0) + int(l > 0)
    for block in blocks:
        if block.num_qubits == 2:
            session.return_ebit(block.ids[0], block.ids[1])

    uses = session.channel.uses - start_uses - (session.trace.supply_uses - start_supply)
    _book(session, MessageRecord(SUB1, k, l, uses, 1, 2 - ghz, ghz, 0, fid), psi, b)
    return final, session.trace


def _book(session: Session, rec: MessageRecord, psi: LabeledState, decoded: str) -> None:
    led = session.ledger
    led.message_uses += rec.uses
    led.qbits += 1
    led.ghz_ABE += rec.ghz
    led.ebits_BE += rec.ebits_BE
    trace = session.trace
    trace.messages.append(rec)
    if session.live:
        trace.decoded_register += (decoded,)
        trace.reference_register += tuple(x.id for x in psi.owned_by(Party.REFERENCE))
        trace.final_state = session.state
    else:
        trace.decoded_register = (decoded,)
    trace.complete = True


# --------------------------------------------------------------------------- #
# Subprotocol 2                                                               #
# --------------------------------------------------------------------------- #


def bell_measure_decode(state: LabeledState, pair) -> LabeledState:
    """Coherent Bell-to-computational map |Phi_ij> -> |ij> on Bob's pair."""
    for x in pair:
        if state.party(x) is not Party.BOB:
            raise NotOwnedByBob(f"{x} is held by {state.party(x).value}")
    return apply_gate(state, "BellToComputational", list(pair))


def _correct_eve_pair(state: LabeledState, x_ctrl: str, z_ctrl: str, bob_half: str) -> LabeledState:
    # Bob's half of X^i Z^j (x) I |Phi> carries Z^j X^i; undo with Z^j first.
    state = apply_gate(state, "CZ", [z_ctrl, bob_half])
    return apply_gate(state, "CX", [x_ctrl, bob_half])


def subprotocol2_send(psi: LabeledState, session: Session, message: str | None = None,
                      settle: bool = True):
    """Send ``psi`` by coherent teleportation plus coherent superdense coding.

    Bob's coherent correction of a pair he shares with Eve is controlled by
    the decoded bits, which always equal Alice's computational registers.
    When the literal schedule would exceed the qubit cap the oldest such
    pair is corrected early with Alice's registers as controls, which yields
    the identical final state, and then retired.  ``settle=False`` forbids
    this and raises ``SizeCap`` instead.
    """
    m = _message_label(psi, message)
    start_uses = session.channel.uses
    start_supply = session.trace.supply_uses
    session.trace.complete = False
    settle = settle and not session.live

    state = tensor(session.state, psi)
    state, a, b = session.take_ebit(state, "tp")
    state = apply_gate(state, "BellBasisChange", [m, a])

    pending: list[tuple[str, str]] = []
    settled = 0
    k = 0
    consumed = 1
    for attempt in range(session.max_retransmits + 1):
        if state.num_qubits + 2 > MAX_QUBITS and pending:
            if not settle:
                raise SizeCap(f"{state.num_qubits + 2} qubits needed for the next attempt")
            eve_half, bob_half = pending.pop(0)
            state = _correct_eve_pair(state, m, a, bob_half)
            state = factor_out(state, make_bell([_lab(state, eve_half), _lab(state, bob_half)]))
            settled += 1
        state, c1, c2 = session.take_ebit(state, "sd")
        consumed += 1
        state = apply_gate(state, "CZ", [a, c1])
        state = apply_gate(state, "CX", [m, c1])
        state, out = session.send(state, c1, "C1")
        if out.delivered:
            break
        k += 1
        pending.append((c1, c2))
    else:
        raise RetransmitCapExceeded(
            f"superdense attempt erased {session.max_retransmits + 1} times in a row"
        )

    d1, d2 = c1, c2
    state = bell_measure_decode(state, (d1, d2))
    state = apply_gate(state, "CX", [d1, b])
    state = apply_gate(state, "CZ", [d2, b])
    for eve_half, bob_half in pending:
        state = _correct_eve_pair(state, d1, d2, bob_half)

    blocks = [make_bell([_lab(state, m), _lab(state, d1)]),
              make_bell([_lab(state, a), _lab(state, d2)])]
    eve_blocks = [make_bell([_lab(state, e), _lab(state, bb)]) for e, bb in pending]
    final = state
    fid = _finish(state, session, blocks + eve_blocks, psi, m, b, "subprotocol 2")
    for block in blocks:
        session.return_ebit(block.ids[0], block.ids[1])

    uses = session.channel.uses - start_uses - (session.trace.supply_uses - start_supply)
    _book(session, MessageRecord(SUB2, k, 0, uses, consumed, 2, 0, k, fid, settled), psi, b)
    return final, session.trace


# --------------------------------------------------------------------------- #
# Runs                                                                        #
# --------------------------------------------------------------------------- #

SENDERS: dict[str, Callable] = {SUB1: subprotocol1_send, SUB2: subprotocol2_send}
# ebits pre-shared before the first message so that it does not start in debt
CATALYST = {SUB1: 1, SUB2: 2}

RUNSTATS_FIELDS = [
    "p", "strategy", "messages", "channel_uses", "empirical_rate", "mean_fidelity", "seed",
]


@dataclass
class RunStats:
    p: float
    strategy: str
    messages: int
    channel_uses: int
    message_uses: int
    supply_uses: int
    empirical_rate: float
    mean_fidelity: float
    min_fidelity: float
    seed: int
    run_index: int
    ledger: ResourceLedger
    trace: ProtocolTrace = field(repr=False)

    @property
    def fidelities(self) -> list[FidelityReport]:
        return [FidelityReport.of(r.fidelity) for r in self.trace.messages]

    @property
    def all_exact(self) -> bool:
        return self.min_fidelity >= 1.0 - EXACT_TOL

    def summary(self) -> dict:
        return {
            "p": self.p,
            "strategy": self.strategy,
            "messages": self.messages,
            "channel_uses": self.channel_uses,
            "message_uses": self.message_uses,
            "supply_uses": self.supply_uses,
            "empirical_rate": self.empirical_rate,
            "mean_fidelity": self.mean_fidelity,
            "min_fidelity": self.min_fidelity,
            "seed": self.seed,
            "run_index": self.run_index,
            "ledger": {
                "catalyst_ebits": self.ledger.catalyst,
                "ebits_left": self.ledger.pool,
                "ebits_generated": self.ledger.ebits_generated,
                "ebits_consumed": self.ledger.ebits_consumed,
                "ebits_returned": self.ledger.ebits_returned,
                "ebits_BE": self.ledger.ebits_BE,
                "ghz_ABE": self.ledger.ghz_ABE,
                "supply_wasted": self.ledger.supply_wasted,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    def csv_row(self) -> dict:
        return {
            "p": f"{self.p:.12g}",
            "strategy": self.strategy,
            "messages": self.messages,
            "channel_uses": self.channel_uses,
            "empirical_rate": f"{self.empirical_rate:.12g}",
            "mean_fidelity": f"{self.mean_fidelity:.12g}",
            "seed": self.seed,
        }


def runstats_csv(stats: list[RunStats]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RUNSTATS_FIELDS, lineterminator="\n")
    w.writeheader()
    for s in stats:
        w.writerow(s.csv_row())
    return buf.getvalue()


def random_message(rng: np.random.Generator) -> LabeledState:
    """Haar-random single-qubit message."""
    theta = math.acos(1.0 - 2.0 * rng.random())
    phi = 2.0 * math.pi * rng.random()
    return prepare_message(theta, phi, fresh_label("M", Party.ALICE))


def run_protocol(p: float, num_messages: int, strategy: str = AUTO, seed: int = 0,
                 run_index: int = 0, max_retransmits: int | None = None,
                 keep_events: bool = False, messages=None) -> RunStats:
    """Send ``num_messages`` random qubits and account for every channel use.

    The empirical rate counts ebit-generation uses as well as message uses.
    ``messages`` may supply an iterable of message states instead of random
    ones.
    """
    if num_messages < 1:
        raise ValueError("num_messages must be at least 1")
    resolved = choose_strategy(strategy, p)
    kw = {} if max_retransmits is None else {"max_retransmits": max_retransmits}
    cfg = ChannelConfig(p=p, seed=seed, **kw)
    session = Session.new(cfg, run_index, trace=ProtocolTrace(p=p, keep_events=keep_events))
    session.ledger.borrow_catalyst(CATALYST[resolved])
    send = SENDERS[resolved]
    msg_rng = make_rng(seed, (run_index, 1))
    source = iter(messages) if messages is not None else None
    for _ in range(num_messages):
        psi = next(source) if source is not None else random_message(msg_rng)
        send(psi, session)
    recs = session.trace.messages
    fids = np.array([r.fidelity for r in recs])
    led = session.ledger
    return RunStats(
        p=p,
        strategy=resolved,
        messages=len(recs),
        channel_uses=led.channel_uses,
        message_uses=led.message_uses,
        supply_uses=led.supply_uses,
        empirical_rate=len(recs) / led.channel_uses if led.channel_uses else math.inf,
        mean_fidelity=float(fids.mean()),
        min_fidelity=float(fids.min()),
        seed=seed,
        run_index=run_index,
        ledger=led,
        trace=session.trace,
    )
