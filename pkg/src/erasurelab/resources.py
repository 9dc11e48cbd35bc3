"""Resource accounting and asymptotic resource inequalities.

A resource inequality ``lhs >= rhs`` says the left-hand resources simulate
the right-hand ones per message.  ``net_rate`` closes the ebit loop by
buying any ebit deficit with channel uses through the ebit-generation
inequality ``1 use >= (1-p) ebits``.  GHZ and Bob-Eve ebits are byproducts
and carry no value in the rate.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import IncompleteTrace, InfeasibleSupply, PEqualsOne


@dataclass(frozen=True)
class ResourceVector:
    channel_uses: float = 0.0
    ebits_AB: float = 0.0
    ebits_BE: float = 0.0
    ghz_ABE: float = 0.0
    qbits: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"{f.name} must be finite")

    def __add__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(*(a + b for a, b in zip(self.astuple(), other.astuple())))

    def __sub__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(*(a - b for a, b in zip(self.astuple(), other.astuple())))

    def __mul__(self, c: float) -> "ResourceVector":
        return ResourceVector(*(c * a for a in self.astuple()))

    __rmul__ = __mul__

    def astuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))


@dataclass(frozen=True)
class ResourceInequality:
    lhs: ResourceVector
    rhs: ResourceVector

    def __post_init__(self):
        if min(self.lhs.astuple() + self.rhs.astuple()) < 0:
            raise ValueError("resource inequalities have non-negative sides")


def _check_p(p: float) -> None:
    if p >= 1.0:
        raise PEqualsOne("the channel never delivers at p = 1")
    if p < 0.0:
        raise ValueError(f"p must be in [0, 1), got {p!r}")


def ebit_supply(p: float) -> ResourceInequality:
    """One channel use yields (1-p) ebits with back communication."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p!r}")
    return ResourceInequality(ResourceVector(channel_uses=1.0), ResourceVector(ebits_AB=1.0 - p))


def sub1_inequality(p: float) -> ResourceInequality:
    """Coherent teleportation with retransmission of both correction bits."""
    _check_p(p)
    return ResourceInequality(
        lhs=ResourceVector(channel_uses=2.0 / (1.0 - p), ebits_AB=1.0),
        rhs=ResourceVector(qbits=1.0, ebits_AB=2.0 * (1.0 - p), ghz_ABE=2.0 * p),
    )


def sub2_inequality(p: float) -> ResourceInequality:
    """Coherent teleportation whose corrections travel by coherent superdense coding."""
    _check_p(p)
    tries = 1.0 / (1.0 - p)
    return ResourceInequality(
        lhs=ResourceVector(channel_uses=tries, ebits_AB=1.0 + tries),
        rhs=ResourceVector(qbits=1.0, ebits_AB=2.0, ebits_BE=tries - 1.0),
    )


def net_rate(ineq: ResourceInequality, supply: ResourceInequality) -> float:
    """Qubits delivered per channel use once the ebit deficit is bought.

    A surplus of ebits is simply carried forward; it never lowers the cost.
    """
    if supply.lhs.channel_uses <= 0 or supply.lhs.ebits_AB > 0:
        raise InfeasibleSupply("supply must turn channel uses alone into ebits")
    yield_ = supply.rhs.ebits_AB / supply.lhs.channel_uses
    deficit = max(0.0, ineq.lhs.ebits_AB - ineq.rhs.ebits_AB)
    if deficit > 0 and yield_ <= 0:
        raise InfeasibleSupply(f"ebit yield {yield_!r} cannot cover a deficit")
    uses = ineq.lhs.channel_uses + (deficit / yield_ if deficit > 0 else 0.0)
    return ineq.rhs.qbits / uses


def protocol_rate(p: float, protocol: str) -> float:
    """``net_rate`` for ``protocol`` in {"sub1", "sub2", "auto"}; 0 at p = 1."""
    protocol = protocol.lower()
    if protocol == "auto":
        protocol = "sub2" if p <= 0.5 else "sub1"
    if p >= 1.0:
        return 0.0
    ineq = {"sub1": sub1_inequality, "sub2": sub2_inequality}[protocol](p)
    return net_rate(ineq, ebit_supply(p))


INEQUALITY_CSV_FIELDS = [
    "p", "protocol",
    "lhs_channel_uses", "lhs_ebits_AB",
    "rhs_qbits", "rhs_ebits_AB", "rhs_ebits_BE", "rhs_ghz_ABE",
    "net_rate",
]


def inequality_rows(grid, protocols=("sub1", "sub2")) -> list[dict]:
    rows = []
    for p in grid:
        for name in protocols:
            if p >= 1.0:
                continue
            ineq = {"sub1": sub1_inequality, "sub2": sub2_inequality}[name](p)
            rows.append({
                "p": p, "protocol": name,
                "lhs_channel_uses": ineq.lhs.channel_uses, "lhs_ebits_AB": ineq.lhs.ebits_AB,
                "rhs_qbits": ineq.rhs.qbits, "rhs_ebits_AB": ineq.rhs.ebits_AB,
                "rhs_ebits_BE": ineq.rhs.ebits_BE, "rhs_ghz_ABE": ineq.rhs.ghz_ABE,
                "net_rate": net_rate(ineq, ebit_supply(p)),
            })
    return rows


def inequality_csv(grid, protocols=("sub1", "sub2")) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=INEQUALITY_CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in inequality_rows(grid, protocols):
        w.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


# --------------------------------------------------------------------------- #
# Run ledger                                                                  #
# --------------------------------------------------------------------------- #


@dataclass
class ResourceLedger:
    """Append-only counters for one run; ``merge`` is associative."""

    message_uses: int = 0
    supply_uses: int = 0
    supply_wasted: int = 0
    ebits_generated: int = 0
    ebits_consumed: int = 0
    ebits_returned: int = 0
    ebits_BE: int = 0
    ghz_ABE: int = 0
    qbits: int = 0
    catalyst: int = 0
    pool: int = field(default=0)

    @property
    def channel_uses(self) -> int:
        return self.message_uses + self.supply_uses

    def borrow_catalyst(self, n: int) -> None:
        """Pre-share ``n`` ebits that are not paid for with channel uses."""
        self.catalyst += n
        self.pool += n

    def merge(self, other: "ResourceLedger") -> "ResourceLedger":
        a, b = asdict(self), asdict(other)
        return ResourceLedger(**{k: a[k] + b[k] for k in a})

    def as_vector(self) -> ResourceVector:
        return ResourceVector(
            channel_uses=float(self.channel_uses),
            ebits_AB=float(self.pool - self.catalyst),
            ebits_BE=float(self.ebits_BE),
            ghz_ABE=float(self.ghz_ABE),
            qbits=float(self.qbits),
        )


def per_message_samples(trace) -> dict[str, np.ndarray]:
    """Per-message resource samples from a completed protocol trace."""
    if not getattr(trace, "complete", False):
        raise IncompleteTrace("trace has an unfinished message")
    recs = trace.messages
    if not recs:
        raise IncompleteTrace("trace contains no messages")
    if sum(r.uses for r in recs) + trace.supply_uses != trace.event_count:
        raise IncompleteTrace("recorded channel events do not match the per-message uses")
    return {
        "channel_uses": np.array([r.uses for r in recs], dtype=float),
        "ebits_consumed": np.array([r.ebits_consumed for r in recs], dtype=float),
        "ebits_AB": np.array([r.ebits_produced for r in recs], dtype=float),
        "ebits_BE": np.array([r.ebits_BE for r in recs], dtype=float),
        "ghz_ABE": np.array([r.ghz for r in recs], dtype=float),
        "qbits": np.ones(len(recs)),
    }


def ledger_reconcile(trace) -> ResourceInequality:
    """Empirical per-message resource inequality; converges to the asymptotic one.

    The left side holds message channel uses (ebit generation excluded) and
    ebits consumed; the right side holds what each message leaves behind.
    """
    s = per_message_samples(trace)
    return ResourceInequality(
        lhs=ResourceVector(channel_uses=s["channel_uses"].mean(), ebits_AB=s["ebits_consumed"].mean()),
        rhs=ResourceVector(
            qbits=1.0,
            ebits_AB=s["ebits_AB"].mean(),
            ebits_BE=s["ebits_BE"].mean(),
            ghz_ABE=s["ghz_ABE"].mean(),
        ),
    )


def standard_errors(trace) -> dict[str, float]:
    s = per_message_samples(trace)
    n = len(s["qbits"])
    return {k: float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf for k, v in s.items()}
