"""Quantum erasure channel with backward notification of the outcome.

The channel is modeled through its isometric extension: an erased qubit is
handed to Eve instead of being replaced by a flag state, and the erasure
flag travels as classical data known to both ends.  The amplitude vector is
never touched; only register ownership changes.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import LabeledState, Party, SystemLabel, make_rng
from .errors import BudgetExhausted, InvalidConfig, NotOwnedByAlice, PEqualsOne

DEFAULT_MAX_RETRANSMITS = 64


@dataclass(frozen=True)
class ChannelConfig:
    p: float
    max_retransmits: int = DEFAULT_MAX_RETRANSMITS
    seed: int = 0
    budget: int | None = None

    def __post_init__(self):
        if not (isinstance(self.p, (int, float)) and 0.0 <= self.p <= 1.0):
            raise InvalidConfig(f"erasure probability must lie in [0, 1], got {self.p!r}")
        if int(self.max_retransmits) < 1:
            raise InvalidConfig("max_retransmits must be at least 1")
        if self.budget is not None and self.budget < 0:
            raise InvalidConfig("budget must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")

    def truncated_tail(self) -> float:
        """Probability that one register needs more than ``max_retransmits`` erasures."""
        return self.p ** (self.max_retransmits + 1)


def load_config(path: str | Path) -> ChannelConfig:
    """Read ``p``, ``max_retransmits`` and ``seed`` from a key-value file.

    Both ``key = value`` files and INI files with a ``[channel]`` section are
    accepted.
    """
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser()
    if not text.lstrip().startswith("["):
        text = "[channel]\n" + text
    parser.read_string(text)
    section = parser["channel"] if parser.has_section("channel") else parser[parser.sections()[0]]
    try:
        return ChannelConfig(
            p=float(section["p"]),
            max_retransmits=int(section.get("max_retransmits", DEFAULT_MAX_RETRANSMITS)),
            seed=int(section.get("seed", 0)),
            budget=int(section["budget"]) if "budget" in section else None,
        )
    except KeyError as exc:
        raise InvalidConfig(f"missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None


@dataclass(frozen=True)
class TransmitOutcome:
    delivered: bool
    recipient_label: SystemLabel
    use_index: int

    @property
    def erased(self) -> bool:
        return not self.delivered


@dataclass
class ErasureChannel:
    """One erasure channel instance, used by a single protocol run.

    The random stream is keyed by ``(cfg.seed, run_index)`` so independent
    runs can be executed in any order or in parallel and still reproduce.
    """

    cfg: ChannelConfig
    run_index: int = 0
    rng: np.random.Generator = field(init=False, repr=False)
    uses: int = field(init=False, default=0)
    erasures: int = field(init=False, default=0)

    def __post_init__(self):
        self.rng = make_rng(self.cfg.seed, self.run_index)

    @property
    def p(self) -> float:
        return self.cfg.p

    def sample(self) -> bool:
        """Draw one delivery decision without a quantum payload."""
        if self.cfg.budget is not None and self.uses >= self.cfg.budget:
            raise BudgetExhausted(f"channel-use budget of {self.cfg.budget} exhausted")
        self.uses += 1
        delivered = bool(self.rng.random() >= self.cfg.p)
        if not delivered:
            self.erasures += 1
        return delivered

    def transmit(self, state: LabeledState, qubit) -> tuple[LabeledState, TransmitOutcome]:
        if state.party(qubit) is not Party.ALICE:
            raise NotOwnedByAlice(f"{state.label(qubit).id} is held by {state.party(qubit).value}")
        delivered = self.sample()
        out = state.with_party(qubit, Party.BOB if delivered else Party.EVE)
        return out, TransmitOutcome(delivered, out.label(qubit), self.uses - 1)


def transmit(state: LabeledState, qubit, channel: ErasureChannel) -> tuple[LabeledState, TransmitOutcome]:
    """Send ``qubit`` from Alice through ``channel``."""
    return channel.transmit(state, qubit)


def expected_uses_per_success(p: float) -> float:
    """Mean number of channel uses until one delivery, 1/(1-p)."""
    if p >= 1.0:
        raise PEqualsOne("no delivery ever happens when p = 1")
    if p < 0.0:
        raise InvalidConfig(f"p must be non-negative, got {p!r}")
    return 1.0 / (1.0 - p)


def delivery_band(p: float, n: int, sigmas: float = 3.0) -> float:
    """Half-width of a ``sigmas``-standard-error band around 1-p for n uses."""
    return sigmas * math.sqrt(p * (1.0 - p) / n)
