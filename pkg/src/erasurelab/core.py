"""Exact pure-state simulation over labeled qubit registers.

Register order is the label order; the first label is the most significant
bit of the amplitude index.  Every operation addresses registers by label id
and re-indexes explicitly, so callers never have to care where a register
sits in the vector.  States and density operators are immutable; every
operation returns a new value.

All logarithms are base 2.
"""

from __future__ import annotations

import enum
import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    ArityMismatch,
    DimensionMismatch,
    DuplicateLabel,
    NegativeEigenvalue,
    NonHermitian,
    NonUnitTrace,
    NotAProduct,
    OverlappingParts,
    SizeCap,
    UnknownGate,
    UnknownLabel,
)

MAX_QUBITS = 12
NORM_TOL = 1e-9
HERMITIAN_TOL = 1e-9
TRACE_TOL = 1e-9
CLAMP_TOL = 1e-12

SQRT1_2 = 1.0 / math.sqrt(2.0)


class Party(enum.Enum):
    ALICE = "Alice"
    BOB = "Bob"
    EVE = "Eve"
    REFERENCE = "Reference"


@dataclass(frozen=True)
class SystemLabel:
    id: str
    party: Party

    def to(self, party: Party) -> "SystemLabel":
        return SystemLabel(self.id, party)


_fresh_counter = itertools.count()


def fresh_label(prefix: str, party: Party) -> SystemLabel:
    """Return a label whose id is unique for the lifetime of the process."""
    return SystemLabel(f"{prefix}#{next(_fresh_counter)}", party)


LabelLike = Union[str, SystemLabel]


def _id(label: LabelLike) -> str:
    return label.id if isinstance(label, SystemLabel) else label


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


# --------------------------------------------------------------------------- #
# States                                                                      #
# --------------------------------------------------------------------------- #


class LabeledState:
    """A normalized pure state on an ordered list of labeled qubits."""

    __slots__ = ("amplitudes", "labels", "_index")

    def __init__(self, amplitudes, labels: Sequence[SystemLabel], *, check: bool = True):
        labels = tuple(labels)
        if len(labels) > MAX_QUBITS:
            raise SizeCap(f"{len(labels)} qubits exceeds the cap of {MAX_QUBITS}")
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if amps.size != 1 << len(labels):
            raise DimensionMismatch(
                f"{amps.size} amplitudes for {len(labels)} labels"
            )
        index = {lab.id: n for n, lab in enumerate(labels)}
        if len(index) != len(labels):
            raise DuplicateLabel("label ids must be unique within a state")
        if check:
            norm = float(np.vdot(amps, amps).real)
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        if amps.flags.writeable:
            amps = _readonly(amps.copy())
        self.amplitudes = amps
        self.labels = labels
        self._index = index

    @classmethod
    def _trusted(cls, amps: np.ndarray, labels: tuple[SystemLabel, ...],
                 index: dict | None = None) -> "LabeledState":
        """Internal constructor for values produced by unitary operations."""
        if len(labels) > MAX_QUBITS:
            raise SizeCap(f"{len(labels)} qubits exceeds the cap of {MAX_QUBITS}")
        self = cls.__new__(cls)
        amps.flags.writeable = False
        self.amplitudes = amps
        self.labels = labels
        self._index = index
        return self

    # -- introspection --------------------------------------------------
    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(lab.id for lab in self.labels)

    def __contains__(self, label: LabelLike) -> bool:
        if self._index is None:
            self._index = {lab.id: n for n, lab in enumerate(self.labels)}
        return _id(label) in self._index

    def __repr__(self) -> str:
        names = ", ".join(f"{lab.id}:{lab.party.value}" for lab in self.labels)
        return f"LabeledState([{names}])"

    def axis(self, label: LabelLike) -> int:
        if self._index is None:
            self._index = {lab.id: n for n, lab in enumerate(self.labels)}
        try:
            return self._index[_id(label)]
        except KeyError:
            raise UnknownLabel(_id(label)) from None

    def label(self, label: LabelLike) -> SystemLabel:
        return self.labels[self.axis(label)]

    def party(self, label: LabelLike) -> Party:
        return self.label(label).party

    def owned_by(self, party: Party) -> list[SystemLabel]:
        return [lab for lab in self.labels if lab.party is party]

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)

    # -- structural -----------------------------------------------------
    def with_party(self, label: LabelLike, party: Party) -> "LabeledState":
        """Reassign ownership of one register; amplitudes are shared."""
        ax = self.axis(label)
        labels = list(self.labels)
        labels[ax] = labels[ax].to(party)
        return LabeledState._trusted(self.amplitudes, tuple(labels), self._index)

    def permuted(self, order: Sequence[LabelLike]) -> "LabeledState":
        """Reorder registers to ``order`` (which must name every label)."""
        axes = [self.axis(x) for x in order]
        if sorted(axes) != list(range(self.num_qubits)):
            raise DimensionMismatch("permutation must name every register exactly once")
        if axes == list(range(self.num_qubits)):
            return self
        amps = np.ascontiguousarray(np.transpose(self.tensor_view(), axes)).reshape(-1)
        return LabeledState._trusted(amps, tuple(self.labels[a] for a in axes))

    @classmethod
    def basis(cls, labels: Sequence[SystemLabel], bits: Sequence[int] | None = None) -> "LabeledState":
        labels = tuple(labels)
        bits = [0] * len(labels) if bits is None else list(bits)
        if len(bits) != len(labels):
            raise ArityMismatch("one bit per label required")
        amps = np.zeros(1 << len(labels), dtype=complex)
        amps[int("".join(str(int(b)) for b in bits) or "0", 2)] = 1.0
        return cls(amps, labels)


State = LabeledState


def _as_labels(names: Sequence[LabelLike] | None, default: Sequence[str],
               parties: Sequence[Party]) -> list[SystemLabel]:
    """Resolve label arguments; bare strings take the matching default party."""
    if names is None:
        return [fresh_label(d, p) for d, p in zip(default, parties)]
    names = list(names)
    if len(names) != len(parties):
        raise ArityMismatch(f"expected {len(parties)} labels, got {len(names)}")
    return [x if isinstance(x, SystemLabel) else SystemLabel(x, p)
            for x, p in zip(names, parties)]


def make_bell(labels: Sequence[LabelLike] | None = None,
              parties: tuple[Party, Party] = (Party.ALICE, Party.BOB)) -> LabeledState:
    """(|00> + |11>)/sqrt(2) on two fresh (or given) registers."""
    labs = _as_labels(labels, ("phiA", "phiB"), parties)
    return LabeledState([SQRT1_2, 0, 0, SQRT1_2], labs)


def make_ghz(labels: Sequence[LabelLike] | None = None,
             parties: tuple[Party, Party, Party] = (Party.ALICE, Party.BOB, Party.EVE)) -> LabeledState:
    """(|000> + |111>)/sqrt(2) on three registers."""
    labs = _as_labels(labels, ("ghzA", "ghzB", "ghzE"), parties)
    amps = np.zeros(8, dtype=complex)
    amps[0] = amps[7] = SQRT1_2
    return LabeledState(amps, labs)


def prepare_message(theta: float, phi: float, label: LabelLike | None = None) -> LabeledState:
    """cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>, owned by Alice."""
    lab = _as_labels(None if label is None else [label], ("msg",), [Party.ALICE])[0]
    amps = [math.cos(theta / 2), complex(math.cos(phi), math.sin(phi)) * math.sin(theta / 2)]
    return LabeledState(amps, [lab])


def tensor(a: LabeledState, *rest: LabeledState) -> LabeledState:
    """Joint state of independent registers, ``a`` first."""
    out = a
    for b in rest:
        clash = set(out.ids) & set(b.ids)
        if clash:
            raise DuplicateLabel(f"labels already present: {sorted(clash)}")
        amps = np.multiply.outer(out.amplitudes, b.amplitudes).reshape(-1)
        out = LabeledState._trusted(amps, out.labels + b.labels)
    return out


# --------------------------------------------------------------------------- #
# Gates                                                                       #
# --------------------------------------------------------------------------- #

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT1_2


def _controlled(u: np.ndarray) -> np.ndarray:
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = u
    return out


def _bell_vector(i: int, j: int, phase_ordered: bool) -> np.ndarray:
    """Pauli-twisted Bell vector with the Pauli on the first qubit.

    ``phase_ordered=False`` gives X^i Z^j |Phi>; ``True`` gives Z^j X^i |Phi>.
    """
    phi = np.array([SQRT1_2, 0, 0, SQRT1_2], dtype=complex)
    xi = np.linalg.matrix_power(_X, i)
    zj = np.linalg.matrix_power(_Z, j)
    pauli = zj @ xi if phase_ordered else xi @ zj
    return np.kron(pauli, _I2) @ phi


def _bell_change(phase_ordered: bool) -> np.ndarray:
    rows = [_bell_vector(i, j, phase_ordered).conj() for i in (0, 1) for j in (0, 1)]
    return np.array(rows)


# BellToComputational: X^i Z^j|Phi> -> |ij>, the superdense decoding map.
# BellBasisChange: Z^j X^i|Phi> -> |ij>, chosen so that teleportation leaves
# exactly (1/2) sum_ij |ij>_MA X^i Z^j|psi>_B without stray signs.
GATES: dict[str, np.ndarray] = {
    "I": _I2,
    "X": _X,
    "Z": _Z,
    "H": _H,
    "CX": _controlled(_X),
    "CZ": _controlled(_Z),
    "SWAP": np.eye(4, dtype=complex)[[0, 2, 1, 3]],
    "BellBasisChange": _bell_change(phase_ordered=True),
    "BellToComputational": _bell_change(phase_ordered=False),
}
for _name in list(GATES):
    _readonly(GATES[_name])


@functools.lru_cache(maxsize=4096)
def _gather_index(n: int, axes: tuple[int, ...]) -> np.ndarray:
    """Flat indices arranged as (target basis value, rest basis value)."""
    rest = [a for a in range(n) if a not in axes]
    idx = np.arange(1 << n).reshape((2,) * n)
    idx = np.transpose(idx, list(axes) + rest).reshape(1 << len(axes), -1)
    return _readonly(np.ascontiguousarray(idx))


def apply_unitary(s: LabeledState, u: np.ndarray, targets: Sequence[LabelLike]) -> LabeledState:
    """Apply a 2^k x 2^k matrix to the registers ``targets`` (first = MSB)."""
    k = len(targets)
    if u.shape != (1 << k, 1 << k):
        raise ArityMismatch(f"matrix of shape {u.shape} acting on {k} registers")
    axes = tuple(s.axis(t) for t in targets)
    if len(set(axes)) != k:
        raise DuplicateLabel("gate targets must be distinct")
    idx = _gather_index(s.num_qubits, axes)
    out = np.empty_like(s.amplitudes)
    out[idx] = u @ s.amplitudes[idx]
    return LabeledState._trusted(out, s.labels, s._index)


def apply_gate(s: LabeledState, g: str, targets: Sequence[LabelLike] | LabelLike) -> LabeledState:
    """Apply a named gate.  For controlled gates the control comes first."""
    if isinstance(targets, (str, SystemLabel)):
        targets = [targets]
    try:
        u = GATES[g]
    except KeyError:
        raise UnknownGate(g) from None
    arity = u.shape[0].bit_length() - 1
    if len(targets) != arity:
        raise ArityMismatch(f"{g} acts on {arity} register(s), got {len(targets)}")
    return apply_unitary(s, u, targets)


def coherent_copy(s: LabeledState, source: LabelLike, fresh: SystemLabel) -> LabeledState:
    """Copy ``source`` in the computational basis onto a new |0> register."""
    if fresh.id in s:
        raise DuplicateLabel(fresh.id)
    s.axis(source)
    return apply_gate(tensor(s, LabeledState.basis([fresh])), "CX", [source, fresh])


def overlap(a: LabeledState, b: LabeledState) -> complex:
    """<a|b> after aligning ``b`` to ``a``'s register order."""
    if set(a.ids) != set(b.ids):
        raise DimensionMismatch("states live on different registers")
    return complex(np.vdot(a.amplitudes, b.permuted(a.ids).amplitudes))


def split_off(s: LabeledState, block: LabeledState) -> tuple[float, LabeledState | None]:
    """Project the registers of ``block`` onto ``block``.

    Returns ``(fidelity, rest)`` where fidelity is that of the marginal of
    ``s`` with the pure ``block`` and ``rest`` is the normalized remainder
    (``None`` when the projection vanishes).  Party tags must match.
    """
    drop = []
    for lab in block.labels:
        ax = s.axis(lab.id)
        if s.labels[ax].party is not lab.party:
            return 0.0, None
        drop.append(ax)
    n = s.num_qubits
    rest = block.amplitudes.conj() @ s.amplitudes[_gather_index(n, tuple(drop))]
    weight = float(np.vdot(rest, rest).real)
    if weight <= 0.0:
        return 0.0, None
    keep = tuple(s.labels[a] for a in range(n) if a not in drop)
    return min(math.sqrt(weight), 1.0), LabeledState._trusted(rest / math.sqrt(weight), keep)


def factor_out(s: LabeledState, expected: LabeledState, tol: float = NORM_TOL) -> LabeledState:
    """Remove registers that are verifiably in the product factor ``expected``.

    The remaining state is returned; raises ``NotAProduct`` when the
    fidelity between ``s`` and ``expected (x) rest`` falls short of 1 - tol.
    """
    f, rest = split_off(s, expected)
    if f < 1.0 - tol:
        raise NotAProduct(
            f"registers {list(expected.ids)} are not in the expected product state "
            f"(fidelity {f:.3e})"
        )
    return rest


# --------------------------------------------------------------------------- #
# Density operators                                                           #
# --------------------------------------------------------------------------- #


class DensityOp:
    """A validated density matrix on an ordered list of labels."""

    __slots__ = ("matrix", "labels")

    def __init__(self, matrix, labels: Sequence[SystemLabel], *, check: bool = True):
        labels = tuple(labels)
        m = np.asarray(matrix, dtype=complex)
        d = 1 << len(labels)
        if m.shape != (d, d):
            raise DimensionMismatch(f"matrix shape {m.shape} for {len(labels)} labels")
        if len({lab.id for lab in labels}) != len(labels):
            raise DuplicateLabel("label ids must be unique")
        if check:
            if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
                raise NonHermitian("density operator is not Hermitian")
            tr = np.trace(m).real
            if abs(tr - 1.0) > TRACE_TOL:
                raise NonUnitTrace(f"trace is {tr!r}")
        self.matrix = _readonly(m.copy()) if m.flags.writeable else m
        self.labels = labels

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(lab.id for lab in self.labels)

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    def __repr__(self) -> str:
        return f"DensityOp({list(self.ids)})"

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues with noise in [-1e-12, 0) clamped to zero."""
        w = np.linalg.eigvalsh(self.matrix)
        if w.size and w[0] < -CLAMP_TOL:
            raise NegativeEigenvalue(f"eigenvalue {w[0]!r} is not positive semidefinite noise")
        return np.clip(w, 0.0, None)

    def permuted(self, order: Sequence[LabelLike]) -> "DensityOp":
        index = {lab.id: n for n, lab in enumerate(self.labels)}
        try:
            axes = [index[_id(x)] for x in order]
        except KeyError as exc:
            raise UnknownLabel(exc.args[0]) from None
        if sorted(axes) != list(range(self.num_qubits)):
            raise DimensionMismatch("permutation must name every register exactly once")
        n = self.num_qubits
        t = self.matrix.reshape((2,) * (2 * n))
        t = np.transpose(t, axes + [n + a for a in axes]).reshape(1 << n, 1 << n)
        return DensityOp(t, [self.labels[a] for a in axes], check=False)


def projector(s: LabeledState) -> DensityOp:
    v = s.amplitudes
    return DensityOp(np.outer(v, v.conj()), s.labels, check=False)


def _keep_axes(labels: Sequence[SystemLabel], keep: Iterable[LabelLike]) -> list[int]:
    index = {lab.id: n for n, lab in enumerate(labels)}
    keep = list(keep)
    try:
        axes = [index[_id(x)] for x in keep]
    except KeyError as exc:
        raise UnknownLabel(exc.args[0]) from None
    if len(set(axes)) != len(axes):
        raise DuplicateLabel("repeated label in keep set")
    return axes


def partial_trace(s: LabeledState | DensityOp, keep: Iterable[LabelLike]) -> DensityOp:
    """Reduced density operator on ``keep`` (in the order given)."""
    if isinstance(s, LabeledState):
        axes = _keep_axes(s.labels, keep)
        rest = [a for a in range(s.num_qubits) if a not in axes]
        psi = np.transpose(s.tensor_view(), axes + rest).reshape(1 << len(axes), -1)
        return DensityOp(psi @ psi.conj().T, [s.labels[a] for a in axes], check=False)
    axes = _keep_axes(s.labels, keep)
    n = s.num_qubits
    rest = [a for a in range(n) if a not in axes]
    t = s.matrix.reshape((2,) * (2 * n))
    t = np.transpose(t, axes + rest + [n + a for a in axes] + [n + a for a in rest])
    dk, dr = 1 << len(axes), 1 << len(rest)
    t = t.reshape(dk, dr, dk, dr)
    return DensityOp(np.einsum("ajbj->ab", t), [s.labels[a] for a in axes], check=False)


def as_density(x: LabeledState | DensityOp) -> DensityOp:
    return projector(x) if isinstance(x, LabeledState) else x


# --------------------------------------------------------------------------- #
# Entropic functionals                                                        #
# --------------------------------------------------------------------------- #


def entropy_of_spectrum(w: np.ndarray) -> float:
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w))) if w.size else 0.0


def entropy(rho: DensityOp | LabeledState) -> float:
    """von Neumann entropy in bits."""
    if isinstance(rho, LabeledState):
        return 0.0
    if rho.num_qubits == 0:
        return 0.0
    return max(entropy_of_spectrum(rho.eigenvalues()), 0.0)


def marginal_entropy(s: LabeledState | DensityOp, part: Iterable[LabelLike]) -> float:
    """H of the marginal on ``part``; uses the smaller side for pure states."""
    part = [_id(x) for x in part]
    if not part:
        return 0.0
    if isinstance(s, LabeledState):
        if len(set(part)) == s.num_qubits and all(p in s for p in part):
            return 0.0
        if 2 * len(part) > s.num_qubits:
            for p in part:
                s.axis(p)
            part = [x for x in s.ids if x not in set(part)]
    return entropy(partial_trace(s, part))


def _check_parts(s, *parts: Sequence[LabelLike]) -> list[list[str]]:
    ids = set(s.ids)
    out = []
    seen: set[str] = set()
    for part in parts:
        p = [_id(x) for x in part]
        for x in p:
            if x not in ids:
                raise UnknownLabel(x)
        if seen & set(p) or len(set(p)) != len(p):
            raise OverlappingParts(f"parts overlap on {sorted(seen & set(p))}")
        seen |= set(p)
        out.append(p)
    return out


def mutual_information(s: LabeledState | DensityOp, a: Sequence[LabelLike], b: Sequence[LabelLike]) -> float:
    """I(A;B) = H(A) + H(B) - H(AB)."""
    a, b = _check_parts(s, a, b)
    return marginal_entropy(s, a) + marginal_entropy(s, b) - marginal_entropy(s, a + b)


def coherent_information(s: LabeledState | DensityOp, a: Sequence[LabelLike], b: Sequence[LabelLike]) -> float:
    """I(A>B) = H(B) - H(AB)."""
    a, b = _check_parts(s, a, b)
    return marginal_entropy(s, b) - marginal_entropy(s, a + b)


def _aligned(rho, sigma) -> tuple[DensityOp, DensityOp]:
    rho, sigma = as_density(rho), as_density(sigma)
    if set(rho.ids) != set(sigma.ids):
        raise DimensionMismatch(f"label sets differ: {rho.ids} vs {sigma.ids}")
    return rho, sigma.permuted(rho.ids)


SPECTRUM_FLOOR = 1e-13


def _floored(w: np.ndarray) -> np.ndarray:
    # round-off eigenvalues near zero would otherwise add their square roots
    return np.where(w > SPECTRUM_FLOOR, w, 0.0)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(_floored(w))) @ v.conj().T


def fidelity(rho: DensityOp | LabeledState, sigma: DensityOp | LabeledState) -> float:
    """Uhlmann fidelity tr sqrt(rho^1/2 sigma rho^1/2), in [0, 1]."""
    if isinstance(rho, LabeledState) and isinstance(sigma, LabeledState):
        return min(abs(overlap(rho, sigma)), 1.0)
    r, s = _aligned(rho, sigma)
    if isinstance(rho, LabeledState) or isinstance(sigma, LabeledState):
        pure, other = (rho, s) if isinstance(rho, LabeledState) else (sigma.permuted(r.ids), r)
        v = pure.amplitudes
        return float(min(math.sqrt(max(np.vdot(v, other.matrix @ v).real, 0.0)), 1.0))
    root = _psd_sqrt(r.matrix)
    w = np.linalg.eigvalsh(root @ s.matrix @ root)
    return float(min(np.sum(np.sqrt(_floored(w))), 1.0))


def trace_distance(rho: DensityOp | LabeledState, sigma: DensityOp | LabeledState) -> float:
    """Half the trace norm of rho - sigma."""
    r, s = _aligned(rho, sigma)
    w = np.linalg.eigvalsh(r.matrix - s.matrix)
    return float(min(0.5 * np.sum(np.abs(w)), 1.0))


# --------------------------------------------------------------------------- #
# Random states                                                               #
# --------------------------------------------------------------------------- #


def make_rng(seed: int, stream: int | Sequence[int] = ()) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *stream)``."""
    key = [int(seed) & (2**64 - 1)]
    key += [int(stream)] if isinstance(stream, (int, np.integer)) else [int(x) for x in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def random_pure_state(num_qubits: int, seed: int | np.random.Generator,
                      labels: Sequence[LabelLike] | None = None,
                      party: Party = Party.ALICE) -> LabeledState:
    """Haar-random pure state from normalized complex Gaussian amplitudes.

    ``seed`` may be an integer (deterministic) or an existing generator.
    """
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise SizeCap(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    d = 1 << num_qubits
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v /= np.linalg.norm(v)
    if labels is None:
        labs = [SystemLabel(f"q{n}", party) for n in range(num_qubits)]
    else:
        labs = _as_labels(labels, (), [party] * num_qubits)
    return LabeledState(v, labs)
