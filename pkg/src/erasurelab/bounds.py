"""Capacity bound curves and the martingale concentration experiment."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .core import make_rng
from .errors import GridOutOfRange, InfoOutOfRange, TooFewTraces

CURVE_TOL = 1e-12
MIN_TRACES = 1000


def _check_unit(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")


def capacity_reference(p: float) -> tuple[float, float]:
    """Unassisted and two-way assisted quantum capacities of the erasure channel."""
    _check_unit(p)
    return max(0.0, 1.0 - 2.0 * p), 1.0 - p


def prior_bounds(p: float) -> tuple[float, float]:
    """Hashing/teleportation lower bound and the two-way capacity as upper bound."""
    _check_unit(p)
    lower = 1.0 - 2.0 * p if p <= 0.4 else (1.0 - p) / 3.0
    return lower, 1.0 - p


def new_lower_bound(p: float) -> float:
    """Rate of the better of the two coherent-teleportation subprotocols."""
    _check_unit(p)
    if p <= 0.5:
        return (1.0 - p) ** 2
    return (1.0 - p) / (1.0 + 2.0 * p)


def new_upper_bound(p: float) -> float:
    _check_unit(p)
    return (1.0 - p) / (1.0 + p)


def separation_gap(p: float) -> float:
    """Two-way capacity minus the back-assisted upper bound, p(1-p)/(1+p)."""
    return capacity_reference(p)[1] - new_upper_bound(p)


def separation_certificate(grid: Sequence[float]) -> dict:
    """Check the upper bound sits strictly below 1-p on interior points."""
    grid = [float(p) for p in grid]
    if not grid:
        raise GridOutOfRange("empty grid")
    bad = [p for p in grid if not 0.0 < p < 1.0]
    if bad:
        raise GridOutOfRange(f"grid points outside (0, 1): {bad[:5]}")
    gaps = [separation_gap(p) for p in grid]
    i = int(np.argmin(gaps))
    return {
        "points": len(grid),
        "all_strict": all(g > 0.0 for g in gaps),
        "violations": sum(g <= 0.0 for g in gaps),
        "min_gap": gaps[i],
        "min_gap_p": grid[i],
        "min_gap_closed_form": grid[i] * (1 - grid[i]) / (1 + grid[i]),
    }


@dataclass(frozen=True)
class BoundCurvePoint:
    p: float
    q_unassisted: float
    q2: float
    prior_lower: float
    prior_upper: float
    new_lower: float
    new_upper: float

    CSV_FIELDS = ("p", "q_unassisted", "q2", "prior_lower", "prior_upper", "new_lower", "new_upper")

    @classmethod
    def at(cls, p: float) -> "BoundCurvePoint":
        q, q2 = capacity_reference(p)
        lo, hi = prior_bounds(p)
        return cls(p, q, q2, lo, hi, new_lower_bound(p), new_upper_bound(p))

    def rates(self) -> tuple[float, ...]:
        return (self.q_unassisted, self.q2, self.prior_lower, self.prior_upper,
                self.new_lower, self.new_upper)

    def nested(self, tol: float = CURVE_TOL) -> bool:
        """q <= prior_lower <= new_lower <= new_upper <= prior_upper = q2."""
        chain = (self.q_unassisted, self.prior_lower, self.new_lower, self.new_upper, self.prior_upper)
        ordered = all(a <= b + tol for a, b in zip(chain, chain[1:]))
        in_range = all(-tol <= r <= 1.0 + tol for r in self.rates())
        return ordered and in_range and abs(self.prior_upper - self.q2) <= tol


def default_grid(points: int = 1001) -> list[float]:
    return [i / (points - 1) for i in range(points)]


def figure1_data(grid: Sequence[float] | None = None) -> list[BoundCurvePoint]:
    """Bound curves; [new_lower, new_upper] is the remaining undetermined region."""
    grid = default_grid() if grid is None else grid
    return [BoundCurvePoint.at(float(p)) for p in grid]


def figure_csv(points: Sequence[BoundCurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BoundCurvePoint.CSV_FIELDS)
    for pt in points:
        w.writerow([f"{getattr(pt, name):.12g}" for name in BoundCurvePoint.CSV_FIELDS])
    return buf.getvalue()


# --------------------------------------------------------------------------- #
# Martingale                                                                  #
# --------------------------------------------------------------------------- #

InfoSchedule = Union[float, Sequence[float], Callable[[int, Sequence[float]], float]]


@dataclass
class MartingaleTrace:
    """One realization of the information-balance martingale.

    ``increments[i]`` is X_{i+1}; ``partial_sums`` starts at Y_0 = 0.
    """

    increments: np.ndarray
    partial_sums: np.ndarray
    delivered: np.ndarray
    info: np.ndarray
    p: float
    n: int
    m: int | None = None

    @property
    def final(self) -> float:
        return float(self.partial_sums[-1])


def harvested_schedule(values: Sequence[float]) -> Callable[[int, Sequence[float]], float]:
    """Cycle through measured mutual informations, e.g. from an audited run."""
    values = [float(v) for v in values]
    if not values:
        raise InfoOutOfRange("no harvested values")
    for v in values:
        _check_info(v)
    return lambda i, past: values[i % len(values)]


def _check_info(v: float) -> float:
    if not -1e-9 <= v <= 2.0 + 1e-9:
        raise InfoOutOfRange(f"mutual information of one qubit must lie in [0, 2], got {v!r}")
    return min(max(v, 0.0), 2.0)


def _increment(p: float, info: float, delivered: bool) -> float:
    return (p / 2.0) * info if delivered else -((1.0 - p) / 2.0) * info


def martingale_run(p: float, n: int, info_schedule: InfoSchedule, rng: np.random.Generator,
                   m: int | None = None) -> MartingaleTrace:
    """Draw one path Y_0..Y_n.

    ``info_schedule`` gives I(S_i; B_{i-1}R) for step i before the delivery
    coin for that step is tossed, so the increment has zero conditional
    mean.  It may be a constant, a sequence, or ``f(i, past_increments)``.
    """
    _check_unit(p)
    if n < 0:
        raise ValueError("n must be non-negative")
    xs = np.zeros(n)
    infos = np.zeros(n)
    delivered = np.zeros(n, dtype=bool)
    coins = rng.random(n)
    for i in range(n):
        if callable(info_schedule):
            info = info_schedule(i, xs[:i])
        elif np.ndim(info_schedule) == 0:
            info = info_schedule
        else:
            info = info_schedule[i]
        info = _check_info(float(info))
        d = bool(coins[i] >= p)
        delivered[i] = d
        infos[i] = info
        xs[i] = _increment(p, info, d)
    sums = np.concatenate([[0.0], np.cumsum(xs)])
    return MartingaleTrace(xs, sums, delivered, infos, p, n, m)


def martingale_finals(p: float, n: int, trials: int, info: float, seed: int) -> np.ndarray:
    """Y_n for ``trials`` independent paths with a constant information schedule."""
    _check_unit(p)
    info = _check_info(info)
    rng = make_rng(seed, 2)
    finals = np.empty(trials)
    chunk = max(1, 2_000_000 // max(n, 1))
    for start in range(0, trials, chunk):
        stop = min(trials, start + chunk)
        delivered = rng.random((stop - start, n)) >= p
        x = np.where(delivered, (p / 2.0) * info, -((1.0 - p) / 2.0) * info)
        finals[start:stop] = x.sum(axis=1)
    return finals


@dataclass
class AzumaReport:
    p: float
    n: int
    k: float
    trials: int
    empirical_tail: float
    azuma_bound: float
    sigma: float
    mean_final: float
    mean_stderr: float
    max_increment: float
    pass_: bool = field(metadata={"json": "pass"})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("pass_")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def azuma_bound(n: int, k: float) -> float:
    return math.exp(-(k * k / 2.0) * n)


def azuma_tail_check(traces, k: float, p: float | None = None, n: int | None = None,
                     max_increment: float | None = None) -> AzumaReport:
    """Compare Pr[|Y_n| >= kn] with exp(-k^2 n / 2).

    ``traces`` is a list of ``MartingaleTrace`` or an array of final values
    (then ``p`` and ``n`` are required).  The check passes when the
    empirical tail is at most the bound plus three Monte Carlo standard
    errors, evaluated at the bound.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if len(traces) and isinstance(traces[0], MartingaleTrace):
        ns = {t.n for t in traces}
        if len(ns) != 1:
            raise ValueError("traces must share a common n")
        n = ns.pop()
        p = traces[0].p
        finals = np.array([t.final for t in traces])
        max_increment = max(float(np.max(np.abs(t.increments), initial=0.0)) for t in traces)
    else:
        if p is None or n is None:
            raise ValueError("p and n are required with an array of finals")
        finals = np.asarray(traces, dtype=float)
    trials = len(finals)
    if trials < MIN_TRACES:
        raise TooFewTraces(f"{trials} traces; at least {MIN_TRACES} are needed")
    if max_increment is None:
        max_increment = max(p, 1.0 - p)
    bound = azuma_bound(n, k)
    tail = float(np.mean(np.abs(finals) >= k * n))
    sigma = math.sqrt(bound * (1.0 - bound) / trials)
    return AzumaReport(
        p=p, n=n, k=k, trials=trials,
        empirical_tail=tail,
        azuma_bound=bound,
        sigma=sigma,
        mean_final=float(finals.mean()),
        mean_stderr=float(finals.std(ddof=1) / math.sqrt(trials)),
        max_increment=float(max_increment),
        pass_=bool(tail <= bound + 3.0 * sigma and max_increment <= 1.0),
    )


def azuma_experiment(p: float, n: int, k: float, trials: int, seed: int, info: float = 2.0) -> AzumaReport:
    finals = martingale_finals(p, n, trials, info, seed)
    return azuma_tail_check(finals, k, p=p, n=n, max_increment=max(p, 1.0 - p) * info / 2.0)
