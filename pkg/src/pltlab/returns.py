"""Return-time processes: plain, fiberwise, delayed and label-scheduled.

Gaps are stored, absolute times are derived.  A search that runs past its
cap is recorded as censored (gap = cap) instead of raising; every later entry
of the same sequence is censored as well.

Delayed returns count probes, not iterates: with delays ``alpha`` the j-th
probe looks at the orbit at time ``alphatilde[j] = alpha[1] + ... + alpha[j]``.
Successive returns are strictly increasing probe indices.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .parallel import map_rows
from .systems import (
    FullSpace,
    LabeledUnion,
    System,
    Target,
    _as_batch,
    system_kernel,
    target_kernel,
)

FLAVORS = ("plain", "fiberwise", "delayed", "kappa")


def default_cap(target: Target) -> int:
    """100 expected return times (by Kac)."""
    return int(math.ceil(100.0 / target.measure()))


@dataclass(frozen=True, eq=False)
class ReturnSequence:
    gaps: np.ndarray
    censored: np.ndarray
    flavor: str
    cap: int
    schedule_key: str | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ValueError(f"unknown flavor {self.flavor!r}")

    def __len__(self) -> int:
        return len(self.gaps)

    @property
    def times(self) -> np.ndarray:
        """Absolute return times (prefix sums of the gaps)."""
        total = sum(int(g) for g in self.gaps)
        if total >= 2**63:
            raise OverflowError("return times exceed 64-bit range")
        return np.cumsum(self.gaps, dtype=np.int64)

    @property
    def any_censored(self) -> bool:
        return bool(self.censored.any())

    def uncensored(self) -> np.ndarray:
        return self.gaps[~self.censored]


@dataclass(frozen=True, eq=False)
class ReturnBatch:
    """Return sequences for many initial points: arrays of shape (N, count)."""

    gaps: np.ndarray
    censored: np.ndarray
    flavor: str
    cap: int
    schedule_key: str | None = None
    labels: np.ndarray | None = None

    def __len__(self) -> int:
        return self.gaps.shape[0]

    def row(self, i: int) -> ReturnSequence:
        labels = None if self.labels is None else self.labels[i]
        return ReturnSequence(self.gaps[i], self.censored[i], self.flavor, self.cap, self.schedule_key, labels)

    @property
    def censor_rate(self) -> float:
        return float(self.censored.mean()) if self.censored.size else 0.0


def _schedule_key(alpha: np.ndarray, labels: np.ndarray | None) -> str:
    h = hashlib.sha256(np.ascontiguousarray(alpha, dtype=np.int64).tobytes())
    if labels is not None:
        h.update(np.ascontiguousarray(labels, dtype=np.int64).tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class DelaySchedule:
    """Delay sequence alpha (positive integers) and its partial sums.

    ``censored`` marks a schedule cut short because the base orbit that
    generated it did not return within its cap.
    """

    alpha: np.ndarray
    censored: bool = False
    alphatilde: np.ndarray = field(init=False)
    key: str = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.int64).ravel()
        if a.size and a.min() < 1:
            raise ValueError("delays must be positive integers")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "alphatilde", np.cumsum(a, dtype=np.int64))
        object.__setattr__(self, "key", _schedule_key(a, None))

    def __len__(self) -> int:
        return len(self.alpha)

    @classmethod
    def constant(cls, delay: int, length: int) -> "DelaySchedule":
        return cls(np.full(length, delay, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class KappaSchedule:
    """Per-probe component labels in 1..K."""

    labels: np.ndarray
    K: int
    frequencies: np.ndarray = field(init=False)

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64).ravel()
        if lab.size and (lab.min() < 1 or lab.max() > self.K):
            raise ValueError(f"labels must lie in 1..{self.K}")
        object.__setattr__(self, "labels", lab)
        counts = np.bincount(lab, minlength=self.K + 1)[1:]
        freq = counts / lab.size if lab.size else np.zeros(self.K)
        object.__setattr__(self, "frequencies", freq)

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def ones(cls, length: int) -> "KappaSchedule":
        return cls(np.ones(length, dtype=np.int64), 1)


# ---------------------------------------------------------------------------
# plain and fiberwise returns


def _check_dims(system: System, target: Target, offset: int = 0, span: int | None = None):
    span = system.dim - offset if span is None else span
    if target.dim != span:
        raise ValueError(f"target of dimension {target.dim} on a {span}-dimensional space")


def return_batch(system: System, target: Target, points, count: int = 1, cap: int | None = None,
                 *, offset: int = 0, flavor: str = "plain") -> ReturnBatch:
    """Consecutive return gaps of many points to ``target`` (placed on coordinates ``offset..``)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    cap = default_cap(target) if cap is None else int(cap)
    if cap < 1:
        raise ValueError("cap must be >= 1")
    pts, _ = _as_batch(points, system.dim)
    step, fp = system_kernel(system)
    label, _, tf = target_kernel(target, offset)
    gaps, cens, labels = map_rows(lambda s: K.return_gaps(step, fp, label, tf, s, count, cap), pts)
    return ReturnBatch(gaps, cens, flavor, cap, None, labels)


def first_return(system: System, target: Target, p, cap: int | None = None) -> tuple[int, bool]:
    """(smallest n <= cap with T^n p in target, censored flag)."""
    _check_dims(system, target)
    b = return_batch(system, target, np.atleast_1d(np.asarray(p, dtype=float))[None, :], 1, cap)
    return int(b.gaps[0, 0]), bool(b.censored[0, 0])


def return_sequence(system: System, target: Target, p, count: int, cap: int | None = None) -> ReturnSequence:
    _check_dims(system, target)
    return return_batch(system, target, np.atleast_1d(np.asarray(p, dtype=float))[None, :], count, cap).row(0)


def _fiber_state(system: System, x, y) -> np.ndarray:
    dx = system.fiber_dim
    if dx is None:
        raise ValueError(f"{type(system).__name__} has no fiber structure")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[1] != dx or y.shape[1] != system.dim - dx:
        raise ValueError("x / y dimensions do not match the system")
    n = max(x.shape[0], y.shape[0])
    if {x.shape[0], y.shape[0]} - {1, n}:
        raise ValueError("x and y batches differ in length")
    x = np.broadcast_to(x, (n, dx))
    y = np.broadcast_to(y, (n, y.shape[1]))
    return np.concatenate([x, y], axis=1)


def fiberwise_return_batch(system: System, target: Target, x, y, count: int = 1,
                           cap: int | None = None) -> ReturnBatch:
    state = _fiber_state(system, x, y)
    _check_dims(system, target, 0, system.fiber_dim)
    return return_batch(system, target, state, count, cap, flavor="fiberwise")


def fiberwise_return_sequence(system: System, target: Target, x, y, count: int,
                              cap: int | None = None) -> ReturnSequence:
    """Returns of x to ``target`` along the fiber maps T_y, T_{Ry}, ... ."""
    return fiberwise_return_batch(system, target, x, y, count, cap).row(0)


# ---------------------------------------------------------------------------
# delayed and label-scheduled returns


def _kappa_targets(targets: Target) -> tuple[Target, int]:
    if isinstance(targets, LabeledUnion):
        return targets, targets.K
    return LabeledUnion(((targets,),)), 1


def _delayed_setup(system, targets, schedule, kappa, p, y):
    union, K_ = _kappa_targets(targets)
    if kappa is None:
        kappa = KappaSchedule.ones(len(schedule))
    if kappa.K > K_ or (len(kappa) and kappa.labels.max() > K_):
        raise ValueError(f"kappa labels exceed the {K_} available targets")
    if len(kappa) < len(schedule):
        raise ValueError("kappa schedule shorter than the delay schedule")
    if y is None:
        pts, _ = _as_batch(p, system.dim)
        _check_dims(system, union)
    else:
        pts = _fiber_state(system, p, y)
        _check_dims(system, union, 0, system.fiber_dim)
    step, fp = system_kernel(system)
    _, clause, tf = target_kernel(union, 0)
    kap = np.ascontiguousarray(kappa.labels[: len(schedule)])
    return pts, step, fp, clause, tf, kap, union


def delayed_batch(system: System, targets: Target, schedule: DelaySchedule, points, count: int = 1,
                  cap: int | None = None, *, kappa: KappaSchedule | None = None, y=None) -> ReturnBatch:
    """Delayed return gaps (in probes) for many points.

    With ``kappa`` the j-th probe tests only component ``kappa[j]`` of the
    labeled union ``targets``.  With ``y`` the points are fiber coordinates
    and ``y`` the base point(s).  Probes past the end of the schedule are
    censored.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    pts, step, fp, clause, tf, kap, union = _delayed_setup(system, targets, schedule, kappa, points, y)
    cap = default_cap(union) if cap is None else int(cap)
    alpha = schedule.alpha
    gaps, cens = map_rows(lambda s: K.delayed_gaps(step, fp, clause, tf, s, alpha, kap, count, cap), pts)
    flavor = "delayed" if kappa is None else "kappa"
    return ReturnBatch(gaps, cens, flavor, cap, schedule.key)


def delayed_return_sequence(system: System, target: Target, schedule: DelaySchedule, p, count: int,
                            cap: int | None = None) -> ReturnSequence:
    p = np.atleast_1d(np.asarray(p, dtype=float))[None, :]
    return delayed_batch(system, target, schedule, p, count, cap).row(0)


def kappa_delayed_sequence(system: System, targets: Target, schedule: DelaySchedule, kappa: KappaSchedule,
                           p, count: int, cap: int | None = None, y=None) -> ReturnSequence:
    p = np.atleast_1d(np.asarray(p, dtype=float))[None, :]
    return delayed_batch(system, targets, schedule, p, count, cap, kappa=kappa, y=y).row(0)


def kappa_schedule_from_visits(base: System, union: Target, y, length: int,
                               cap: int | None = None) -> tuple[KappaSchedule, DelaySchedule]:
    """Delays = gaps between visits of y to the union; labels = component entered at each visit.

    If the base orbit fails to return within ``cap`` the schedules stop at the
    last completed visit and the delay schedule is marked censored.
    """
    union, K_ = _kappa_targets(union)
    if union.dim != base.dim:
        raise ValueError("union must live on the base space")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    b = return_batch(base, union, y[None, :], length, cap)
    ok = ~b.censored[0]
    alpha = b.gaps[0][ok]
    labels = b.labels[0][ok]
    return KappaSchedule(labels, K_), DelaySchedule(alpha, censored=not ok.all())


def count_batch(system: System, targets: Target, schedule: DelaySchedule, points, horizons,
                *, kappa: KappaSchedule | None = None, y=None) -> np.ndarray:
    """S^(n) = number of successful probes among the first n, for each horizon n; shape (N, J)."""
    horizons = np.atleast_1d(np.asarray(horizons, dtype=np.int64))
    if np.any(np.diff(horizons) < 0) or np.any(horizons < 0):
        raise ValueError("horizons must be sorted and nonnegative")
    if horizons.size and horizons[-1] > len(schedule):
        raise ValueError(f"horizon {horizons[-1]} beyond schedule of length {len(schedule)}")
    pts, step, fp, clause, tf, kap, _ = _delayed_setup(system, targets, schedule, kappa, points, y)
    alpha = schedule.alpha
    return map_rows(lambda s: K.delayed_counts(step, fp, clause, tf, s, alpha, kap, horizons), pts)


def count_process(system: System, targets: Target, schedule: DelaySchedule, kappa: KappaSchedule | None,
                  p, n: int, y=None) -> int:
    p = np.atleast_1d(np.asarray(p, dtype=float))[None, :]
    return int(count_batch(system, targets, schedule, p, [n], kappa=kappa, y=y)[0, 0])


# ---------------------------------------------------------------------------
# composition of fiber returns with base returns


def rectangle_return_compose(fiber_seq: ReturnSequence, base_schedule: DelaySchedule) -> ReturnSequence:
    """Raw-time return gaps to a union of rectangles from probe-counted fiber returns.

    ``fiber_seq`` must come from ``kappa_delayed_sequence`` (or the delayed
    flavor) run on ``base_schedule``, the visit gaps of the same y to the base
    sets.  The i-th composed return time is ``alphatilde`` at the probe index
    of the i-th fiber return.
    """
    if fiber_seq.schedule_key != base_schedule.key:
        raise ValueError("fiber returns were not computed on this base schedule")
    idx = np.cumsum(fiber_seq.gaps, dtype=np.int64)
    cens = fiber_seq.censored.copy()
    cens |= idx > len(base_schedule)
    at = np.concatenate([[0], base_schedule.alphatilde])
    times = np.where(cens, 0, at[np.minimum(idx, len(base_schedule))])
    gaps = np.diff(np.concatenate([[0], times]))
    cap = int(base_schedule.alphatilde[-1]) if len(base_schedule) else 1
    gaps = np.where(cens, cap, gaps)
    return ReturnSequence(gaps.astype(np.int64), cens, "plain", cap)


def whole_space(dim: int) -> FullSpace:
    """Stand-in base set that every point visits (all base gaps equal 1)."""
    return FullSpace(dim)


# ---------------------------------------------------------------------------
# CSV dumps

CSV_COLUMNS = ("flavor", "gap", "censored")


def write_sequences_csv(seqs, fh) -> None:
    """One row per gap: flavor, gap, censored flag (0/1)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in seqs:
        for g, c in zip(s.gaps.tolist(), s.censored.tolist()):
            w.writerow((s.flavor, g, int(c)))


def read_sequences_csv(fh) -> list[tuple[str, int, bool]]:
    r = csv.DictReader(fh)
    return [(row["flavor"], int(row["gap"]), row["censored"] == "1") for row in r]
