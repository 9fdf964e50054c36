"""Empirical measurements of the hypotheses behind the limit theorems.

Every checker returns rows carrying an estimate, an uncertainty and a
verdict.  Constants in the hypotheses are existential, so only exponents,
trends and explicit finite certificates are checked.

Default thresholds: psi(r) = xi(r) = log(1/r)^2 for recurrence and
zeta(n) = log(n)^2 for the anti-concentration of cocycle sums.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy import stats as sps

from .returns import kappa_schedule_from_visits, return_batch
from .rng import RngStream
from .stats import dkw_radius, short_return_mass
from .systems import (
    Ball,
    SkewProduct,
    System,
    Target,
    TauSpec,
    sample_in_target_batch,
    sample_points,
    tau_ergodic_sum,
)


def log2_threshold(x):
    """log(x)^2 (used as psi(r) = log(1/r)^2 and zeta(n) = log(n)^2)."""
    return np.log(np.asarray(x, dtype=float)) ** 2


@dataclass
class CheckRow:
    condition: str
    parameter: float | None
    estimate: float
    uncertainty: float
    verdict: bool
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# exponent fits


@dataclass
class ExponentFit:
    ns: np.ndarray
    values: np.ndarray
    slope: float
    band: tuple  # 95% interval
    degenerate: bool = False

    def row(self, condition: str = "EE", limit: float | None = None) -> CheckRow:
        half = (self.band[1] - self.band[0]) / 2.0
        ok = (not self.degenerate) if limit is None else self.slope <= limit
        return CheckRow(condition, None, self.slope, half, ok, "degenerate" if self.degenerate else "")


def fit_exponent(ns, values, min_points: int = 5) -> ExponentFit:
    """Least-squares slope of log(value) on log(n) with a 95% t-band."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.size < min_points:
        raise ValueError(f"need at least {min_points} grid points, got {ns.size}")
    if np.all(values < 1e-12):
        return ExponentFit(ns, values, 0.0, (0.0, 0.0), degenerate=True)
    keep = values > 0
    x, y = np.log(ns[keep]), np.log(values[keep])
    res = sps.linregress(x, y)
    dof = x.size - 2
    half = sps.t.ppf(0.975, dof) * res.stderr if dof > 0 else math.inf
    return ExponentFit(ns, values, float(res.slope), (float(res.slope - half), float(res.slope + half)))


def dyadic_grid(lo: int, hi: int) -> np.ndarray:
    """2^lo, ..., 2^hi."""
    return 2 ** np.arange(lo, hi + 1, dtype=np.int64)


def ergodic_deviation(f: TauSpec, base: System, ys: np.ndarray, ns) -> np.ndarray:
    """S_n f(y) - n * mean(f) for every y and n; shape (M, len(ns))."""
    ns = np.asarray(ns, dtype=np.int64)
    sums = tau_ergodic_sum(f, base, ys, ns)
    return np.atleast_2d(sums) - ns[None, :] * f.mean


def estimate_ee_exponent(base: System, fns: Sequence[TauSpec], ns, n_samples: int, rng: RngStream) -> ExponentFit:
    """Growth exponent of the L2 norm of centered ergodic sums (max over the test functions)."""
    ys = sample_points(base.dim, rng, n_samples)
    norms = np.zeros(len(ns))
    for f in fns:
        dev = ergodic_deviation(f, base, ys, ns)
        norms = np.maximum(norms, np.sqrt(np.mean(dev**2, axis=0)))
    return fit_exponent(ns, norms)


@dataclass
class PointwiseReport:
    delta_prime: float
    envelopes: np.ndarray  # per-y sup of g over the whole grid
    flagged: np.ndarray  # per-y growth flag
    slopes: np.ndarray  # per-y log-log slope of g

    @property
    def passing_fraction(self) -> float:
        return float(1.0 - self.flagged.mean())

    def row(self, min_fraction: float = 0.95) -> CheckRow:
        n = self.flagged.size
        p = self.passing_fraction
        return CheckRow("EE-pointwise", self.delta_prime, p, math.sqrt(max(p * (1 - p), 1.0 / n) / n),
                        p >= min_fraction)


def pointwise_ee_check(base: System, f: TauSpec, ys, ns, delta_prime: float,
                       growth_factor: float = 2.0) -> PointwiseReport:
    """g_y(n) = |S_n f(y) - n mean(f)| / n^delta' along a grid, per y.

    The lower half of the grid calibrates an envelope constant; y is flagged
    when g_y on the upper half exceeds ``growth_factor`` times it.
    """
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    ns = np.asarray(ns, dtype=np.int64)
    if ns.size < 4:
        raise ValueError("need at least 4 grid points")
    g = np.abs(ergodic_deviation(f, base, ys, ns)) / ns[None, :].astype(float) ** delta_prime
    half = ns.size // 2
    lower = np.maximum(g[:, :half].max(axis=1), 1e-12)
    flagged = g[:, half:].max(axis=1) > growth_factor * lower
    logn = np.log(ns.astype(float))
    slopes = np.array([np.polyfit(logn, np.log(np.maximum(row, 1e-300)), 1)[0] for row in g])
    return PointwiseReport(delta_prime, g.max(axis=1), flagged, slopes)


def pointwise_exponent(delta: float, eps: float = 0.0) -> float:
    """delta' = (1 + 2 delta + eps) / 3."""
    return (1.0 + 2.0 * delta + eps) / 3.0


# ---------------------------------------------------------------------------
# recurrence


def center_min_return(base: System, center, r: float, cap: int) -> tuple[int, bool]:
    """First return of the center itself to B_r(center)."""
    b = return_batch(base, Ball(tuple(center), r), np.asarray(center, dtype=float)[None, :], 1, cap)
    return int(b.gaps[0, 0]), bool(b.censored[0, 0])


def check_recurrence(base: System, center, radii, mode: str, *, n_samples: int = 1000,
                     rng: RngStream | None = None, c: float = 1.0,
                     psi: Callable = None, xi: Callable = None,
                     from_center: bool = False, cap: int | None = None, tol: float = 0.05) -> list[CheckRow]:
    """Recurrence lower bounds on balls around ``center``.

    Modes: ``LR`` (returns >= c |log r|), ``SLR`` (returns >= psi(r)),
    ``D`` (returns >= c / r, the Diophantine rate), ``NSR`` (short-return
    mass below xi(r) shrinks with r and ends below ``tol``).
    With ``from_center`` the return of the center itself is used (exact,
    no sampling); otherwise the minimum over points sampled in the ball.
    """
    mode = mode.upper()
    if mode not in ("LR", "SLR", "NSR", "D"):
        raise ValueError(f"unknown recurrence mode {mode!r}")
    psi = psi or (lambda r: float(log2_threshold(1.0 / r)))
    xi = xi or (lambda r: float(log2_threshold(1.0 / r)))
    rng = rng or RngStream(0)
    rows: list[CheckRow] = []
    if mode == "NSR":
        for i, r in enumerate(radii):
            est = short_return_mass(base, Ball(tuple(center), r), int(math.ceil(xi(r))), n_samples, rng.child(i))
            rows.append(CheckRow("NSR", r, est.value, est.sigma, True))
        masses = np.array([row.estimate for row in rows])
        sig = np.array([row.uncertainty for row in rows])
        order = np.argsort(-np.asarray(radii, dtype=float))  # large radius first
        trend = all(masses[b] <= masses[a] + 3 * math.hypot(sig[a], sig[b]) for a, b in zip(order, order[1:]))
        final = masses[order[-1]] < tol
        for row in rows:
            row.verdict = bool(trend and final)
            row.note = f"xi(r)=log^2(1/r); trend {'non-increasing' if trend else 'increasing'}"
        return rows
    for i, r in enumerate(radii):
        target = Ball(tuple(center), r)
        thr = {"LR": c * abs(math.log(r)), "SLR": psi(r), "D": c / r}[mode]
        if from_center:
            cap_i = cap or int(math.ceil(100.0 / target.measure()))
            m, cens = center_min_return(base, center, r, cap_i)
            note = "center return"
        else:
            pts = sample_in_target_batch(target, rng.child(i), n_samples)
            b = return_batch(base, target, pts, 1, cap)
            m, cens = int(b.gaps[:, 0].min()), bool(b.censored.any())
            note = f"min over {n_samples} samples"
        if cens:
            note += "; censored"
        rows.append(CheckRow(mode, r, float(m), 0.0, m >= thr, f"{note}; threshold {thr:.6g}"))
    return rows


# ---------------------------------------------------------------------------
# anti-concentration of cocycle sums


@dataclass
class BAReport:
    ns: np.ndarray
    probabilities: np.ndarray
    sigmas: np.ndarray
    kappa: float
    band: tuple
    degenerate: bool

    @property
    def passed(self) -> bool:
        return (not self.degenerate) and self.band[0] > 0.0

    def row(self) -> CheckRow:
        half = (self.band[1] - self.band[0]) / 2.0 if np.isfinite(self.band[1]) else math.inf
        return CheckRow("BA", None, self.kappa, half, self.passed, "degenerate tau" if self.degenerate else "")


def check_ba(tau: TauSpec, base: System, ns, n_samples: int, rng: RngStream,
             zeta: Callable = log2_threshold) -> BAReport:
    """nu(|tau_n| < zeta(n)) on a grid of n and its fitted decay exponent kappa."""
    ns = np.asarray(ns, dtype=np.int64)
    if tau.is_degenerate:
        nan = np.full(ns.size, np.nan)
        return BAReport(ns, nan, nan, 0.0, (0.0, 0.0), True)
    ys = sample_points(base.dim, rng, n_samples)
    sums = np.atleast_2d(tau_ergodic_sum(tau, base, ys, ns))
    p = np.mean(np.abs(sums) < np.asarray(zeta(ns))[None, :], axis=0)
    sig = np.sqrt(p * (1.0 - p) / n_samples)
    if np.count_nonzero(p) < 3:
        return BAReport(ns, p, sig, math.inf, (math.inf, math.inf), False)
    fit = fit_exponent(ns[p > 0], p[p > 0], min_points=3)
    return BAReport(ns, p, sig, -fit.slope, (-fit.band[1], -fit.band[0]), False)


# ---------------------------------------------------------------------------
# uniform convergence of return sums


def uc_bound(s, delta: float, r: float) -> np.ndarray:
    """3 s^(-(1 - delta)/(r + 1)) + 2 / s."""
    s = np.asarray(s, dtype=float)
    return 3.0 * s ** (-(1.0 - delta) / (r + 1.0)) + 2.0 / s


@dataclass
class UCReport:
    s_grid: np.ndarray
    deviation: np.ndarray  # mean over y of sup over targets
    worst: np.ndarray  # max over y
    censored_fraction: float

    @property
    def decreasing(self) -> bool:
        return bool(self.deviation[-1] < self.deviation[0])

    def passed(self, tol: float = 0.05) -> bool:
        return self.decreasing and self.deviation[-1] < tol and self.censored_fraction == 0.0

    def rows(self, tol: float = 0.05) -> list[CheckRow]:
        ok = self.passed(tol)
        return [CheckRow("UC", float(s), float(d), float(w), ok, "deviation (mean over y); uncertainty = max over y")
                for s, d, w in zip(self.s_grid, self.deviation, self.worst)]


def uc_scale(target: Target) -> int:
    """N = ceil(1 / (2 nu(B)))."""
    return int(math.ceil(1.0 / (2.0 * target.measure())))


def check_uc(base: System, targets: Sequence[Target], s_grid, n_samples: int, rng: RngStream,
             cap: int | None = None) -> UCReport:
    """sup over targets of |nu(B)/(sN) sum_{j < ceil(sN)} phi_B(R_B^j y) - 1| versus s."""
    s_grid = np.asarray(s_grid, dtype=float)
    ys = sample_points(base.dim, rng, n_samples)
    dev = np.zeros((n_samples, s_grid.size))
    cens_rows = np.zeros(n_samples, dtype=bool)
    for b in targets:
        N = uc_scale(b)
        counts = np.ceil(s_grid * N).astype(np.int64)
        batch = return_batch(base, b, ys, int(counts.max()), cap)
        cens_rows |= batch.censored.any(axis=1)
        csum = np.cumsum(batch.gaps, axis=1)
        sums = csum[:, counts - 1]
        d = np.abs(b.measure() * sums / (s_grid * N)[None, :] - 1.0)
        dev = np.maximum(dev, d)
    return UCReport(s_grid, dev.mean(axis=0), dev.max(axis=0), float(cens_rows.mean()))


# ---------------------------------------------------------------------------
# bad returns of the skewing cocycle


@njit(cache=True)
def _bad_count(tau_at, times, zeta_table):
    L = tau_at.shape[0]
    bad = 0
    for n in range(L):
        for m in range(n + 1, L):
            if abs(tau_at[n] - tau_at[m]) < zeta_table[times[m] - times[n]]:
                bad += 1
                break
    return bad


@dataclass
class CensusRow:
    target_measure: float
    horizon: int
    bad_fraction: float  # mean over y of |bad returns| * mu(A)
    sigma: float
    censored: int

    def to_dict(self) -> dict:
        return asdict(self)


MAX_ZETA_TABLE = 50_000_000


def bad_return_census(system: SkewProduct, pairs: Sequence[tuple[Target, Target]], ys, t: float,
                      zeta: Callable = log2_threshold) -> list[CensusRow]:
    """Fraction of (l, y)-bad returns among the first ceil(t / mu(A_l)) visits.

    Probe n is bad if some later probe m has
    |tau_{alphatilde(n)}(y) - tau_{alphatilde(m)}(y)| < zeta(alphatilde(m) - alphatilde(n)),
    where alpha are the visit gaps of y to B_l.
    """
    if not isinstance(system, SkewProduct):
        raise TypeError("the census needs a skew product")
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    rows = []
    for a, b in pairs:
        mu = a.measure()
        L = int(math.ceil(t / mu))
        counts = []
        censored = 0
        for y in ys:
            _, sched = kappa_schedule_from_visits(system.base, b, y, L)
            if sched.censored:
                censored += 1
                continue
            times = sched.alphatilde
            if times[-1] > MAX_ZETA_TABLE:
                raise ValueError("visit times too long for the threshold table")
            tau_at = np.asarray(tau_ergodic_sum(system.tau, system.base, y, times), dtype=float)
            table = np.asarray(zeta(np.arange(1, times[-1] + 1)), dtype=float)
            table = np.concatenate([[0.0], table])
            counts.append(_bad_count(tau_at, times, table))
        frac = np.asarray(counts, dtype=float) * mu
        sig = float(frac.std(ddof=1) / math.sqrt(frac.size)) if frac.size > 1 else math.inf
        rows.append(CensusRow(mu, L, float(frac.mean()) if frac.size else math.nan, sig, censored))
    return rows


def zero_threshold(x):
    return np.zeros(np.shape(x))


# ---------------------------------------------------------------------------
# dimension inequality and label frequencies


def dimension_condition(d: int, d_base: int, r_base: float, delta1: float) -> CheckRow:
    """d > (3/2) d' (r' + 1) / (1 - delta_1), evaluated, not enforced."""
    rhs = 1.5 * d_base * (r_base + 1.0) / (1.0 - delta1)
    return CheckRow("dim", None, float(d) - rhs, 0.0, d > rhs, f"needs d > {rhs:.4g}")


def check_kappa_frequencies(labels, thetas, confidence: float = 0.999) -> list[CheckRow]:
    """Label frequencies against theta_k / sum(theta) with a DKW band."""
    labels = np.asarray(labels, dtype=np.int64)
    thetas = np.asarray(thetas, dtype=float)
    target = thetas / thetas.sum()
    n = labels.size
    rad = dkw_radius(n, confidence)
    rows = []
    for k, p in enumerate(target, start=1):
        est = float(np.mean(labels == k))
        rows.append(CheckRow("kappa", float(k), est, rad, abs(est - p) <= rad, f"target {p:.6g}"))
    return rows
