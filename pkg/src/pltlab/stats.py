"""Verdicts on return-time samples.

All laws are compared with the standard exponential; nothing is fitted.
Rescaling always uses the exact target measure.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .returns import ReturnBatch, default_cap, return_batch
from .rng import RngStream
from .systems import System, Target, sample_in_target_batch, sample_points

CONFIDENCE = 0.999
MAX_CENSOR_RATE = 0.01


class NoVerdictError(RuntimeError):
    """Too little usable data (empty sample or too much censoring)."""


@dataclass(frozen=True)
class Estimate:
    value: float
    sigma: float
    n: int

    def within(self, target: float, z: float = 3.0) -> bool:
        return abs(self.value - target) <= z * self.sigma


def dkw_radius(n: int, confidence: float = CONFIDENCE) -> float:
    """sup |F_n - F| <= radius with probability >= confidence."""
    if n < 1:
        raise NoVerdictError("empty sample")
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))


@dataclass(frozen=True, eq=False)
class EmpiricalLaw:
    """Rescaled first-coordinate gaps mu(A) * phi with censored entries removed."""

    samples: np.ndarray
    censor_rate: float = 0.0

    @property
    def n(self) -> int:
        return int(self.samples.size)

    @classmethod
    def from_batch(cls, batch: ReturnBatch, measure: float, column: int = 0) -> "EmpiricalLaw":
        cens = batch.censored[:, column]
        rate = float(cens.mean()) if cens.size else 0.0
        return cls(measure * batch.gaps[~cens, column].astype(float), rate)


def _require_verdict(law: EmpiricalLaw) -> None:
    if law.n == 0:
        raise NoVerdictError("empty sample")
    if law.censor_rate >= MAX_CENSOR_RATE:
        raise NoVerdictError(f"censor rate {law.censor_rate:.3%} >= {MAX_CENSOR_RATE:.0%}")


def ks_exponential(law: EmpiricalLaw) -> tuple[float, float]:
    """(sup_t |F_n(t) - (1 - e^-t)|, DKW radius at the package confidence).

    The supremum is attained at a jump of F_n, so it is evaluated exactly
    from the order statistics (ties included).
    """
    _require_verdict(law)
    x = np.sort(law.samples)
    n = x.size
    cdf = -np.expm1(-x)
    i = np.arange(1, n + 1)
    ks = max(float(np.max(i / n - cdf)), float(np.max(cdf - (i - 1) / n)))
    return ks, dkw_radius(n)


def empirical_cdf(law: EmpiricalLaw, points: int = 200) -> np.ndarray:
    """Rows (t, F_n(t), 1 - e^-t) on a grid up to the 99.9% exponential quantile."""
    t = np.linspace(0.0, -math.log(1e-3), points)
    x = np.sort(law.samples)
    fn = np.searchsorted(x, t, side="right") / max(x.size, 1)
    return np.column_stack([t, fn, -np.expm1(-t)])


# ---------------------------------------------------------------------------
# factorial moments of count increments


@dataclass(frozen=True)
class MomentCell:
    orders: tuple
    windows: tuple
    estimate: float
    sigma: float
    target: float
    passed: bool


def jackknife_sigma(values: np.ndarray) -> float:
    """Delete-one jackknife standard error of the mean of ``values``."""
    n = values.size
    if n < 2:
        return math.inf
    loo = (values.sum() - values) / (n - 1)
    return math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))


def _binomial(v: np.ndarray, m: int) -> np.ndarray:
    # falling factorial / m!; vanishes for 0 <= v < m
    out = np.ones(v.shape[0])
    for i in range(m):
        out *= v - i
    return out / math.factorial(m)


def factorial_moment_check(counts, windows, orders, z: float = 3.0) -> MomentCell:
    """E[prod_j C(S_{t_j} - S_{t_{j-1}}, m_j)] against prod_j (t_j - t_{j-1})^m_j / m_j!.

    ``counts`` has one column per window boundary t_0 < t_1 < ... < t_J.
    """
    counts = np.asarray(counts, dtype=np.int64)
    windows = tuple(float(w) for w in windows)
    orders = tuple(int(m) for m in orders)
    if any(b <= a for a, b in zip(windows, windows[1:])):
        raise ValueError("window boundaries must be strictly increasing")
    if len(orders) != len(windows) - 1 or counts.shape[1] != len(windows):
        raise ValueError("need one order per window and one count column per boundary")
    inc = np.diff(counts, axis=1)
    vals = np.ones(counts.shape[0])
    target = 1.0
    for j, m in enumerate(orders):
        vals *= _binomial(inc[:, j], m)
        target *= (windows[j + 1] - windows[j]) ** m / math.factorial(m)
    est = float(vals.mean())
    sigma = jackknife_sigma(vals)
    return MomentCell(orders, windows, est, sigma, target, abs(est - target) <= z * sigma)


def moment_values(counts, orders) -> np.ndarray:
    """prod_j C(increment_j, m_j) per sample, as exact integers."""
    inc = np.diff(np.asarray(counts, dtype=np.int64), axis=1)
    vals = np.ones(inc.shape[0], dtype=object)
    for j, m in enumerate(orders):
        vals *= np.array([math.comb(int(v), int(m)) for v in inc[:, j]], dtype=object)
    return vals


def moment_target(windows, orders) -> float:
    return math.prod((b - a) ** m / math.factorial(m) for a, b, m in zip(windows, windows[1:], orders))


def moment_cell_from_sums(total: int, squares: int, n: int, windows, orders, z: float = 3.0) -> MomentCell:
    """Cell from exact integer accumulators; sigma equals the delete-one jackknife of the mean."""
    if n < 2:
        raise NoVerdictError("need at least two samples")
    mean = total / n
    sigma = math.sqrt(max(squares * n - total * total, 0) / (n * n * (n - 1)))
    target = moment_target(windows, orders)
    return MomentCell(tuple(orders), tuple(windows), mean, sigma, target, abs(mean - target) <= z * sigma)


def counts_from_gaps(gaps: np.ndarray, censored: np.ndarray, horizons) -> np.ndarray:
    """S at each horizon from consecutive gaps, via S(n) >= k iff gap_1 + ... + gap_k <= n.

    Censored gaps count as beyond every horizon.
    """
    t = np.cumsum(gaps, axis=1, dtype=np.int64)
    t = np.where(np.cumsum(censored, axis=1) > 0, np.iinfo(np.int64).max, t)
    h = np.asarray(horizons, dtype=np.int64)
    return np.sum(t[:, None, :] <= h[None, :, None], axis=2)


def horizons_for(windows, measure: float) -> np.ndarray:
    """Probe counts floor(t / mu(A)) at rescaled window boundaries."""
    return np.array([int(math.floor(t / measure)) for t in windows], dtype=np.int64)


# ---------------------------------------------------------------------------
# law reports


@dataclass
class LawReport:
    n: int
    censor_rate: float
    ks: float | None = None
    dkw_radius: float | None = None
    factorial_moments: list = field(default_factory=list)
    d_metric: float | None = None
    verdicts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["factorial_moments"] = [asdict(c) if isinstance(c, MomentCell) else c for c in self.factorial_moments]
        return d


def law_report(law: EmpiricalLaw, threshold: float | None = None) -> LawReport:
    """KS summary; the exponential verdict uses ``threshold`` if given, else the DKW radius."""
    ks, rad = ks_exponential(law)
    limit = rad if threshold is None else threshold
    return LawReport(law.n, law.censor_rate, ks, rad, verdicts={"exponential": ks <= limit})


@dataclass
class PairReport:
    hitting: LawReport
    returning: LawReport

    @property
    def plt(self) -> bool:
        return self.hitting.verdicts["exponential"] and self.returning.verdicts["exponential"]


def hitting_batch(system: System, target: Target, n: int, rng: RngStream, cap: int | None = None,
                  start: int = 0, count: int = 1) -> ReturnBatch:
    """First hitting gaps from points distributed by the invariant (Lebesgue) measure."""
    pts = sample_points(system.dim, rng, n, start)
    return return_batch(system, target, pts, count, cap)


def conditional_batch(system: System, target: Target, n: int, rng: RngStream, cap: int | None = None,
                      start: int = 0, count: int = 1) -> ReturnBatch:
    """Return gaps from points distributed by the measure conditioned on the target."""
    pts = sample_in_target_batch(target, rng, n, start)
    return return_batch(system, target, pts, count, cap)


def return_stream(rng: RngStream) -> RngStream:
    """Stream used for conditional (return) samples paired with hitting samples on ``rng``."""
    return rng.child((rng.stream_id + 1) % 2**64)


def hitting_return_pair(system: System, target: Target, n: int, rng: RngStream, cap: int | None = None,
                        threshold: float | None = None) -> PairReport:
    mu = target.measure()
    hit = EmpiricalLaw.from_batch(hitting_batch(system, target, n, rng, cap), mu)
    ret = EmpiricalLaw.from_batch(conditional_batch(system, target, n, return_stream(rng), cap), mu)
    return PairReport(law_report(hit, threshold), law_report(ret, threshold))


def short_return_mass(system: System, target: Target, threshold: int, n: int, rng: RngStream,
                      start: int = 0) -> Estimate:
    """mu_A(phi_A <= threshold) with its binomial standard error."""
    b = conditional_batch(system, target, n, rng, cap=int(threshold), start=start)
    p = float((~b.censored[:, 0]).mean())
    return Estimate(p, math.sqrt(p * (1.0 - p) / n), n)


@dataclass(frozen=True)
class KacResult:
    mean: float
    sigma: float
    n: int
    censor_rate: float

    @property
    def passed(self) -> bool:
        return abs(self.mean - 1.0) <= 3.0 * self.sigma


def kac_check(system: System, target: Target, n: int, rng: RngStream, cap: int | None = None) -> KacResult:
    """Mean of mu(A) * phi_A under mu_A; Kac's formula predicts 1."""
    cap = default_cap(target) if cap is None else cap
    law = EmpiricalLaw.from_batch(conditional_batch(system, target, n, rng, cap), target.measure())
    _require_verdict(law)
    x = law.samples
    return KacResult(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), x.size, law.censor_rate)


# ---------------------------------------------------------------------------
# the law metric D

D_TERMS = 20  # 2^-20 < 1e-6 bounds the dropped tail


def pairing_table(J: int, terms: int = D_TERMS) -> list[tuple[int, int]]:
    """Enumeration n -> (j, k) of the test family, diagonal by diagonal in j + k."""
    out = []
    s = 2
    while len(out) < terms:
        for j in range(1, min(J, s - 1) + 1):
            k = s - j
            out.append((j, k))
            if len(out) == terms:
                break
        s += 1
    return out


@dataclass(frozen=True, eq=False)
class ProcessLaw:
    """Rescaled gap vectors, shape (N, J); censored coordinates are +inf."""

    samples: np.ndarray
    censor_rate: float = 0.0

    @property
    def J(self) -> int:
        return self.samples.shape[1]

    @classmethod
    def from_batch(cls, batch: ReturnBatch, measure: float) -> "ProcessLaw":
        x = measure * batch.gaps.astype(float)
        x[batch.censored] = np.inf
        return cls(x, batch.censor_rate)


def _test_values(law: ProcessLaw, j: int, k: int) -> np.ndarray:
    # 2^-j e^{-k s_j} / k: Lipschitz constant 1 for sum_j 2^-j |e^-s_j - e^-t_j|
    return 2.0**-j * np.exp(-k * law.samples[:, j - 1]) / k


@dataclass(frozen=True)
class DResult:
    value: float
    band: float  # 3-sigma Monte Carlo radius

    def __float__(self) -> float:
        return self.value


def theta_sums(law: ProcessLaw, terms: int = D_TERMS) -> np.ndarray:
    """Per test function: (sum, sum of squares) of its values over the sample; shape (terms, 2)."""
    out = np.zeros((terms, 2))
    for n, (j, k) in enumerate(pairing_table(law.J, terms)):
        v = _test_values(law, j, k)
        out[n] = math.fsum(v), math.fsum(v * v)
    return out


def d_from_sums(s1: np.ndarray, n1: int, s2: np.ndarray, n2: int) -> DResult:
    """D and its 3-sigma band from per-test (sum, sum of squares) accumulators."""
    if min(n1, n2) == 0:
        raise NoVerdictError("empty sample")
    value = 0.0
    band = 0.0
    for n in range(s1.shape[0]):
        m1, m2 = s1[n, 0] / n1, s2[n, 0] / n2
        v1 = max(s1[n, 1] / n1 - m1 * m1, 0.0)
        v2 = max(s2[n, 1] / n2 - m2 * m2, 0.0)
        value += 2.0 ** -(n + 1) * abs(m1 - m2)
        band += 2.0 ** -(n + 1) * 3.0 * math.sqrt(v1 / n1 + v2 / n2)
    return DResult(value, band)


def d_metric(law1: ProcessLaw, law2: ProcessLaw, terms: int = D_TERMS) -> DResult:
    """sum_n 2^-n |E_1 theta_n - E_2 theta_n| over the shipped test family."""
    if law1.J != law2.J:
        raise ValueError(f"laws carry {law1.J} and {law2.J} coordinates")
    n1, n2 = law1.samples.shape[0], law2.samples.shape[0]
    if min(n1, n2) == 0:
        raise NoVerdictError("empty sample")
    return d_from_sums(theta_sums(law1, terms), n1, theta_sums(law2, terms), n2)
