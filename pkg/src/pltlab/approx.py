"""Smooth sandwiches of ball indicators and decorrelation measurements.

The transition profile is ``theta(u) = 1 - S(u)`` where ``S`` is the
generalized smoothstep of degree ``2r + 1``::

    S(u) = u^(r+1) * sum_{n=0}^{r} C(r+n, n) C(2r+1, r-n) (-u)^n,  0 <= u <= 1

clamped to 0 below 0 and 1 above 1.  ``S`` rises from 0 to 1 and its first
``r`` derivatives vanish at both ends, so ``theta`` is C^r.

For a ball of radius t and width eps::

    upper(x) = theta((|x - c| - t) / eps)          # 1 on the ball, 0 beyond t + eps
    lower(x) = theta((|x - c| - (t - eps)) / eps)  # 1 inside t - eps, 0 from t on

so ``lower <= 1_B <= upper`` and the two differ only on the shell
``t - eps < |x - c| < t + eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .rng import RngStream
from .systems import (
    Ball,
    System,
    sample_points,
    system_kernel,
    target_kernel,
    torus_distance,
    unit_ball_volume,
)
from . import _kernels as K


@lru_cache(maxsize=None)
def smoothstep_poly(r: int) -> np.polynomial.Polynomial:
    if r < 0:
        raise ValueError("order must be nonnegative")
    coef = np.zeros(2 * r + 2)
    for n in range(r + 1):
        coef[r + 1 + n] = math.comb(r + n, n) * math.comb(2 * r + 1, r - n) * (-1) ** n
    return np.polynomial.Polynomial(coef)


def transition(u, r: int, deriv: int = 0) -> np.ndarray:
    """k-th derivative of theta = 1 - S at u."""
    u = np.asarray(u, dtype=float)
    inside = (u > 0.0) & (u < 1.0)
    if deriv == 0:
        out = np.where(u <= 0.0, 1.0, 0.0)
        # clip float rounding of the polynomial near the ends
        return np.where(inside, np.clip(1.0 - smoothstep_poly(r)(np.clip(u, 0, 1)), 0.0, 1.0), out)
    return np.where(inside, -smoothstep_poly(r).deriv(deriv)(np.clip(u, 0, 1)), 0.0)


@dataclass(frozen=True)
class Field:
    """Scalar field on the torus; ``scale`` is the finest feature width."""

    fn: Callable[[np.ndarray], np.ndarray]
    dim: int
    scale: float = 1.0
    anchor: tuple | None = None

    def __call__(self, pts) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(np.asarray(pts, dtype=float))), dtype=float)


@dataclass(frozen=True)
class BumpPair:
    target: Ball
    epsilon: float
    r: int
    lower: Field
    upper: Field

    def shell_mask(self, pts) -> np.ndarray:
        """Points where upper and lower may differ."""
        d = torus_distance(np.atleast_2d(pts), self.target.center)
        t, e = self.target.radius, self.epsilon
        return (d > t - e) & (d < t + e)


def epsilon_limit(target: Ball) -> float:
    return target.measure() ** (1.0 / target.dim) / 10.0


def _radial(center: np.ndarray, shift: float, eps: float, r: int):
    def fn(pts):
        return transition((torus_distance(pts, center) - shift) / eps, r)

    return fn


def build_bump(target: Ball, epsilon: float, r: int) -> BumpPair:
    if not isinstance(target, Ball):
        raise TypeError("bump sandwiches are built for balls")
    if r < 1:
        raise ValueError("smoothness order r must be >= 1")
    lim = epsilon_limit(target)
    if not 0.0 < epsilon < lim:
        raise ValueError(f"epsilon must lie in (0, {lim:.6g}), got {epsilon}")
    c = np.asarray(target.center)
    t = target.radius
    upper = Field(_radial(c, t, epsilon, r), target.dim, epsilon, target.center)
    lower = Field(_radial(c, t - epsilon, epsilon, r), target.dim, epsilon, target.center)
    return BumpPair(target, float(epsilon), int(r), lower, upper)


def shell_measure_exact(bump: BumpPair) -> float:
    """Lebesgue measure of {upper != 1_B}: the annulus t < |x - c| < t + eps."""
    d, t, e = bump.target.dim, bump.target.radius, bump.epsilon
    return unit_ball_volume(d) * ((t + e) ** d - t**d)


def shell_measure_bound(bump: BumpPair) -> float:
    """First-order shell bound ``C_1 d t^(d-1) eps`` with C_1 the unit-ball volume.

    This is the sphere area times eps; the exact annulus exceeds it only by
    higher-order terms in eps / t.
    """
    d, t, e = bump.target.dim, bump.target.radius, bump.epsilon
    return unit_ball_volume(d) * d * t ** (d - 1) * e


def _central_difference(field: Field, base: np.ndarray, axis: int, order: int, h: float) -> np.ndarray:
    # sum_i (-1)^i C(k, i) f(x + (k/2 - i) h) / h^k, accurate to O(h^2)
    acc = np.zeros(base.shape[0])
    for i in range(order + 1):
        pts = base.copy()
        pts[:, axis] += (order / 2.0 - i) * h
        acc += (-1) ** i * math.comb(order, i) * field(pts - np.floor(pts))
    return acc / h**order


def derivative_sups(field: Field, r: int, h: float, anchors=None) -> np.ndarray:
    """sup |d^k f / dx_i^k| for k = 0..r, max over coordinate lines through the anchors.

    Each line is a full circle of the torus sampled at spacing h.
    """
    if anchors is None:
        anchors = [field.anchor if field.anchor is not None else np.zeros(field.dim)]
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    n = int(math.ceil(1.0 / h))
    s = np.arange(n) * h
    out = np.zeros(r + 1)
    for a in anchors:
        for axis in range(field.dim):
            base = np.repeat(a[None, :], n, axis=0)
            base[:, axis] = a[axis] + s
            out[0] = max(out[0], np.max(np.abs(field(base - np.floor(base)))))
            for k in range(1, r + 1):
                out[k] = max(out[k], np.max(np.abs(_central_difference(field, base, axis, k, h))))
    return out


def cr_norm_estimate(field: Field, r: int, h: float, anchors=None) -> float:
    """max_{k <= r} sup |k-th coordinate derivative| from central differences.

    A lower estimate of the true C^r norm (only coordinate directions, only
    the probed lines), up to O(h^2) error per derivative.
    """
    if h >= field.scale / 10.0:
        raise ValueError(f"probe spacing {h} does not resolve feature width {field.scale}")
    return float(np.max(derivative_sups(field, r, h, anchors)))


# ---------------------------------------------------------------------------
# decorrelation


@dataclass(frozen=True)
class DecorrelationReport:
    targets: tuple
    times: tuple
    gap: float
    joint: float
    product: float
    lhs: float
    mc_error: float
    n: int


def measure_decorrelation(system: System, targets, times, n_samples: int, rng: RngStream,
                          chunk: int = 1_000_000) -> DecorrelationReport:
    """Monte Carlo |mu(cap_i T^{-n_i} A_i) - prod_i mu(A_i)| with its 3-sigma radius."""
    targets = tuple(targets)
    times = tuple(int(t) for t in times)
    if len(targets) != len(times) or not targets:
        raise ValueError("need one time per target")
    if any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0:
        raise ValueError("times must be nonnegative and strictly increasing")
    for t in targets:
        if t.dim != system.dim:
            raise ValueError("target dimension does not match the system")
    step, fp = system_kernel(system)
    kernels = [target_kernel(t) for t in targets]
    hits = 0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        s = sample_points(system.dim, rng, m, done)
        ok = np.ones(m, dtype=bool)
        prev = 0
        for (label, _, tf), n in zip(kernels, times):
            s = K.advance(step, fp, s, n - prev)
            prev = n
            ok &= K.labels_batch(label, tf, s) > 0
        hits += int(ok.sum())
        done += m
    joint = hits / n_samples
    product = math.prod(t.measure() for t in targets)
    sigma = math.sqrt(max(joint * (1.0 - joint), 1.0 / n_samples) / n_samples)
    gap = min((b - a for a, b in zip(times, times[1:])), default=math.inf)
    return DecorrelationReport(targets, times, gap, joint, product, abs(joint - product), 3.0 * sigma, n_samples)
