"""Randomized instances of the exact return-time identities.

Each generator returns (instances checked, list of failures); a failure is a
short description of the offending instance.
"""

import math

import numpy as np

from pltlab.returns import (
    DelaySchedule,
    KappaSchedule,
    count_batch,
    delayed_batch,
    fiberwise_return_batch,
    kappa_schedule_from_visits,
    rectangle_return_compose,
    return_batch,
)
from pltlab.systems import (
    CAT_MATRIX,
    GOLDEN,
    AutomorphismPowers,
    Ball,
    Box,
    Doubling,
    IntegerStep,
    LabeledUnion,
    Product,
    Rotation,
    SkewProduct,
    SkewShift,
    ToralAuto,
    TranslationFlow,
)

STEP = IntegerStep((0.5,), (1, -1))


def _fibered(rng):
    which = rng.integers(4)
    beta = float(rng.uniform(0.05, 0.45))
    if which == 0:
        return Product(ToralAuto(CAT_MATRIX), Rotation((GOLDEN,)))
    if which == 1:
        return Product(Doubling(), Rotation((float(rng.random()),)))
    if which == 2:
        return SkewProduct(TranslationFlow((beta,)), STEP, Rotation((GOLDEN,)))
    return SkewProduct(AutomorphismPowers(CAT_MATRIX), STEP, Rotation((GOLDEN,)))


def _fiber_ball(rng, dim, lo=0.05, hi=0.2):
    return Ball(tuple(rng.random(dim)), float(rng.uniform(lo, hi)))


def renewal_instances(n: int, seed: int = 0):
    """S(n) >= N iff the first N delayed gaps sum to at most n, across flavors."""
    rng = np.random.default_rng(seed)
    systems = [ToralAuto(CAT_MATRIX), Rotation((GOLDEN,)), Doubling(), SkewShift(GOLDEN)]
    failures = []
    for i in range(n):
        system = systems[i % len(systems)]
        L = int(rng.integers(20, 200))
        sched = DelaySchedule(rng.integers(1, 6, size=L))
        if rng.random() < 0.5:
            targets = _fiber_ball(rng, system.dim, 0.1, 0.24)
            kappa = None
        else:
            c = float(rng.uniform(0.2, 0.3))
            targets = LabeledUnion(((Box((c,) * system.dim, (0.15,) * system.dim),),
                                    (Box((c + 0.5,) * system.dim, (0.1,) * system.dim),)))
            kappa = KappaSchedule(rng.integers(1, 3, size=L), 2)
        p = rng.random((1, system.dim))
        horizons = np.sort(rng.integers(0, L + 1, size=5))
        b = delayed_batch(system, targets, sched, p, count=L, cap=L, kappa=kappa)
        S = count_batch(system, targets, sched, p, horizons, kappa=kappa)[0]
        gaps, cens = b.gaps[0], b.censored[0]
        times = np.cumsum(gaps)
        for h, s in zip(horizons, S):
            for N in range(1, L + 1):
                lhs = s >= N
                rhs = (not cens[N - 1]) and times[N - 1] <= h
                if lhs != rhs:
                    failures.append(f"instance {i}: horizon {h}, N={N}, S={s}")
                    break
    return n, failures


def fiberwise_instances(n: int, seed: int = 1):
    """Fiberwise returns of x along y equal product-system returns to A x Y."""
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(n):
        system = _fibered(rng)
        dx = system.fiber_dim
        a = _fiber_ball(rng, dx)
        x, y = rng.random((1, dx)), rng.random((1, system.dim - dx))
        cap = 20000
        fw = fiberwise_return_batch(system, a, x, y, count=5, cap=cap)
        whole = LabeledUnion(((a, _everything(system.dim - dx)),), check_disjoint=False)
        direct = return_batch(system, whole, np.concatenate([x, y], axis=1), 5, cap)
        if not (np.array_equal(fw.gaps, direct.gaps) and np.array_equal(fw.censored, direct.censored)):
            failures.append(f"instance {i}: {fw.gaps[0].tolist()} vs {direct.gaps[0].tolist()}")
        if isinstance(system, Product):
            alone = return_batch(system.fiber, a, x, 5, cap)
            if not np.array_equal(alone.gaps, fw.gaps):
                failures.append(f"instance {i}: factor returns differ")
    return n, failures


def _everything(dim):
    from pltlab.systems import FullSpace

    return FullSpace(dim)


def rectangle_instances(n: int, seed: int = 2):
    """Returns to a union of rectangles from probe-counted fiber returns along base visits."""
    rng = np.random.default_rng(seed)
    failures = []
    checked = 0
    for i in range(n):
        system = _fibered(rng)
        dx = system.fiber_dim
        K = int(rng.integers(1, 3))
        c = float(rng.random())
        bs = [Box((c,), (float(rng.uniform(0.03, 0.1)),)), Box(((c + 0.5) % 1.0,), (float(rng.uniform(0.03, 0.1)),))][:K]
        As = [_fiber_ball(rng, dx) for _ in range(K)]
        x, y = rng.random(dx), rng.random(system.dim - dx)
        base_union = LabeledUnion(tuple((b,) for b in bs))
        kappa, sched = kappa_schedule_from_visits(system.base, base_union, y, 3000)
        fiber_union = LabeledUnion(tuple((a,) for a in As), check_disjoint=False)
        fb = delayed_batch(system, fiber_union, sched, x[None, :], count=4, cap=len(sched), kappa=kappa, y=y[None, :])
        composed = rectangle_return_compose(fb.row(0), sched)
        rect = LabeledUnion(tuple((a, b) for a, b in zip(As, bs)))
        cap = int(sched.alphatilde[-1])
        direct = return_batch(system, rect, np.concatenate([x, y])[None, :], 4, cap)
        ok = ~composed.censored
        checked += 1
        if not np.array_equal(composed.gaps[ok], direct.gaps[0][ok]) or direct.censored[0][ok].any():
            failures.append(f"instance {i}: {composed.gaps.tolist()} vs {direct.gaps[0].tolist()}")
    return checked, failures


def mean_return(gaps, measure):
    return math.fsum(gaps) * measure / len(gaps)
