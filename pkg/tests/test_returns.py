import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from instances import fiberwise_instances, rectangle_instances, renewal_instances
from oracles import delayed_returns, exact_rotation, frac_mod1, golden_first_return, in_ball, in_box, interpreter_orbit, returns
from pltlab.returns import (
    DelaySchedule,
    KappaSchedule,
    count_process,
    default_cap,
    delayed_batch,
    delayed_return_sequence,
    first_return,
    fiberwise_return_sequence,
    kappa_delayed_sequence,
    kappa_schedule_from_visits,
    read_sequences_csv,
    rectangle_return_compose,
    return_batch,
    return_sequence,
    whole_space,
    write_sequences_csv,
)
from pltlab.rng import RngStream
from pltlab.stats import kac_check
from pltlab.systems import (
    CAT_MATRIX,
    GOLDEN,
    Ball,
    Box,
    Doubling,
    FullSpace,
    IntegerStep,
    LabeledUnion,
    Product,
    Rotation,
    SkewProduct,
    ToralAuto,
    TranslationFlow,
    sample_points,
)

QUARTER = Rotation((0.25,))
NEAR_ZERO = Ball((0.0,), 0.01)


# ---------------------------------------------------------------------------
# plain returns


def test_first_return_rational_rotation():
    assert first_return(QUARTER, NEAR_ZERO, [0.0], 100) == (4, False)


def test_first_return_golden_rotation():
    assert golden_first_return(0.01) == 55
    assert first_return(Rotation((GOLDEN,)), NEAR_ZERO, [0.0], 1000) == (55, False)


def test_fixed_point_returns_immediately():
    assert first_return(ToralAuto(CAT_MATRIX), Ball((0.0, 0.0), 0.05), [0.0, 0.0], 10) == (1, False)


def test_return_sequence_rational_rotation():
    seq = return_sequence(QUARTER, NEAR_ZERO, [0.0], 3, 100)
    assert seq.gaps.tolist() == [4, 4, 4]
    assert seq.times.tolist() == [4, 8, 12]
    assert not seq.any_censored


def test_doubling_orbit_of_one_seventh():
    # 1/7 -> 2/7 -> 4/7 -> 1/7 -> ... against [0, 1/2]
    seq = return_sequence(Doubling(), Box((0.25,), (0.25,)), [1 / 7], 4, 100)
    assert seq.gaps.tolist() == [1, 2, 1, 2]


def test_censored_entries_carry_cap():
    seq = return_sequence(Rotation((GOLDEN,)), Ball((0.5,), 1e-6), [0.0], 3, 50)
    assert seq.censored.all()
    assert seq.gaps.tolist() == [50, 50, 50]
    assert seq.uncensored().size == 0


def test_censoring_propagates_to_later_entries():
    # 0 -> 1/2 takes 2 steps, the next visit takes 4 > cap
    seq = return_sequence(QUARTER, Ball((0.5,), 0.01), [0.0], 3, 3)
    assert seq.gaps.tolist() == [2, 3, 3]
    assert seq.censored.tolist() == [False, True, True]


def test_default_cap_is_one_hundred_lifetimes():
    assert default_cap(Box((0.5,), (0.05,))) == 1000


def test_invalid_arguments():
    with pytest.raises(ValueError):
        return_sequence(QUARTER, NEAR_ZERO, [0.0], 0, 10)
    with pytest.raises(ValueError):
        first_return(QUARTER, NEAR_ZERO, [0.0], 0)
    with pytest.raises(ValueError):
        first_return(QUARTER, Ball((0.0, 0.0), 0.1), [0.0], 10)


@pytest.mark.parametrize("seed", range(5))
def test_plain_returns_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    system = ToralAuto(CAT_MATRIX)
    c, r = tuple(rng.random(2)), float(rng.uniform(0.05, 0.15))
    p = rng.random(2)
    seq = return_sequence(system, Ball(c, r), p, 10, 500)
    gaps, cens = returns(interpreter_orbit(system, p), lambda q: in_ball(q, c, r), 10, 500)
    assert seq.gaps.tolist() == gaps and seq.censored.tolist() == cens


def test_exact_orbit_agrees_on_rational_rotation():
    gaps, _ = returns(exact_rotation([Fraction(3, 10)], [0]), lambda q: q[0] == 0, 3, 100)
    assert return_sequence(Rotation((0.3,)), Ball((0.0,), 1e-9), [0.0], 3, 100).gaps.tolist() == gaps == [10, 10, 10]


@given(st.floats(0.0, 1.0, exclude_max=True), st.floats(0.0, 1.0, exclude_max=True),
       st.floats(0.01, 0.12), st.floats(0.0, 0.12))
def test_first_return_is_monotone_in_target(px, c, r, extra):
    system = Rotation((GOLDEN,))
    small, _ = first_return(system, Ball((c,), r), [px], 10**4)
    large, _ = first_return(system, Ball((c,), r + extra), [px], 10**4)
    assert large <= small


@given(st.integers(0, 2**32 - 1))
def test_sequence_invariants(seed):
    rng = np.random.default_rng(seed)
    seq = return_sequence(ToralAuto(CAT_MATRIX), Ball(tuple(rng.random(2)), 0.05), rng.random(2), 8, 200)
    assert (seq.gaps >= 1).all()
    assert (seq.gaps[seq.censored] == 200).all()
    if not seq.any_censored:
        assert (np.diff(seq.times) > 0).all()


def test_kac_mean_for_golden_rotation():
    res = kac_check(Rotation((GOLDEN,)), Box((0.125,), (0.125,)), 10**5, RngStream(3))
    assert abs(res.mean / 0.25 - 4) <= 0.08
    assert res.passed and res.censor_rate == 0


# ---------------------------------------------------------------------------
# fiberwise returns


def test_fiberwise_skew_translation_example():
    system = SkewProduct(TranslationFlow((0.1,)), IntegerStep((0.5,), (1, -1)), QUARTER)
    seq = fiberwise_return_sequence(system, Ball((0.2,), 0.001), [0.0], [0.0], 1, 100)
    x, y = Fraction(0), Fraction(0)
    for j in range(1, 101):
        x = frac_mod1(x + Fraction(1, 10) * (1 if y < Fraction(1, 2) else -1))
        y = frac_mod1(y + Fraction(1, 4))
        if abs(x - Fraction(1, 5)) <= Fraction(1, 1000):
            break
    assert seq.gaps.tolist() == [j] == [2]


def test_fiberwise_requires_fibered_system():
    with pytest.raises(ValueError):
        fiberwise_return_sequence(Doubling(), Ball((0.2,), 0.1), [0.0], [0.0], 1, 10)


def test_fiberwise_identity_random_instances():
    n, failures = fiberwise_instances(100)
    assert n == 100 and not failures


# ---------------------------------------------------------------------------
# delayed and label-scheduled returns


def test_unit_delays_equal_plain_returns():
    system = ToralAuto(CAT_MATRIX)
    target = Ball((0.3, 0.6), 0.1)
    pts = sample_points(2, RngStream(4), 50)
    plain = return_batch(system, target, pts, 5, 300)
    delayed = delayed_batch(system, target, DelaySchedule.constant(1, 1500), pts, 5, 300)
    assert np.array_equal(plain.gaps, delayed.gaps)
    assert np.array_equal(plain.censored, delayed.censored)


def test_even_delays_on_quarter_rotation():
    seq = delayed_return_sequence(QUARTER, NEAR_ZERO, DelaySchedule.constant(2, 20), [0.0], 4, 10)
    assert seq.gaps.tolist() == [2, 2, 2, 2]


def test_schedule_exhaustion_is_censored():
    seq = delayed_return_sequence(QUARTER, NEAR_ZERO, DelaySchedule.constant(2, 5), [0.0], 4, 10)
    assert seq.censored.tolist() == [False, False, True, True]


@pytest.mark.parametrize("seed", range(5))
def test_triangular_delays_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    c, r = float(rng.random()), float(rng.uniform(0.1, 0.24))
    p = rng.random(1)
    sched = DelaySchedule(np.arange(1, 61))
    seq = delayed_return_sequence(Doubling(), Ball((c,), r), sched, p, 6, 60)
    gaps, cens = delayed_returns(interpreter_orbit(Doubling(), p), {1: lambda q: in_ball(q, (c,), r)},
                                 sched.alphatilde, [1] * 60, 6, 60)
    assert seq.gaps.tolist() == gaps and seq.censored.tolist() == cens


def test_delay_schedule_partial_sums():
    s = DelaySchedule([3, 1, 4, 1, 5])
    assert s.alphatilde.tolist() == [3, 4, 8, 9, 14]
    with pytest.raises(ValueError):
        DelaySchedule([1, 0, 2])


def test_single_label_equals_delayed():
    system = ToralAuto(CAT_MATRIX)
    target = Ball((0.3, 0.6), 0.1)
    sched = DelaySchedule(np.random.default_rng(0).integers(1, 5, 400))
    p = [0.123, 0.456]
    a = delayed_return_sequence(system, target, sched, p, 5, 400)
    b = kappa_delayed_sequence(system, LabeledUnion(((target,),)), sched, KappaSchedule.ones(400), p, 5, 400)
    assert a.gaps.tolist() == b.gaps.tolist()


def test_degenerate_labels_hit_exactly_at_label_one():
    labels = [2, 1, 2, 2, 1, 1, 2, 1, 2, 2]
    union = LabeledUnion((FullSpace(1), Ball((0.1,), 0.01)), check_disjoint=False)
    seq = kappa_delayed_sequence(QUARTER, union, DelaySchedule.constant(1, 10), KappaSchedule(labels, 2), [0.0], 4, 10)
    ones = [i + 1 for i, v in enumerate(labels) if v == 1]
    assert seq.gaps.tolist() == np.diff([0] + ones).tolist()


@pytest.mark.parametrize("seed", range(5))
def test_label_schedule_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    system = ToralAuto(CAT_MATRIX)
    boxes = {1: (tuple(rng.random(2)), (0.15, 0.15)), 2: (tuple(rng.random(2)), (0.2, 0.1))}
    union = LabeledUnion(tuple(Box(*b) for b in boxes.values()), check_disjoint=False)
    labels = rng.integers(1, 3, 300)
    sched = DelaySchedule(rng.integers(1, 4, 300))
    p = rng.random(2)
    seq = kappa_delayed_sequence(system, union, sched, KappaSchedule(labels, 2), p, 8, 300)
    members = {k: (lambda q, b=b: in_box(q, *b)) for k, b in boxes.items()}
    gaps, cens = delayed_returns(interpreter_orbit(system, p), members, sched.alphatilde, labels.tolist(), 8, 300)
    assert seq.gaps.tolist() == gaps and seq.censored.tolist() == cens


def test_labels_out_of_range_rejected():
    with pytest.raises(ValueError):
        KappaSchedule([1, 3], 2)
    with pytest.raises(ValueError):
        kappa_delayed_sequence(QUARTER, LabeledUnion(((NEAR_ZERO,),)), DelaySchedule.constant(1, 4),
                               KappaSchedule([1, 2, 1, 2], 2), [0.0], 1, 4)


def test_visits_single_component():
    kappa, sched = kappa_schedule_from_visits(QUARTER, NEAR_ZERO, [0.0], 5)
    assert kappa.labels.tolist() == [1] * 5
    assert sched.alpha.tolist() == [4] * 5


def test_visits_alternate_between_components():
    union = LabeledUnion((NEAR_ZERO, Ball((0.5,), 0.01)))
    kappa, sched = kappa_schedule_from_visits(QUARTER, union, [0.0], 6)
    assert kappa.labels.tolist() == [2, 1, 2, 1, 2, 1]
    assert sched.alpha.tolist() == [2] * 6


def test_visit_frequencies_follow_lengths():
    union = LabeledUnion((Box((0.1,), (0.01,)), Box((0.6,), (0.02,))))
    n = 10**4
    kappa, _ = kappa_schedule_from_visits(Rotation((GOLDEN,)), union, [0.0], n)
    band = math.sqrt(math.log(2 / 0.001) / (2 * n))
    assert abs(kappa.frequencies[0] - 1 / 3) <= band
    assert abs(kappa.frequencies.sum() - 1) < 1e-12


def test_visit_schedule_marks_censoring():
    _, sched = kappa_schedule_from_visits(Rotation((GOLDEN,)), Ball((0.5,), 1e-7), [0.0], 3, cap=10)
    assert sched.censored and len(sched) == 0


# ---------------------------------------------------------------------------
# counting process and renewal duality


def test_count_at_horizon_zero():
    assert count_process(QUARTER, NEAR_ZERO, DelaySchedule.constant(1, 20), None, [0.0], 0) == 0


def test_count_rational_rotation():
    assert count_process(QUARTER, NEAR_ZERO, DelaySchedule.constant(1, 20), None, [0.0], 12) == 3


def test_count_horizon_beyond_schedule_rejected():
    with pytest.raises(ValueError):
        count_process(QUARTER, NEAR_ZERO, DelaySchedule.constant(1, 5), None, [0.0], 6)


def test_renewal_duality_random_instances():
    n, failures = renewal_instances(100)
    assert n == 100 and not failures


# ---------------------------------------------------------------------------
# rectangle composition


def test_rectangle_compose_random_instances():
    n, failures = rectangle_instances(100)
    assert n == 100 and not failures


@pytest.mark.parametrize("seed", range(5))
def test_rectangle_compose_doubling_times_golden(seed):
    rng = np.random.default_rng(seed)
    system = Product(Doubling(), Rotation((GOLDEN,)))
    a, b = Ball((float(rng.random()),), 0.1), Ball((float(rng.random()),), 0.05)
    x, y = rng.random(1), rng.random(1)
    kappa, sched = kappa_schedule_from_visits(system.base, b, y, 2000)
    fiber = kappa_delayed_sequence(system, a, sched, kappa, x, 5, len(sched), y=y)
    composed = rectangle_return_compose(fiber, sched)
    direct = return_sequence(system, LabeledUnion(((a, b),)), np.concatenate([x, y]), 5, int(sched.alphatilde[-1]))
    ok = ~composed.censored
    assert ok.any()
    assert composed.gaps[ok].tolist() == direct.gaps[ok].tolist()


def test_whole_space_base_gives_fiberwise_returns():
    system = Product(ToralAuto(CAT_MATRIX), Rotation((GOLDEN,)))
    a = Ball((0.3, 0.6), 0.1)
    x, y = [0.11, 0.77], [0.4]
    kappa, sched = kappa_schedule_from_visits(system.base, whole_space(1), y, 500)
    assert sched.alpha.tolist() == [1] * 500
    fiber = kappa_delayed_sequence(system, a, sched, kappa, x, 5, 500, y=y)
    composed = rectangle_return_compose(fiber, sched)
    assert composed.gaps.tolist() == fiberwise_return_sequence(system, a, x, y, 5, 500).gaps.tolist()


def test_compose_rejects_foreign_schedule():
    sched = DelaySchedule.constant(1, 10)
    seq = delayed_return_sequence(QUARTER, NEAR_ZERO, sched, [0.0], 1, 10)
    with pytest.raises(ValueError):
        rectangle_return_compose(seq, DelaySchedule.constant(2, 10))


# ---------------------------------------------------------------------------
# serialization


def test_csv_round_trip():
    seqs = [return_sequence(QUARTER, NEAR_ZERO, [0.0], 3, 100),
            return_sequence(Rotation((GOLDEN,)), Ball((0.5,), 1e-6), [0.0], 2, 50)]
    buf = io.StringIO()
    write_sequences_csv(seqs, buf)
    buf.seek(0)
    assert buf.getvalue().splitlines()[0] == "flavor,gap,censored"
    buf.seek(0)
    assert read_sequences_csv(buf) == [("plain", 4, False)] * 3 + [("plain", 50, True)] * 2
