import math

import numpy as np
import pytest

import switchflock as sf
from switchflock.errors import (
    BadCapViolated,
    EmptySchedule,
    FactorUndefined,
    InfiniteBadTotal,
    RateNotContractive,
)


def test_alpha_examples():
    sch = sf.explicit_schedule([0.0, 1.0, 1.2, 2.2], horizon=3.0)
    assert sch.alpha_at(0.5) == 1
    assert sch.alpha_at(1.1) == -1
    assert sch.alpha_at(1.0) == -1  # closed on the left of the bad interval
    assert sch.alpha_at(0.0) == 1


def test_switch_times_in_explicit():
    sch = sf.explicit_schedule([0.0, 1.0, 1.2, 2.2], horizon=3.0)
    assert sch.switch_times_in(0.5, 2.0) == [1.0, 1.2]
    assert sch.switch_times_in(1.0, 1.0) == []


def test_switch_times_in_geometric_matches_accumulation():
    sch = sf.geometric_bad(1.0, 0.1, 0.5, horizon=10.0)
    # independent oracle: accumulate lengths good, bad0*q^k, good, ...
    times, t, k = [], 0.0, 0
    while t <= 2.3:
        t += 1.0
        times.append(t)
        t += 0.1 * 0.5 ** k
        times.append(t)
        k += 1
    expected = [x for x in times if 0.0 < x < 2.3]
    got = sch.switch_times_in(0.0, 2.3)
    assert got == pytest.approx(expected, abs=0.0)
    assert got[:3] == [1.0, 1.1, 2.1]


def test_alpha_piecewise_constant():
    sch = sf.geometric_bad(0.7, 0.2, 0.5, horizon=5.0)
    grid = np.linspace(0.0, 5.0, 5001)
    alphas = np.array([sch.alpha_at(float(t)) for t in grid])
    flips = grid[1:][np.diff(alphas) != 0]
    switches = np.asarray(sch.switch_times_in(0.0, 5.0 + 1e-9))
    # every sign flip happens within one grid cell of a switch time
    for t in flips:
        assert np.min(np.abs(switches - t)) <= (grid[1] - grid[0]) + 1e-12


def test_empty_and_misrooted_schedules():
    with pytest.raises(EmptySchedule):
        sf.explicit_schedule([], 1.0)
    with pytest.raises(EmptySchedule):
        sf.explicit_schedule([0.5, 1.0], 2.0)
    with pytest.raises(EmptySchedule):
        sf.explicit_schedule([0.0, 1.0, 0.9], 2.0)


def test_validate_bad_cap_violation_names_interval_and_cap():
    sch = sf.constant_lengths(1.0, 0.8, horizon=5.0)
    with pytest.raises(BadCapViolated) as exc:
        sf.validate(sch, K=1.0)
    msg = str(exc.value)
    assert "ln2/K" in msg and "0.6931" in msg and "bad interval 1" in msg

    report = sf.validate(sch, K=1.0, raise_on_violation=False)
    assert not report.bad_cap_ok
    assert report.first_violation is not None


def test_validate_geometric():
    sch = sf.geometric_bad(1.0, 0.1, 0.5, horizon=10.0)
    rep = sf.validate(sch, K=1.0, psi0=0.2)
    assert rep.bad_cap_ok
    assert rep.bad_total == pytest.approx(0.2, abs=1e-12)
    assert math.isfinite(rep.S1)
    assert rep.S2_diverges is True

    # independent partial-sum oracle for the log-growth series
    direct, k = 0.0, 0
    while True:
        b = 0.1 * 0.5 ** k
        term = 1.0 * b - math.log(2.0 - math.exp(1.0 * b))
        if term < 1e-18:
            break
        direct += term
        k += 1
    assert rep.S1 >= direct - 1e-14  # reported value includes a tail bound
    assert rep.S1 == pytest.approx(direct, abs=1e-10)
    assert rep.S1 >= 1.0 * rep.bad_total  # each term dominates K*b


def test_validate_degenerate_zero_bad():
    sch = sf.constant_lengths(1.0, 0.0, horizon=5.0)
    rep = sf.validate(sch, K=1.0, psi0=0.5)
    assert rep.S1 == 0.0 and rep.bad_total == 0.0
    for t in (0.0, 0.5, 1.0, 3.7):
        assert sch.alpha_at(t) == 1


def test_validate_constant_bad_is_infinite_series():
    sch = sf.constant_lengths(1.0, 0.1, horizon=5.0)
    rep = sf.validate(sch, K=1.0, psi0=0.5)
    assert rep.bad_cap_ok
    assert rep.S1 == math.inf and rep.bad_total == math.inf
    with pytest.raises(InfiniteBadTotal):
        sf.uniform_bound(rep, 1.0, 1.0)


def test_validate_cs_good_floor():
    short = sf.constant_lengths(0.9, 0.1, horizon=5.0)
    rep = sf.validate(short, K=1.0, model="CS")
    assert rep.good_floor_ok is False
    long = sf.constant_lengths(2.0, 0.1, horizon=5.0)
    rep2 = sf.validate(long, K=1.0, model="CS")
    assert rep2.good_floor_ok is True
    assert rep2.S2_diverges is None


def test_uniform_bound_values():
    sch0 = sf.constant_lengths(1.0, 0.0, horizon=3.0)
    rep0 = sf.validate(sch0, K=1.0)
    assert sf.uniform_bound(rep0, 1.0, 5.0) == 5.0
    assert sf.uniform_bound(rep0, 1.0, 1.0, variant="diameter") == 1.0

    sch = sf.geometric_bad(1.0, 0.1, 0.5, horizon=10.0)
    rep = sf.validate(sch, K=1.0)
    got = sf.uniform_bound(rep, 1.0, 3.0)
    assert got == pytest.approx(3.0 * math.exp(0.2), rel=1e-12)
    assert got == pytest.approx(3.6642, abs=1e-4)


def test_uniform_bound_monotone():
    sch_small = sf.geometric_bad(1.0, 0.05, 0.5, horizon=10.0)
    sch_large = sf.geometric_bad(1.0, 0.2, 0.5, horizon=10.0)
    rep_small = sf.validate(sch_small, K=1.0)
    rep_large = sf.validate(sch_large, K=1.0)
    assert rep_small.bad_total < rep_large.bad_total
    assert sf.uniform_bound(rep_small, 1.0, 2.0) < sf.uniform_bound(rep_large, 1.0, 2.0)
    assert sf.uniform_bound(rep_small, 1.0, 2.0) < sf.uniform_bound(rep_small, 1.0, 3.0)


def test_default_split_length():
    assert sf.schedule.default_split_length(2.0) == pytest.approx(
        (1.0 + math.log(2.0)) / 2.0)


def test_growth_factor_values():
    assert sf.growth_factor(1.0, math.log(4.0 / 3.0)) == pytest.approx(2.0, rel=1e-12)
    assert sf.growth_factor(1.0, 0.0) == 1.0
    got = sf.growth_factor(1.0, 0.6)
    assert got == pytest.approx(math.exp(0.6) / (2.0 - math.exp(0.6)), rel=1e-14)
    assert got == pytest.approx(10.2435, abs=1e-3)
    with pytest.raises(FactorUndefined):
        sf.growth_factor(1.0, 0.7)


def test_contraction_factor_values():
    got = sf.contraction_factor(1.0, 1.0, 0.5)
    assert got == pytest.approx(1.0 - 0.5 * (1.0 - math.exp(-1.0)), rel=1e-14)
    assert got == pytest.approx(0.683940, abs=1e-6)
    # floor == K collapses the max to {1 - e^{-KL}, e^{-KL}}
    for L in (0.3, 1.0, 2.5):
        expect = max(1.0 - math.exp(-2.0 * L), math.exp(-2.0 * L))
        assert sf.contraction_factor(2.0, L, 2.0) == pytest.approx(expect, rel=1e-14)


def test_exp_rate_cert():
    K = math.log(2.0)
    sch = sf.constant_lengths(1.0, 0.0, horizon=10.0)
    cert = sf.exp_rate(sch, K, psi0=K)
    assert cert.c == pytest.approx(0.5, rel=1e-12)
    assert cert.T == 1.0
    assert cert.gamma == pytest.approx(math.log(2.0) / 2.0, rel=1e-12)
    assert cert.case == "I"


def test_exp_rate_not_contractive():
    sch = sf.constant_lengths(1.0, 0.6, horizon=10.0)
    with pytest.raises(RateNotContractive):
        sf.exp_rate(sch, 1.0, psi0=0.01)


def test_exp_rate_worst_cycle_is_first_for_geometric():
    sch = sf.geometric_bad(1.0, 0.1, 0.5, horizon=20.0)
    cert = sf.exp_rate(sch, 1.0, psi0=0.9)
    expect = sf.growth_factor(1.0, 0.1) * sf.contraction_factor(1.0, 1.0, 0.9)
    assert cert.c == pytest.approx(expect, rel=1e-12)


def test_split_good_preserves_sign_function():
    sch = sf.constant_lengths(3.0, 0.2, horizon=12.0)
    split = sch.split_good(1.0)
    assert split.was_split
    for t in np.linspace(0.0, 12.0, 2001):
        assert split.alpha_at(float(t)) == sch.alpha_at(float(t))
    for seg in split.segments(12.0):
        if seg.sign == 1:
            assert seg.t_end - seg.t_start <= 1.0 + 1e-12
    cert = sf.exp_rate(split, 1.0, psi0=0.8)
    assert cert.case == "II"


def test_geometric_underflow_keeps_strict_increase():
    sch = sf.geometric_bad(1.0, 1e-13, 0.5, horizon=60.0)
    assert np.all(np.diff(sch.boundaries) > 0)


def test_explicit_tail_parity():
    sch = sf.explicit_schedule([0.0, 1.0, 1.2], horizon=5.0)
    assert sch.alpha_at(4.9) == 1  # even index interval beyond the list
    rep = sf.validate(sch, K=1.0, psi0=0.5)
    assert rep.bad_total == pytest.approx(0.2)
    assert rep.S2_diverges is False  # finite prefix cannot certify divergence


def test_geometric_bad_total_matches_full_accumulation():
    b0, q = 0.1, 0.5
    total, k = 0.0, 0
    while True:
        term = b0 * q ** k
        if term < 1e-300:
            break
        total += term
        k += 1
    sch = sf.geometric_bad(1.0, b0, q, horizon=10.0)
    rep = sf.validate(sch, K=1.0)
    assert rep.bad_total == pytest.approx(total, abs=1e-12)
