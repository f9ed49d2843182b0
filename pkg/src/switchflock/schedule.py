"""Switching schedules: who attracts when.

A schedule is a strictly increasing sequence of switch times starting at
t0 = 0.  Interval signs alternate, attraction first: the sign is +1 on
[t_{2n}, t_{2n+1}) and -1 on [t_{2n+1}, t_{2n+2}).  Endpoints follow the
right-open convention throughout (sign changes are measure-zero events, so
the flow does not care, but a total deterministic sign function does).

The admissibility theory hangs on three quantities computed here:

* the *bad cap*: every repulsion interval must be shorter than ln(2)/K;
* the log-growth series  S1 = sum_p ln(e^{K b_p} / (2 - e^{K b_p}))  over
  repulsion lengths b_p — finite S1 bounds the total repulsion damage;
* divergence of the per-cycle contraction log-series, which for the
  families below is a structural fact (infinitely many attraction
  intervals with a fixed positive length).

Three families are supported.  ``explicit`` carries a finite list of
times (a truncation: series are evaluated on the listed prefix).
``constant`` repeats (good_len, bad_len) forever.  ``geometric`` repeats
good_len with repulsion lengths bad0 * ratio^n, the canonical example with
finite S1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadCapViolated,
    EmptySchedule,
    FactorUndefined,
    InfiniteBadTotal,
    RateNotContractive,
)

GOOD = 1
BAD = -1

# Series terms below this are handed to the closed-form tail bound.
_SERIES_TERM_CUTOFF = 1e-16


@dataclass(frozen=True)
class Interval:
    """One maximal constant-sign interval [start, end) of the schedule."""

    index: int
    start: float
    end: float  # math.inf for the open-ended tail of an explicit schedule
    sign: int

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Segment:
    """An interval clipped to an integration window."""

    index: int
    sign: int
    t_start: float
    t_end: float
    complete: bool  # False when the clip cut the interval short


class SwitchingSchedule:
    """Immutable switch-time sequence plus per-interval signs.

    Boundaries are generated eagerly out to (strictly past) the declared
    horizon at construction, so lookups never mutate shared state.  For
    explicit schedules the final interval extends to +inf with the parity
    sign.
    """

    def __init__(self, boundaries, signs, horizon, family, meta=None,
                 was_split=False):
        b = np.asarray(boundaries, dtype=float)
        if b.size == 0 or b[0] != 0.0:
            raise EmptySchedule("schedule must start at t0 = 0")
        if np.any(np.diff(b) <= 0):
            raise EmptySchedule("switch times must be strictly increasing")
        if len(signs) != len(b):
            raise ValueError("one sign per interval is required")
        if signs[0] != GOOD:
            raise EmptySchedule("the first interval must be attractive")
        self.boundaries = b
        self.signs = np.asarray(signs, dtype=np.int8)
        self.horizon = float(horizon)
        self.family = family
        self.meta = dict(meta or {})
        self.was_split = was_split
        # For generated families, times past the last boundary are unknown.
        self.coverage = math.inf if family == "explicit" else float(b[-1])

    # -- basic queries ---------------------------------------------------

    def _interval_index(self, t: float) -> int:
        if t < 0:
            raise ValueError("t must be nonnegative")
        if t > self.coverage:
            raise ValueError(
                "t=%g is beyond the generated schedule (coverage %g)"
                % (t, self.coverage)
            )
        return int(np.searchsorted(self.boundaries, t, side="right")) - 1

    def alpha_at(self, t: float) -> int:
        """Sign of the interaction at time t; alpha_at(0) == +1."""
        return int(self.signs[self._interval_index(t)])

    def switch_times_in(self, a: float, b: float) -> list[float]:
        """Switch times strictly inside (a, b), ascending."""
        if not 0.0 <= a <= b:
            raise ValueError("need 0 <= a <= b")
        lo = int(np.searchsorted(self.boundaries, a, side="right"))
        hi = int(np.searchsorted(self.boundaries, b, side="left"))
        return [float(t) for t in self.boundaries[lo:hi] if a < t < b]

    def intervals(self) -> list[Interval]:
        """All generated intervals, the last one open-ended for explicit schedules."""
        out = []
        n = len(self.boundaries)
        for i in range(n):
            end = self.boundaries[i + 1] if i + 1 < n else (
                math.inf if self.family == "explicit" else self.coverage
            )
            if end <= self.boundaries[i]:
                continue
            out.append(Interval(i, float(self.boundaries[i]), float(end),
                                int(self.signs[i])))
        return out

    def segments(self, upto: float) -> list[Segment]:
        """Intervals clipped to [0, upto], for switch-aligned integration."""
        if upto < 0:
            raise ValueError("upto must be nonnegative")
        if upto > self.coverage:
            raise ValueError("upto exceeds the generated schedule")
        segs = []
        for iv in self.intervals():
            if iv.start >= upto:
                break
            end = min(iv.end, upto)
            segs.append(Segment(iv.index, iv.sign, iv.start, end,
                                complete=iv.end <= upto))
        return segs

    # -- transformations --------------------------------------------------

    def split_good(self, piece_len: float) -> "SwitchingSchedule":
        """Subdivide attraction intervals into pieces of length <= piece_len.

        Inserts boundaries with no sign change: the sign function (hence
        the flow) is untouched; only certificate bookkeeping sees the
        extra endpoints.  ``default_split_length(K)`` gives a sensible
        piece length when none is forced by the application.
        """
        if piece_len <= 0:
            raise ValueError("piece_len must be positive")
        bounds = [0.0]
        signs = []
        n = len(self.boundaries)
        for i in range(n):
            sign = int(self.signs[i])
            if i + 1 == n:
                # Trailing interval (open-ended or generation sentinel):
                # keep its sign, no further boundary.
                signs.append(sign)
                break
            start, end = float(self.boundaries[i]), float(self.boundaries[i + 1])
            if sign == GOOD and end - start > piece_len:
                m = int(math.ceil((end - start) / piece_len))
                for k in range(1, m + 1):
                    bounds.append(end if k == m else start + k * (end - start) / m)
                    signs.append(GOOD)
            else:
                bounds.append(end)
                signs.append(sign)
        return SwitchingSchedule(bounds, signs, self.horizon, self.family,
                                 self.meta, was_split=True)


def _generate_alternating(good_len, bad_lengths_iter, horizon):
    """Boundaries/signs for alternating good/bad intervals out past horizon."""
    bounds = [0.0]
    signs = []
    sign = GOOD
    k_bad = 0
    while bounds[-1] <= horizon:
        if sign == GOOD:
            length = good_len
        else:
            length = bad_lengths_iter(k_bad)
            k_bad += 1
        nxt = bounds[-1] + length
        if nxt <= bounds[-1]:
            # Geometric repulsion lengths eventually underflow the float
            # grid; nudge by one ulp to keep the sequence strictly
            # increasing (the interval is then dynamically invisible).
            nxt = np.nextafter(bounds[-1], math.inf)
        bounds.append(nxt)
        signs.append(sign)
        sign = -sign
    signs.append(sign)
    return bounds, signs


def _generate_good_only(good_len, horizon):
    # Zero-length repulsion degenerates into pure attraction; keep the
    # cycle boundaries as sign-preserving marks so per-cycle bookkeeping
    # still has anchors.
    bounds = [0.0]
    signs = [GOOD]
    while bounds[-1] <= horizon:
        bounds.append(bounds[-1] + good_len)
        signs.append(GOOD)
    return bounds, signs


def explicit_schedule(times, horizon) -> SwitchingSchedule:
    """Schedule from a finite switch-time list; parity continues past the end."""
    times = list(times)
    if not times:
        raise EmptySchedule("empty switch-time list")
    signs = [GOOD if i % 2 == 0 else BAD for i in range(len(times))]
    return SwitchingSchedule(times, signs, horizon, "explicit")


def constant_lengths(good_len, bad_len, horizon) -> SwitchingSchedule:
    """Attraction good_len, repulsion bad_len, repeated forever."""
    if good_len <= 0 or bad_len < 0:
        raise ValueError("need good_len > 0 and bad_len >= 0")
    if bad_len == 0:
        bounds, signs = _generate_good_only(good_len, horizon)
    else:
        bounds, signs = _generate_alternating(good_len, lambda k: bad_len, horizon)
    return SwitchingSchedule(bounds, signs, horizon, "constant",
                             {"good_len": good_len, "bad_len": bad_len})


def geometric_bad(good_len, bad0, ratio, horizon) -> SwitchingSchedule:
    """Attraction good_len, repulsion lengths bad0 * ratio^n."""
    if good_len <= 0 or bad0 < 0 or not 0.0 < ratio < 1.0:
        raise ValueError("need good_len > 0, bad0 >= 0, ratio in (0, 1)")
    if bad0 == 0:
        bounds, signs = _generate_good_only(good_len, horizon)
    else:
        bounds, signs = _generate_alternating(
            good_len, lambda k: bad0 * ratio ** k, horizon
        )
    return SwitchingSchedule(bounds, signs, horizon, "geometric",
                             {"good_len": good_len, "bad0": bad0, "ratio": ratio})


# ----------------------------------------------------------------------
# Validation: the hypotheses every certificate relies on.
# ----------------------------------------------------------------------


@dataclass
class ScheduleValidation:
    """Results of checking the admissibility hypotheses for one schedule.

    S1 is the log-growth series over repulsion lengths (may be +inf);
    bad_total the total repulsion time (may be +inf); S2_diverges records
    the structural divergence of the contraction log-series (None when the
    kernel floor needed to decide it was not supplied, or for second-order
    runs where the good-length floor replaces it).
    """

    bad_cap_ok: bool
    S1: float
    S2_diverges: bool | None
    bad_total: float
    good_floor_ok: bool | None
    first_violation: str | None

    def to_json(self) -> dict:
        return {
            "bad_cap_ok": self.bad_cap_ok,
            "S1": self.S1,
            "S2_diverges": self.S2_diverges,
            "bad_total": self.bad_total,
            "good_floor_ok": self.good_floor_ok,
            "first_violation": self.first_violation,
        }


def _log_growth_term(K: float, b: float) -> float:
    """ln(e^{Kb} / (2 - e^{Kb})) for an admissible repulsion length b."""
    g = math.exp(K * b)
    if g >= 2.0:
        raise FactorUndefined("exp(K*b) >= 2 for b=%g" % b)
    term = K * b - math.log(2.0 - g)
    # Each term dominates K*b (strict for b > 0); regression guard.
    assert term >= K * b - 1e-15
    return term


def _geometric_series(K: float, b0: float, ratio: float) -> tuple[float, float]:
    """(S1, bad_total) for repulsion lengths b0 * ratio^p.

    S1 has no elementary closed form; partial sums run until the term
    drops below the cutoff, then a crude majorant covers the tail:
    for x = K*b <= 1/2,  ln(e^x/(2-e^x)) <= x + 2x/(1-2x)  (from
    e^x - 1 <= 2x on [0, 1]), summing the geometric tail in closed form.
    """
    total = 0.0
    p = 0
    b = b0
    while True:
        term = _log_growth_term(K, b)
        if term < _SERIES_TERM_CUTOFF:
            x = K * b
            tail = (x / (1.0 - ratio)) * (1.0 + 2.0 / (1.0 - 2.0 * x))
            total += tail
            break
        total += term
        p += 1
        b = b0 * ratio ** p
    return total, b0 / (1.0 - ratio)


def validate(schedule: SwitchingSchedule, K: float, psi0: float | None = None,
             model: str = "HK", raise_on_violation: bool = True) -> ScheduleValidation:
    """Check the schedule hypotheses for coupling bound K.

    For first-order runs, ``psi0`` (a positive kernel floor) is needed to
    decide the contraction-series divergence; pass None to defer that
    field.  For second-order runs the good-length floor 1/K replaces it.
    Raises BadCapViolated on the first repulsion interval at or beyond
    ln(2)/K unless ``raise_on_violation`` is False.
    """
    if K <= 0:
        raise ValueError("K must be positive")
    if model not in ("HK", "CS"):
        raise ValueError("model must be 'HK' or 'CS'")

    cap = math.log(2.0) / K
    intervals = schedule.intervals()
    if not intervals:
        raise EmptySchedule("schedule generated no intervals")

    first_violation = None
    bad_cap_ok = True
    for iv in intervals:
        if iv.sign == BAD and iv.length >= cap:
            bad_cap_ok = False
            exc = BadCapViolated(iv.index, iv.start, iv.end, cap)
            first_violation = str(exc)
            if raise_on_violation:
                raise exc
            break

    # Series from family structure (the theory needs the full tails, not
    # the horizon-truncated prefix).  S1 is undefined past the cap; report
    # +inf there.
    if schedule.family == "constant":
        b = schedule.meta["bad_len"]
        bad_total = 0.0 if b == 0.0 else math.inf
        s1 = 0.0 if b == 0.0 else math.inf
    elif schedule.family == "geometric":
        b0, q = schedule.meta["bad0"], schedule.meta["ratio"]
        if b0 == 0.0:
            s1, bad_total = 0.0, 0.0
        elif bad_cap_ok:
            s1, bad_total = _geometric_series(K, b0, q)
        else:
            s1, bad_total = math.inf, b0 / (1.0 - q)
    else:
        bads = [iv for iv in intervals if iv.sign == BAD]
        bad_total = sum(iv.length for iv in bads)
        if bad_cap_ok:
            s1 = sum(_log_growth_term(K, iv.length) for iv in bads)
        else:
            s1 = math.inf

    if math.isfinite(s1) and not math.isfinite(bad_total):
        raise AssertionError("finite S1 must imply finite total repulsion time")

    good_floor_ok = None
    s2 = None
    if model == "CS":
        floor = 1.0 / K
        ok = True
        for iv in intervals:
            if iv.sign == GOOD and math.isfinite(iv.end) and iv.length <= floor:
                ok = False
                if first_violation is None:
                    first_violation = (
                        "good interval %d has length %.6g <= 1/K = %.6g"
                        % (iv.index, iv.length, floor)
                    )
                break
        if schedule.family in ("constant", "geometric"):
            ok = ok and schedule.meta["good_len"] > floor
        good_floor_ok = ok
    else:
        if psi0 is not None:
            if psi0 <= 0:
                raise ValueError("psi0 must be positive")
            # Structural test: infinitely many attraction intervals whose
            # lengths are bounded below make every series term at most a
            # fixed negative constant, so the series diverges to -inf.
            if schedule.family in ("constant", "geometric"):
                s2 = True
            else:
                s2 = False  # finite prefix: divergence cannot be certified

    return ScheduleValidation(
        bad_cap_ok=bad_cap_ok,
        S1=s1,
        S2_diverges=s2,
        bad_total=bad_total,
        good_floor_ok=good_floor_ok,
        first_violation=first_violation,
    )


def uniform_bound(validation: ScheduleValidation, K: float, initial: float,
                  variant: str = "state") -> float:
    """Amplify an initial bound by the worst-case repulsive growth.

    ``state``:    exp(K * bad_total) * initial — bounds max_i |x_i(t)| given
                  the initial max norm.
    ``diameter``: exp(S1) * initial — bounds the diameter given its initial
                  value (the per-cycle growth factors compound to exp(S1)).
    """
    if variant == "state":
        exponent = K * validation.bad_total
    elif variant == "diameter":
        exponent = validation.S1
    else:
        raise ValueError("variant must be 'state' or 'diameter'")
    if not math.isfinite(exponent):
        raise InfiniteBadTotal(
            "total repulsion (%s form) diverges; no uniform bound" % variant
        )
    return math.exp(exponent) * initial


# ----------------------------------------------------------------------
# Per-interval factors and the exponential rate certificate.
# ----------------------------------------------------------------------


def default_split_length(K: float) -> float:
    """Default piece length for splitting unboundedly long attraction
    intervals: 1/K + ln(2)/K, comfortably above both the repulsion cap and
    the second-order good-length floor."""
    if K <= 0:
        raise ValueError("K must be positive")
    return (1.0 + math.log(2.0)) / K


def contraction_factor(K: float, good_len: float, floor: float) -> float:
    """Guaranteed diameter shrink over one attraction interval.

    max{1 - e^{-K L}, 1 - (floor/K)(1 - e^{-K L})} for interval length L
    and kernel floor ``floor`` <= K on the reachable set.
    """
    if good_len < 0:
        raise ValueError("good_len must be nonnegative")
    decay = 1.0 - math.exp(-K * good_len)
    return max(decay, 1.0 - (floor / K) * decay)


def growth_factor(K: float, bad_len: float) -> float:
    """Worst-case diameter amplification over one repulsion interval:
    e^{K b} / (2 - e^{K b}); defined only under the bad cap b < ln(2)/K."""
    if bad_len < 0:
        raise ValueError("bad_len must be nonnegative")
    g = math.exp(K * bad_len)
    if g >= 2.0:
        raise FactorUndefined(
            "exp(K*b) = %.6g >= 2: repulsion interval too long" % g
        )
    return g / (2.0 - g)


@dataclass(frozen=True)
class ExpRateCert:
    """Exponential-envelope certificate: d(t) <= exp(-gamma (t - ln2/K - T)) d(0).

    c is the supremum of the per-cycle (growth x contraction) factor over
    the realized cycles, T the largest realized attraction length, and
    gamma = ln(1/c) / (ln2/K + T).  ``case`` records whether T came from
    the schedule as-is ("I") or after splitting long attraction intervals
    ("II").
    """

    c: float
    gamma: float
    T: float
    case: str

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValueError("c must lie in (0, 1)")


def exp_rate(schedule: SwitchingSchedule, K: float, psi0: float) -> ExpRateCert:
    """Derive the exponential consensus rate for this schedule.

    Walks the realized cycles (attraction interval plus the following
    repulsion interval, if any) up to the horizon; the families' monotone
    structure puts the worst cycle inside that window.  Raises
    RateNotContractive when the worst factor reaches 1.
    """
    if psi0 is None or psi0 <= 0:
        raise ValueError("a positive kernel floor is required")
    segs = schedule.segments(schedule.horizon)
    if not segs:
        raise EmptySchedule("no intervals before the horizon")
    worst = 0.0
    t_max = 0.0
    i = 0
    while i < len(segs):
        seg = segs[i]
        if seg.sign == GOOD:
            g = seg.t_end - seg.t_start
            t_max = max(t_max, g)
            b = 0.0
            if i + 1 < len(segs) and segs[i + 1].sign == BAD:
                nxt = segs[i + 1]
                b = nxt.t_end - nxt.t_start
                i += 1
            # Horizon-truncated attraction pieces are not cycles: the
            # envelope induction runs over full cycles, and a partial
            # attraction piece only ever shrinks the diameter further.
            if seg.complete:
                worst = max(worst,
                            growth_factor(K, b) * contraction_factor(K, g, psi0))
        i += 1
    if worst >= 1.0:
        raise RateNotContractive(worst)
    if worst <= 0.0:
        raise EmptySchedule("no complete attraction interval before the horizon")
    gamma = math.log(1.0 / worst) / (math.log(2.0) / K + t_max)
    return ExpRateCert(c=worst, gamma=gamma, T=t_max,
                       case="II" if schedule.was_split else "I")
