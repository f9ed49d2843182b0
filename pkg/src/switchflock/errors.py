"""Exception hierarchy: everything this package raises on purpose derives
from SwitchflockError, so callers can fence off library failures from bugs."""


class SwitchflockError(Exception):
    """Base class for scheduling, kernel, integration, and certificate failures."""


class NonPositiveValue(SwitchflockError):
    """A kernel evaluation was not finite and strictly positive."""


class SupNormViolation(SwitchflockError):
    """A kernel evaluation exceeded the declared supremum norm."""


class NonPositiveBound(SwitchflockError):
    """The Lipschitz slack drove a certified kernel lower bound to <= 0.

    The grid is too coarse for the requested certification; retry with a
    smaller grid_step.
    """


class DimensionTooLarge(SwitchflockError):
    """Grid minimisation of a general (pair) kernel requested in dimension > 3.

    Supply an analytic floor on the kernel instead.
    """


class GridBudgetExceeded(SwitchflockError):
    """A product grid would need more evaluations than the safety budget allows."""


class EmptySchedule(SwitchflockError):
    """The switching schedule has no intervals (or does not start at t=0)."""


class BadCapViolated(SwitchflockError):
    """A repulsion interval is too long for the declared coupling bound.

    Every repulsion interval must be strictly shorter than ln(2)/K."""

    def __init__(self, index, start, end, cap):
        self.index = index
        self.length = end - start
        self.cap = cap
        super().__init__(
            "bad interval %d ([%g, %g]) has length %.6g >= ln2/K = %.6g"
            % (index, start, end, self.length, cap)
        )


class GoodFloorViolated(SwitchflockError):
    """An attraction interval is too short for the flocking hypotheses.

    Second-order runs need every attraction interval strictly longer than 1/K."""

    def __init__(self, index, start, end, floor):
        self.index = index
        self.length = end - start
        super().__init__(
            "good interval %d ([%g, %g]) has length %.6g <= 1/K = %.6g"
            % (index, start, end, self.length, floor)
        )


class InfiniteBadTotal(SwitchflockError):
    """The total repulsion time diverges, so no uniform state bound exists."""


class RateNotContractive(SwitchflockError):
    """The worst per-cycle factor is >= 1: no exponential envelope available."""

    def __init__(self, c):
        self.c = c
        super().__init__(
            "per-cycle contraction-times-growth factor is %.6g >= 1" % c
        )


class MissingVelocities(SwitchflockError):
    """A second-order operation was applied to a state without velocities."""


class NonFiniteState(SwitchflockError):
    """Integration produced a non-finite or blown-up state."""

    def __init__(self, t, detail=""):
        self.t = t
        msg = "state became non-finite (or exceeded the blow-up guard) at t=%.9g" % t
        if detail:
            msg += ": " + detail
        super().__init__(msg)


class MissingSwitchSamples(SwitchflockError):
    """A trajectory lacks samples at the switching times a certificate needs."""


class FactorUndefined(SwitchflockError):
    """The bad-interval growth factor is undefined (exp(K*b) >= 2)."""


class TIntervalViolation(SwitchflockError):
    """The uniform interval-length parameter T is too small for this run."""
