"""Influence kernels: strictly positive, bounded pairwise weights.

A kernel is either *radial* — a profile ``w(r)`` of the distance between two
agents — or *general* — a map ``w(y, z)`` on ordered pairs of points.  Every
kernel carries a declared supremum norm; the contraction/growth constants
derived elsewhere are only valid when that declaration is a true upper
bound, so evaluations are guarded at runtime and a wrong declaration fails
loudly instead of silently invalidating the certificates.

Certified lower bounds over compact sets (the floor the consensus
certificates need) are computed on grids and optionally tightened with a
Lipschitz slack: ``grid_min - L*h/2`` is a true lower bound when ``L`` is a
Lipschitz constant and ``h`` the grid spacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    DimensionTooLarge,
    GridBudgetExceeded,
    NonPositiveBound,
    NonPositiveValue,
    SupNormViolation,
)

RADIAL = "radial"
GENERAL = "general"

# Multiplicative headroom allowed before a sup-norm violation is raised.
SUP_NORM_TOL = 1e-12

# Any computed lower bound at or below this is an error, never a clamp.
POSITIVITY_FLOOR = 1e-300

# Cap on pair evaluations in product-grid minimisation.
_GRID_BUDGET = 2 * 10**7


@dataclass(frozen=True)
class InfluenceKernel:
    """A positive bounded influence function with a declared sup norm.

    ``evaluator`` maps a distance array (radial) or two point arrays
    (general) to weights.  ``vectorized`` marks evaluators that accept
    ndarray inputs with broadcasting; scalar-only callables are looped.
    ``nonincreasing`` (radial only) unlocks exact minima: the minimum of a
    nonincreasing profile over [0, r] is its value at r.
    """

    form: str
    evaluator: Callable
    sup_norm: float
    lipschitz: float | None = None
    nonincreasing: bool = False
    family: str | None = None
    params: tuple = ()
    analytic_floor: float | None = None
    vectorized: bool = True
    fast: tuple | None = None  # (family_code, p0, p1) for the compiled core

    def __post_init__(self):
        if self.form not in (RADIAL, GENERAL):
            raise ValueError("form must be 'radial' or 'general'")
        if not (np.isfinite(self.sup_norm) and self.sup_norm > 0):
            raise ValueError("sup_norm must be finite and positive")
        if self.nonincreasing and self.form != RADIAL:
            raise ValueError("nonincreasing only makes sense for radial kernels")

    # -- raw evaluation (no guards) ------------------------------------

    def _raw_radial(self, r):
        if self.vectorized:
            return np.asarray(self.evaluator(r), dtype=float)
        flat = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.array([float(self.evaluator(v)) for v in flat.ravel()])
        return out.reshape(flat.shape) if np.ndim(r) else out[0]

    def _raw_general(self, y, z):
        if self.vectorized:
            return np.asarray(self.evaluator(y, z), dtype=float)
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        yy = y.reshape(-1, y.shape[-1])
        zz = z.reshape(-1, z.shape[-1])
        out = np.array([float(self.evaluator(a, b)) for a, b in zip(yy, zz)])
        return out.reshape(y.shape[:-1])

    def _guard(self, vals):
        v = np.asarray(vals, dtype=float)
        if not np.all(np.isfinite(v)) or np.any(v <= 0.0):
            raise NonPositiveValue(
                "kernel returned a non-finite or non-positive value"
            )
        vmax = float(v.max()) if v.size else 0.0
        if vmax > self.sup_norm * (1.0 + SUP_NORM_TOL):
            raise SupNormViolation(
                "kernel value %.17g exceeds declared sup norm %.17g"
                % (vmax, self.sup_norm)
            )

    # -- public evaluation ---------------------------------------------

    def eval(self, *args):
        """Evaluate the kernel; guards positivity and the declared sup norm.

        Radial form takes one argument (distance, scalar or array); general
        form takes two points (or arrays of points, last axis = dimension).
        """
        if self.form == RADIAL:
            if len(args) != 1:
                raise TypeError("radial kernel takes a single distance argument")
            r = np.asarray(args[0], dtype=float)
            if np.any(r < 0):
                raise ValueError("radial distance must be nonnegative")
            vals = self._raw_radial(r)
        else:
            if len(args) != 2:
                raise TypeError("general kernel takes two points")
            y = np.asarray(args[0], dtype=float)
            z = np.asarray(args[1], dtype=float)
            if y.shape != z.shape:
                raise ValueError("point arguments must share a shape")
            vals = self._raw_general(y, z)
        self._guard(vals)
        if np.ndim(vals) == 0:
            return float(vals)
        return vals


@dataclass(frozen=True)
class KernelLowerBound:
    """A lower bound for the kernel over a ball/interval of given radius.

    ``certified`` is True when the value is guaranteed (nonincreasing
    shortcut, Lipschitz slack, or a user-supplied analytic floor), False
    for a plain grid minimum.
    """

    value: float
    domain_radius: float
    certified: bool

    def __post_init__(self):
        if not (self.value > 0):
            raise NonPositiveBound("lower bound must be positive")
        if self.value <= POSITIVITY_FLOOR:
            raise NonPositiveBound(
                "lower bound %.3g is at/below the positivity floor" % self.value
            )


@dataclass(frozen=True)
class SupNormReport:
    """Observed max of sampled kernel values against the declared sup norm."""

    passed: bool
    max_observed: float
    margin: float
    n_samples: int


def sup_norm_check(kernel: InfluenceKernel, sample_points) -> SupNormReport:
    """Spot-check the declared sup norm on user-supplied sample points.

    Radial kernels take a sequence of distances, general kernels a sequence
    of (y, z) pairs.  Failure is encoded in the report, never raised.
    """
    samples = list(sample_points)
    if not samples:
        raise ValueError("sample_points must be non-empty")
    if kernel.form == RADIAL:
        vals = kernel._raw_radial(np.asarray(samples, dtype=float))
    else:
        ys = np.asarray([p[0] for p in samples], dtype=float)
        zs = np.asarray([p[1] for p in samples], dtype=float)
        vals = kernel._raw_general(ys, zs)
    vmax = float(np.max(vals))
    return SupNormReport(
        passed=bool(vmax <= kernel.sup_norm),
        max_observed=vmax,
        margin=kernel.sup_norm - vmax,
        n_samples=len(samples),
    )


def _radial_grid(radius: float, step: float) -> np.ndarray:
    pts = np.arange(0.0, radius, step)
    return np.append(pts, radius)


def lower_bound_on_ball(
    kernel: InfluenceKernel,
    radius: float,
    grid_step: float | None = None,
    dim: int | None = None,
) -> KernelLowerBound:
    """Lower-bound the kernel over the ball of the given radius.

    Radial: minimum of w over [0, radius].  Nonincreasing profiles give the
    exact value w(radius); otherwise a grid minimum, certified by
    subtracting ``lipschitz * grid_step / 2`` when a Lipschitz constant is
    declared.  General: minimum of w(y, z) over both arguments ranging in
    the ball (the grid covers the enclosing cube, which can only lower the
    bound, keeping it sound); ``dim`` is required and must be <= 3 unless
    an analytic floor was declared on the kernel.
    """
    if not (np.isfinite(radius) and radius >= 0):
        raise ValueError("radius must be finite and nonnegative")

    if kernel.form == RADIAL:
        if kernel.nonincreasing:
            return KernelLowerBound(kernel.eval(radius), radius, True)
        if radius == 0.0:
            return KernelLowerBound(kernel.eval(0.0), 0.0, True)
        step = grid_step if grid_step is not None else radius * 1e-3
        if step <= 0:
            raise ValueError("grid_step must be positive")
        grid = _radial_grid(radius, step)
        gmin = float(np.min(kernel.eval(grid)))
        if kernel.lipschitz is not None:
            value = gmin - kernel.lipschitz * step / 2.0
            if value <= POSITIVITY_FLOOR:
                raise NonPositiveBound(
                    "Lipschitz slack %.3g swallows the grid minimum %.3g; "
                    "use a finer grid" % (kernel.lipschitz * step / 2.0, gmin)
                )
            return KernelLowerBound(value, radius, True)
        return KernelLowerBound(gmin, radius, False)

    # general form
    if kernel.analytic_floor is not None:
        return KernelLowerBound(float(kernel.analytic_floor), radius, True)
    if dim is None:
        raise ValueError("dim is required for general kernels")
    if dim > 3:
        raise DimensionTooLarge(
            "grid minimisation in dimension %d; declare analytic_floor" % dim
        )
    if radius == 0.0:
        zero = np.zeros(dim)
        return KernelLowerBound(kernel.eval(zero, zero), 0.0, True)
    step = grid_step if grid_step is not None else radius * 1e-3
    if step <= 0:
        raise ValueError("grid_step must be positive")
    axis = np.append(np.arange(-radius, radius, step), radius)
    m = len(axis) ** dim
    if m * m > _GRID_BUDGET:
        raise GridBudgetExceeded(
            "product grid needs %d pair evaluations (budget %d); "
            "increase grid_step" % (m * m, _GRID_BUDGET)
        )
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    gmin = math.inf
    block = max(1, _GRID_BUDGET // (4 * m))
    for i0 in range(0, m, block):
        ys = pts[i0 : i0 + block][:, None, :]
        zs = pts[None, :, :]
        vals = kernel._raw_general(np.broadcast_to(ys, (ys.shape[0], m, dim)),
                                   np.broadcast_to(zs, (ys.shape[0], m, dim)))
        kernel._guard(vals)
        gmin = min(gmin, float(np.min(vals)))
    if kernel.lipschitz is not None:
        # L is Lipschitz w.r.t. the concatenated pair (y, z) in R^{2d};
        # the cube grid leaves every pair within step*sqrt(2d)/2 of a node.
        slack = kernel.lipschitz * step * math.sqrt(2.0 * dim) / 2.0
        value = gmin - slack
        if value <= POSITIVITY_FLOOR:
            raise NonPositiveBound(
                "Lipschitz slack %.3g swallows the grid minimum %.3g" % (slack, gmin)
            )
        return KernelLowerBound(value, radius, True)
    return KernelLowerBound(gmin, radius, False)


def running_min(
    kernel: InfluenceKernel,
    r_max: float,
    prev: tuple[float, float] | None = None,
    grid_step: float | None = None,
) -> float:
    """Minimum of a radial kernel over [0, r_max], incrementally.

    ``prev = (r_prev, min_prev)`` reuses an earlier result and scans only
    (r_prev, r_max].  The grid is anchored at multiples of ``grid_step``
    from 0, so extending r_max only ever adds scan points and the result is
    monotone non-increasing in r_max.
    """
    if kernel.form != RADIAL:
        raise ValueError("running_min applies to radial kernels only")
    if r_max < 0:
        raise ValueError("r_max must be nonnegative")
    r_prev, min_prev = (0.0, math.inf) if prev is None else prev
    if r_max < r_prev:
        raise ValueError("r_max must be >= the previous radius")
    if prev is not None and r_max == r_prev:
        return min_prev  # empty extension
    if kernel.nonincreasing:
        return min(min_prev, kernel.eval(r_max))
    if r_max == r_prev:
        return kernel.eval(0.0)
    step = grid_step if grid_step is not None else max(r_max, 1e-12) * 1e-3
    k0 = int(math.floor(r_prev / step)) + 1
    k1 = int(math.floor(r_max / step))
    cand = [r_prev, r_max] if prev is None else [r_max]
    if k1 >= k0:
        cand = np.concatenate([np.arange(k0, k1 + 1) * step, cand])
    vals = kernel.eval(np.asarray(cand, dtype=float))
    return float(min(min_prev, np.min(vals)))


# ----------------------------------------------------------------------
# Builtin families.  Each factory fills in analytic Lipschitz constants
# and the compiled-core dispatch code where available.
# ----------------------------------------------------------------------


def constant_kernel(value: float, sup_norm: float | None = None) -> InfluenceKernel:
    """w(r) = value everywhere."""
    if value <= 0:
        raise ValueError("constant kernel value must be positive")
    sup = float(sup_norm) if sup_norm is not None else float(value)

    def f(r):
        return np.full(np.shape(r), float(value))

    return InfluenceKernel(
        form=RADIAL, evaluator=f, sup_norm=sup, lipschitz=0.0,
        nonincreasing=True, family="constant", params=(float(value),),
        fast=(0, float(value), 0.0),
    )


def rational_kernel(beta: float = 1.0, sup_norm: float | None = None) -> InfluenceKernel:
    """w(r) = (1 + r^2)^(-beta); the workhorse bounded-confidence profile."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    r_star = 1.0 / math.sqrt(2.0 * beta + 1.0)
    lips = 2.0 * beta * r_star * (1.0 + r_star * r_star) ** (-(beta + 1.0))

    def f(r):
        r = np.asarray(r, dtype=float)
        return (1.0 + r * r) ** (-beta)

    return InfluenceKernel(
        form=RADIAL, evaluator=f,
        sup_norm=float(sup_norm) if sup_norm is not None else 1.0,
        lipschitz=lips, nonincreasing=True,
        family="rational", params=(float(beta),),
        fast=(1, float(beta), 0.0),
    )


def gaussian_kernel(sigma: float = 1.0, sup_norm: float | None = None) -> InfluenceKernel:
    """w(r) = exp(-r^2 / sigma^2)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    lips = math.sqrt(2.0) * math.exp(-0.5) / sigma

    def f(r):
        r = np.asarray(r, dtype=float)
        return np.exp(-(r * r) / (sigma * sigma))

    return InfluenceKernel(
        form=RADIAL, evaluator=f,
        sup_norm=float(sup_norm) if sup_norm is not None else 1.0,
        lipschitz=lips, nonincreasing=True,
        family="gaussian", params=(float(sigma),),
        fast=(2, float(sigma), 0.0),
    )


def bump_kernel(floor: float = 0.05, radius: float = 1.0,
                sup_norm: float | None = None) -> InfluenceKernel:
    """Compactly-peaked profile with a strictly positive tail.

    w(r) = floor + (1 - floor) * exp(1 - 1/(1 - (r/radius)^2)) inside the
    radius, and exactly floor beyond it.  The floor keeps the kernel
    strictly positive, as the model requires.
    """
    if not 0.0 < floor < 1.0:
        raise ValueError("floor must lie in (0, 1)")
    if radius <= 0:
        raise ValueError("radius must be positive")

    def f(r):
        r = np.asarray(r, dtype=float)
        u = np.atleast_1d(r / radius)
        out = np.full(u.shape, float(floor))
        inside = u < 1.0
        ui = u[inside]
        out[inside] += (1.0 - floor) * np.exp(1.0 - 1.0 / (1.0 - ui * ui))
        return out.reshape(np.shape(r))

    return InfluenceKernel(
        form=RADIAL, evaluator=f,
        sup_norm=float(sup_norm) if sup_norm is not None else 1.0,
        lipschitz=None, nonincreasing=True,
        family="bump", params=(float(floor), float(radius)),
        fast=(3, float(floor), float(radius)),
    )


def general_gaussian_kernel(sigma: float = 1.0,
                            sup_norm: float | None = None) -> InfluenceKernel:
    """w(y, z) = exp(-|y - z|^2 / sigma^2), the general-form smoke-test family."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    lips = 2.0 * math.exp(-0.5) / sigma

    def f(y, z):
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        diff = y - z
        return np.exp(-np.sum(diff * diff, axis=-1) / (sigma * sigma))

    # Pair weights depend on |y-z| only, so the compiled distance path applies.
    return InfluenceKernel(
        form=GENERAL, evaluator=f,
        sup_norm=float(sup_norm) if sup_norm is not None else 1.0,
        lipschitz=lips, family="general_gaussian", params=(float(sigma),),
        fast=(2, float(sigma), 0.0),
    )


_FACTORIES = {
    "constant": constant_kernel,
    "rational": rational_kernel,
    "gaussian": gaussian_kernel,
    "bump": bump_kernel,
    "general_gaussian": general_gaussian_kernel,
}


def make_kernel(family: str, *, sup_norm_K=None, lipschitz_L=None,
                nonincreasing=None, analytic_floor=None, **params) -> InfluenceKernel:
    """Build a builtin kernel from config-style fields.

    ``sup_norm_K`` overrides the declared sup norm (must remain a true
    upper bound), ``lipschitz_L`` / ``nonincreasing`` / ``analytic_floor``
    override the family defaults.
    """
    try:
        factory = _FACTORIES[family]
    except KeyError:
        raise ValueError(
            "unknown kernel family %r (choose from %s)"
            % (family, sorted(_FACTORIES))
        ) from None
    kern = factory(sup_norm=sup_norm_K, **params)
    changes = {}
    if lipschitz_L is not None:
        changes["lipschitz"] = float(lipschitz_L)
    if nonincreasing is not None:
        changes["nonincreasing"] = bool(nonincreasing)
    if analytic_floor is not None:
        changes["analytic_floor"] = float(analytic_floor)
    if changes:
        from dataclasses import replace

        kern = replace(kern, **changes)
    return kern
