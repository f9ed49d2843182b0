"""Right-hand sides of the two interaction models.

First-order ("HK"): each agent's opinion moves toward (sign +1) or away
from (sign -1) every other agent, weighted by the influence kernel:

    dx_i/dt = alpha(t) / (N-1) * sum_{j != i} w(x_i, x_j) (x_j - x_i).

Second-order ("CS"): positions integrate velocities, and the switching
coupling acts on velocity differences with radial weights:

    dx_i/dt = v_i
    dv_i/dt = alpha(t) / (N-1) * sum_{j != i} w(|x_i - x_j|) (v_j - v_i).

General (non-radial) kernels are never assumed symmetric: all N(N-1)
ordered-pair evaluations are performed.  Radial kernels are symmetric by
construction and share one evaluation per unordered pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pairwise
from .errors import MissingVelocities, NonPositiveValue, SupNormViolation
from .kernels import RADIAL, SUP_NORM_TOL, InfluenceKernel
from .schedule import SwitchingSchedule

HK = "HK"
CS = "CS"


@dataclass
class SystemState:
    """Positions (N, d) and, for second-order runs, velocities (N, d)."""

    positions: np.ndarray
    velocities: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[0] < 2:
            raise ValueError("positions must be (N, d) with N >= 2")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")
        if self.velocities is not None:
            self.velocities = np.asarray(self.velocities, dtype=float)
            if self.velocities.shape != self.positions.shape:
                raise ValueError("velocities must match positions in shape")
            if not np.all(np.isfinite(self.velocities)):
                raise ValueError("velocities must be finite")


@dataclass
class ModelSpec:
    """Model + kernel + schedule + sizes; the immutable run description."""

    model: str
    kernel: InfluenceKernel
    schedule: SwitchingSchedule
    N: int
    d: int

    def __post_init__(self):
        if self.model not in (HK, CS):
            raise ValueError("model must be 'HK' or 'CS'")
        if self.N < 2 or self.d < 1:
            raise ValueError("need N >= 2 agents and d >= 1 dimensions")
        if self.model == CS and self.kernel.form != RADIAL:
            raise ValueError("second-order runs need a radial kernel")


def _check_weights(kernel: InfluenceKernel, wmin: float, wmax: float) -> None:
    if not (np.isfinite(wmin) and np.isfinite(wmax)) or wmin <= 0.0:
        raise NonPositiveValue(
            "kernel produced a non-finite or non-positive weight (min=%r)" % (wmin,)
        )
    if wmax > kernel.sup_norm * (1.0 + SUP_NORM_TOL):
        raise SupNormViolation(
            "kernel weight %.17g exceeds declared sup norm %.17g"
            % (wmax, kernel.sup_norm)
        )


def _pair_weight_matrix(kernel: InfluenceKernel, x: np.ndarray) -> np.ndarray:
    """Full N x N weight matrix for kernels without a compiled family code."""
    n = x.shape[0]
    if kernel.form == RADIAL:
        diff = x[:, None, :] - x[None, :, :]
        r = np.sqrt((diff * diff).sum(-1))
        if kernel.vectorized:
            w = np.asarray(kernel.evaluator(r), dtype=float)
        else:
            # symmetric: one evaluation per unordered pair
            w = np.empty((n, n))
            for i in range(n):
                w[i, i] = 1.0  # placeholder, excluded below
                for j in range(i + 1, n):
                    w[i, j] = w[j, i] = float(kernel.evaluator(r[i, j]))
    else:
        if kernel.vectorized:
            yi = np.broadcast_to(x[:, None, :], (n, n, x.shape[1]))
            zj = np.broadcast_to(x[None, :, :], (n, n, x.shape[1]))
            w = np.asarray(kernel.evaluator(yi, zj), dtype=float)
        else:
            w = np.empty((n, n))
            for i in range(n):
                w[i, i] = 1.0
                for j in range(n):
                    if j != i:
                        w[i, j] = float(kernel.evaluator(x[i], x[j]))
    return w


def _coupling(kernel: InfluenceKernel, x: np.ndarray, src: np.ndarray,
              scale: float) -> np.ndarray:
    if kernel.fast is not None:
        deriv, wmin, wmax = pairwise.coupling_deriv(x, src, scale, *kernel.fast)
        _check_weights(kernel, wmin, wmax)
        return deriv
    w = _pair_weight_matrix(kernel, x)
    n = x.shape[0]
    off = ~np.eye(n, dtype=bool)
    _check_weights(kernel, float(w[off].min()), float(w[off].max()))
    w = w.copy()
    np.fill_diagonal(w, 0.0)
    return scale * (w @ src - w.sum(axis=1)[:, None] * src)


def hk_rhs(spec: ModelSpec, state, t: float | None = None,
           alpha: int | None = None) -> np.ndarray:
    """First-order time derivative of the positions.

    ``alpha`` overrides the schedule lookup; the integrator passes the
    frozen interval sign so no sub-step lookup can disagree.
    """
    x = state.positions if isinstance(state, SystemState) else np.asarray(state, float)
    if alpha is None:
        if t is None:
            raise ValueError("need either t or an explicit alpha")
        alpha = spec.schedule.alpha_at(t)
    return _coupling(spec.kernel, x, x, alpha / (spec.N - 1))


def cs_rhs(spec: ModelSpec, state, t: float | None = None,
           alpha: int | None = None):
    """Second-order derivatives (dx, dv); velocity coupling on (v_j - v_i)."""
    if isinstance(state, SystemState):
        x, v = state.positions, state.velocities
    else:
        x, v = state
        x = np.asarray(x, float)
        v = np.asarray(v, float) if v is not None else None
    if v is None:
        raise MissingVelocities("second-order dynamics need velocities")
    if alpha is None:
        if t is None:
            raise ValueError("need either t or an explicit alpha")
        alpha = spec.schedule.alpha_at(t)
    dv = _coupling(spec.kernel, x, v, alpha / (spec.N - 1))
    return v.copy(), dv
