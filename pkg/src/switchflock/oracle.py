"""Independent ground truths for testing the main integration path.

For two agents under a constant kernel w == k the pairwise system closes
on the difference variable: with the switching sign a(t) and its running
integral A(t) = int_0^t a(s) ds,

    first-order:   (x_1 - x_2)'(t) = -2 k a(t) (x_1 - x_2)
                   => d(t) = d(0) exp(-2 k A(t)),
    second-order:  (v_1 - v_2)'(t) = -2 k a(t) (v_1 - v_2)
                   => d_V(t) = d_V(0) exp(-2 k A(t)),
                   (x_1 - x_2)(t) = gap(0) + vgap(0) int_0^t e^{-2k A(s)} ds,

every coordinate of the difference decaying identically, so the formulas
are dimension-free.  Only constant kernels have this closed form; other
kernels are cross-checked against the explicit-Euler reference below,
which is first order and a genuinely different code path from the RK4
driver.
"""

from __future__ import annotations

import math

import numpy as np

from .dynamics import CS, HK, ModelSpec, SystemState, cs_rhs, hk_rhs
from .errors import NonFiniteState
from .integrator import BLOWUP_LIMIT, Trajectory, TrajectorySegment
from .schedule import SwitchingSchedule


class SignedArea:
    """Running integral of the switching sign: piecewise linear, slope +-1."""

    def __init__(self, schedule: SwitchingSchedule):
        self.schedule = schedule
        b = schedule.boundaries
        lens = np.diff(b)
        self._prefix = np.concatenate(
            [[0.0], np.cumsum(schedule.signs[: len(lens)] * lens)]
        )

    def at(self, t: float) -> float:
        idx = self.schedule._interval_index(t)
        return float(
            self._prefix[idx]
            + self.schedule.signs[idx] * (t - self.schedule.boundaries[idx])
        )


def two_agent_hk(d0: float, k: float, schedule: SwitchingSchedule,
                 t: float) -> float:
    """Exact two-agent opinion diameter under a constant kernel w == k."""
    if d0 < 0 or k <= 0:
        raise ValueError("need d0 >= 0 and k > 0")
    return d0 * math.exp(-2.0 * k * SignedArea(schedule).at(t))


def two_agent_cs(dv0: float, k: float, schedule: SwitchingSchedule,
                 t: float) -> float:
    """Exact two-agent velocity diameter under a constant kernel w == k."""
    if dv0 < 0 or k <= 0:
        raise ValueError("need dv0 >= 0 and k > 0")
    return dv0 * math.exp(-2.0 * k * SignedArea(schedule).at(t))


def decay_time_integral(k: float, schedule: SwitchingSchedule,
                        t: float) -> float:
    """int_0^t exp(-2k A(s)) ds, in closed form piece by piece.

    On a piece with sign s starting at time a with accumulated area A(a),
    the integrand is exp(-2k(A(a) + s_(u-a))) whose integral is elementary.
    """
    area = SignedArea(schedule)
    total = 0.0
    b = schedule.boundaries
    for idx in range(len(b)):
        a = float(b[idx])
        if a >= t:
            break
        end = float(b[idx + 1]) if idx + 1 < len(b) else math.inf
        e = min(end, t)
        sign = float(schedule.signs[idx])
        c = 2.0 * k * sign
        total += math.exp(-2.0 * k * area.at(a)) * (-math.expm1(-c * (e - a))) / c
    return total


def two_agent_cs_position_gap(gap0: float, vgap0: float, k: float,
                              schedule: SwitchingSchedule, t: float) -> float:
    """Exact scalar position gap for the two-agent second-order system.

    gap0 and vgap0 are signed components of the initial difference along
    any fixed coordinate; the same formula holds per coordinate.
    """
    return gap0 + vgap0 * decay_time_integral(k, schedule, t)


def fine_euler_reference(spec: ModelSpec, state0: SystemState, horizon: float,
                         h: float = 1e-4, record_stride: int = 1) -> Trajectory:
    """Explicit Euler with the same switch alignment, as a cross-check.

    First-order accurate; h <= 1e-4 is recommended when comparing against
    the RK4 driver.  Kept deliberately simple and separate so the two
    integration paths share no stepping code.
    """
    if spec.model == CS and state0.velocities is None:
        raise ValueError("second-order runs need initial velocities")
    if spec.model == HK:
        y = state0.positions.copy()
        def deriv(y, alpha):
            return hk_rhs(spec, y, alpha=alpha)
    else:
        y = np.stack([state0.positions, state0.velocities])
        def deriv(y, alpha):
            dx, dv = cs_rhs(spec, (y[0], y[1]), alpha=alpha)
            return np.stack([dx, dv])

    times = [0.0]
    snaps = [y.copy()]
    traj_segments = []
    for seg in spec.schedule.segments(horizon):
        length = seg.t_end - seg.t_start
        n_steps = max(1, int(math.ceil(length / h)))
        step = length / n_steps
        i_start = len(times) - 1
        for kk in range(1, n_steps + 1):
            t_next = seg.t_end if kk == n_steps else seg.t_start + kk * step
            y = y + (t_next - (seg.t_start + (kk - 1) * step)) * deriv(y, seg.sign)
            if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > BLOWUP_LIMIT:
                raise NonFiniteState(t_next)
            if kk % record_stride == 0 or kk == n_steps:
                times.append(t_next)
                snaps.append(y.copy())
        traj_segments.append(TrajectorySegment(
            index=seg.index, sign=seg.sign, t_start=seg.t_start,
            t_end=seg.t_end, i_start=i_start, i_end=len(times) - 1,
            complete=seg.complete,
        ))

    times_arr = np.asarray(times)
    stack = np.stack(snaps)
    if spec.model == HK:
        positions, velocities = stack, None
    else:
        positions, velocities = stack[:, 0], stack[:, 1]
    switch_times = [float(b) for b in spec.schedule.boundaries if b <= horizon]
    index_of = {s.t_start: s.i_start for s in traj_segments}
    index_of.update({s.t_end: s.i_end for s in traj_segments})
    index_of.setdefault(0.0, 0)
    switch_indices = [index_of[t] for t in switch_times if t in index_of]
    switch_times = [t for t in switch_times if t in index_of]
    alphas = np.array([spec.schedule.alpha_at(t) for t in times_arr], dtype=int)
    return Trajectory(
        model=spec.model, times=times_arr, positions=positions,
        velocities=velocities, alphas=alphas, switch_times=switch_times,
        switch_indices=switch_indices, segments=traj_segments,
        h_max=h, record_stride=record_stride,
    )
