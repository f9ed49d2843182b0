"""Fixed-step classical Runge-Kutta, with steps aligned to switch times.

The sign function is discontinuous exactly at the switch times, so no
integration step may straddle one: the window [0, horizon] is partitioned
at the switch times and each piece is covered by ceil(len/h_max) equal
steps.  The last step of each piece lands on the stored boundary itself
(not on an accumulated sum), so switch samples are bit-exact and certify
cleanly across thousands of intervals.  Adaptive stepping is deliberately
avoided: the dynamics are smooth inside each piece and determinism is a
feature the certificates rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import CS, HK, ModelSpec, SystemState, cs_rhs, hk_rhs
from .errors import NonFiniteState
from .schedule import Segment as ScheduleSegment

# States whose max |entry| exceeds this abort the run: repulsion intervals
# beyond the admissible cap genuinely diverge, and the tool must fail
# loudly rather than overflow.
BLOWUP_LIMIT = 1e12


@dataclass(frozen=True)
class TrajectorySegment:
    """One constant-sign stretch of a trajectory, by sample indices."""

    index: int
    sign: int
    t_start: float
    t_end: float
    i_start: int
    i_end: int
    complete: bool


@dataclass
class Trajectory:
    """Switch-aligned samples of a run.

    Every switch time inside [0, horizon] appears exactly once among the
    sample times; ``segments`` map constant-sign stretches onto sample
    index ranges (consecutive segments share their boundary sample).
    """

    model: str
    times: np.ndarray
    positions: np.ndarray  # (S, N, d)
    velocities: np.ndarray | None
    alphas: np.ndarray
    switch_times: list
    switch_indices: list
    segments: list
    h_max: float
    record_stride: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_samples(self) -> int:
        return len(self.times)


def step_rk4(rhs, y, t: float, h: float):
    """One classical fourth-order step from t to t+h.

    ``rhs(t, y)`` must be smooth on [t, t+h]; the caller guarantees no
    switch time lies in the interior.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = rhs(t + h, y + h * k3)
    out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(t + h)
    return out


def _make_stepper(spec: ModelSpec):
    """Pack the model state into one array and build rhs(t, y) closures."""
    if spec.model == HK:
        def rhs_for(alpha):
            def rhs(t, y):
                return hk_rhs(spec, y, alpha=alpha)
            return rhs
        def pack(state):
            return state.positions.copy()
        def unpack_positions(y):
            return y
        def unpack_velocities(y):
            return None
    else:
        def rhs_for(alpha):
            def rhs(t, y):
                dx, dv = cs_rhs(spec, (y[0], y[1]), alpha=alpha)
                return np.stack([dx, dv])
            return rhs
        def pack(state):
            return np.stack([state.positions, state.velocities])
        def unpack_positions(y):
            return y[0]
        def unpack_velocities(y):
            return y[1]
    return rhs_for, pack, unpack_positions, unpack_velocities


def integrate(spec: ModelSpec, state0: SystemState, horizon: float,
              h_max: float = 1e-3, record_stride: int = 1) -> Trajectory:
    """Advance the model to the horizon and record switch-aligned samples.

    Records every ``record_stride``-th step plus all piece endpoints, so
    switch times are always sampled.  Raises NonFiniteState (with the
    offending time) if the state blows up.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if h_max <= 0:
        raise ValueError("h_max must be positive")
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    if spec.model == CS and state0.velocities is None:
        raise ValueError("second-order runs need initial velocities")

    rhs_for, pack, upos, uvel = _make_stepper(spec)
    y = pack(state0)
    if np.max(np.abs(y)) > BLOWUP_LIMIT:
        raise NonFiniteState(0.0, "initial state beyond blow-up guard")

    times = [0.0]
    snaps = [y.copy()]
    traj_segments = []

    for seg in spec.schedule.segments(horizon):
        assert isinstance(seg, ScheduleSegment)
        rhs = rhs_for(seg.sign)
        length = seg.t_end - seg.t_start
        n_steps = max(1, int(np.ceil(length / h_max)))
        h = length / n_steps
        i_start = len(times) - 1
        t = seg.t_start
        for k in range(1, n_steps + 1):
            # Land the final step on the stored endpoint, not on t + k*h.
            t_next = seg.t_end if k == n_steps else seg.t_start + k * h
            y = step_rk4(rhs, y, t, t_next - t)
            vmax = float(np.max(np.abs(y)))
            if vmax > BLOWUP_LIMIT:
                raise NonFiniteState(t_next, "|state| reached %.3g" % vmax)
            if k % record_stride == 0 or k == n_steps:
                times.append(t_next)
                snaps.append(y.copy())
            t = t_next
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
    index_of = {seg.t_start: seg.i_start for seg in traj_segments}
    index_of.update({seg.t_end: seg.i_end for seg in traj_segments})
    index_of.setdefault(0.0, 0)
    switch_indices = [index_of[t] for t in switch_times if t in index_of]
    switch_times = [t for t in switch_times if t in index_of]

    alphas = np.array([spec.schedule.alpha_at(t) for t in times_arr], dtype=int)

    return Trajectory(
        model=spec.model, times=times_arr, positions=positions,
        velocities=velocities, alphas=alphas, switch_times=switch_times,
        switch_indices=switch_indices, segments=traj_segments,
        h_max=h_max, record_stride=record_stride,
    )
