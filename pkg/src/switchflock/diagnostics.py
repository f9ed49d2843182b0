"""Certificates: numerical spot-checks of every bound the theory promises.

Each certificate takes a finished trajectory and verifies an inequality
with an explicit multiplicative slack.  The default slack absorbs the RK4
global error:

    cert_slack(h_max) = 1e-6 + 100 * h_max**4

(about 1e-6 at the default step).  Quadrature-backed checks (the decay
functional below) stack two trapezoid errors and use the looser
TOL_LYAP = 1e-4.  Every violation record carries (t, lhs, rhs, margin) so
a failure is reproducible from the serialized report alone.

The checks, by family:

* per attraction interval, the diameter shrinks by at least the factor
  max{1 - e^{-K L}, 1 - (floor/K)(1 - e^{-K L})};
* per repulsion interval, it grows by at most e^{K b} / (2 - e^{K b});
* directional hulls: inside an attraction interval every projection stays
  within the hull at the interval's *left* end; inside a repulsion
  interval, within the hull at its *right* end (a spot-check over the
  coordinate axes plus seeded random directions, not a proof over all
  directions);
* uniform bounds: max_i |state_i(t)| never exceeds the amplified initial
  bound, and sampled kernel values never drop below the certified floor;
* the exponential envelope exp(-gamma (t - ln2/K - T)) d(0) when the
  per-cycle factor is contractive;
* for second-order runs, the piecewise decay majorant D(t), the capped
  kernel-floor density phi(t), and the functional
  L(t) = D(t) + Int_0^{maxrun d_X(t)} min{e^{-KT} min_{[0,r]} w, e^{-KT}/T} dr,
  which must not increase inside intervals and may jump only by the
  per-interval factors at switch times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import pairwise
from .errors import (
    MissingSwitchSamples,
    MissingVelocities,
    TIntervalViolation,
)
from .integrator import Trajectory
from .kernels import RADIAL, InfluenceKernel, running_min
from .schedule import (
    BAD,
    GOOD,
    ExpRateCert,
    SwitchingSchedule,
    contraction_factor,
    growth_factor,
)

TOL_LYAP = 1e-4


def cert_slack(h_max: float) -> float:
    """Multiplicative slack absorbing the integrator's global error."""
    return 1e-6 + 100.0 * h_max ** 4


def diameter(points) -> float:
    """Max pairwise Euclidean distance; exact O(N^2 d) scan."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] < 2:
        raise ValueError("points must be (N, d) with N >= 2")
    return pairwise.max_pair_distance(points)


def position_diameters(traj: Trajectory) -> np.ndarray:
    if "dX" not in traj._cache:
        traj._cache["dX"] = pairwise.diameter_series(traj.positions)
    return traj._cache["dX"]


def velocity_diameters(traj: Trajectory) -> np.ndarray:
    if traj.velocities is None:
        raise MissingVelocities("trajectory has no velocities")
    if "dV" not in traj._cache:
        traj._cache["dV"] = pairwise.diameter_series(traj.velocities)
    return traj._cache["dV"]


def _primary_diameters(traj: Trajectory) -> np.ndarray:
    """The contracting metric: opinion diameter first-order, velocity
    diameter second-order."""
    return velocity_diameters(traj) if traj.model == "CS" else position_diameters(traj)


def _check_alignment(traj: Trajectory, schedule: SwitchingSchedule) -> None:
    horizon = float(traj.times[-1])
    expected = [float(b) for b in schedule.boundaries if b <= horizon]
    if [t for t in traj.switch_times] != expected:
        raise MissingSwitchSamples(
            "trajectory switch samples do not match the schedule"
        )


@dataclass
class Violation:
    what: str
    t: float
    lhs: float
    rhs: float
    margin: float

    def to_json(self) -> dict:
        return {"what": self.what, "t": self.t, "lhs": self.lhs,
                "rhs": self.rhs, "margin": self.margin}


@dataclass
class IntervalCheck:
    index: int
    d_start: float
    d_end: float
    factor: float
    ok: bool
    margin: float

    def to_json(self, factor_key: str) -> dict:
        return {"n": self.index, "d_start": self.d_start, "d_end": self.d_end,
                factor_key: self.factor, "ok": self.ok, "margin": self.margin}


@dataclass
class ContractionReport:
    checks: list
    violations: list
    ok: bool

    def to_json(self) -> dict:
        return {"ok": self.ok,
                "per_interval": [c.to_json("C2n") for c in self.checks],
                "violations": [v.to_json() for v in self.violations]}


@dataclass
class GrowthReport:
    checks: list
    violations: list
    ordering_violations: list
    ok: bool

    def to_json(self) -> dict:
        return {"ok": self.ok,
                "per_interval": [c.to_json("growth_factor") for c in self.checks],
                "violations": [v.to_json() for v in self.violations],
                "ordering_violations": [v.to_json() for v in self.ordering_violations]}


def contraction_certificate(traj: Trajectory, schedule: SwitchingSchedule,
                            K: float, psi0: float,
                            tol: float | None = None) -> ContractionReport:
    """Per attraction interval: endpoint shrink factor plus the weaker
    within-interval bound d(t) <= d(start)."""
    _check_alignment(traj, schedule)
    tol = cert_slack(traj.h_max) if tol is None else tol
    d = _primary_diameters(traj)
    checks, violations = [], []
    for seg in traj.segments:
        if seg.sign != GOOD:
            continue
        d_start = float(d[seg.i_start])
        inside = d[seg.i_start : seg.i_end + 1]
        worst = float(inside.max())
        if worst > d_start * (1.0 + tol):
            j = seg.i_start + int(np.argmax(inside))
            violations.append(Violation(
                "within-interval diameter monotonicity", float(traj.times[j]),
                worst, d_start * (1.0 + tol), worst - d_start * (1.0 + tol)))
        if not seg.complete:
            continue
        d_end = float(d[seg.i_end])
        factor = contraction_factor(K, seg.t_end - seg.t_start, psi0)
        bound = factor * d_start * (1.0 + tol)
        ok = d_end <= bound
        checks.append(IntervalCheck(seg.index, d_start, d_end, factor, ok,
                                    bound - d_end))
        if not ok:
            violations.append(Violation(
                "attraction contraction factor", seg.t_end, d_end, bound,
                d_end - bound))
    return ContractionReport(checks, violations, not violations)


def growth_certificate(traj: Trajectory, schedule: SwitchingSchedule, K: float,
                       tol: float | None = None) -> GrowthReport:
    """Per repulsion interval: the amplification cap e^{Kb}/(2 - e^{Kb}),
    within-interval dominance by the right endpoint, and the two orderings
    d(good end) <= d(good start), d(bad end) >= d(bad start)."""
    _check_alignment(traj, schedule)
    tol = cert_slack(traj.h_max) if tol is None else tol
    d = _primary_diameters(traj)
    checks, violations, ordering = [], [], []
    for seg in traj.segments:
        d_start = float(d[seg.i_start])
        d_end = float(d[seg.i_end])
        if seg.sign == GOOD:
            if seg.complete and d_end > d_start * (1.0 + tol):
                ordering.append(Violation(
                    "diameter must not grow across an attraction interval",
                    seg.t_end, d_end, d_start * (1.0 + tol),
                    d_end - d_start * (1.0 + tol)))
            continue
        if not seg.complete:
            continue  # right-endpoint anchor not recorded; nothing to certify
        inside = d[seg.i_start : seg.i_end + 1]
        worst = float(inside.max())
        if worst > d_end * (1.0 + tol):
            j = seg.i_start + int(np.argmax(inside))
            violations.append(Violation(
                "within-interval dominance by the right endpoint",
                float(traj.times[j]), worst, d_end * (1.0 + tol),
                worst - d_end * (1.0 + tol)))
        factor = growth_factor(K, seg.t_end - seg.t_start)
        bound = factor * d_start * (1.0 + tol)
        ok = d_end <= bound
        checks.append(IntervalCheck(seg.index, d_start, d_end, factor, ok,
                                    bound - d_end))
        if not ok:
            violations.append(Violation(
                "repulsion growth factor", seg.t_end, d_end, bound,
                d_end - bound))
        if d_end < d_start * (1.0 - tol):
            ordering.append(Violation(
                "diameter must not shrink across a repulsion interval",
                seg.t_end, d_end, d_start * (1.0 - tol),
                d_start * (1.0 - tol) - d_end))
    return GrowthReport(checks, violations, ordering,
                        not violations and not ordering)


def default_directions(d: int, n_random: int = 8, seed: int = 0) -> np.ndarray:
    """Coordinate axes plus seeded random unit vectors."""
    rng = np.random.default_rng(seed)
    dirs = [np.eye(d)]
    if n_random > 0:
        g = rng.normal(size=(n_random, d))
        g /= np.linalg.norm(g, axis=1)[:, None]
        dirs.append(g)
    return np.concatenate(dirs, axis=0)


@dataclass
class MaxPrincipleReport:
    violations: list
    n_directions: int
    target: str
    ok: bool

    def to_json(self) -> dict:
        return {"ok": self.ok, "target": self.target,
                "n_directions": self.n_directions,
                "violations": [v.to_json() for v in self.violations]}


def max_principle_certificate(traj: Trajectory, schedule: SwitchingSchedule,
                              directions: np.ndarray | None = None,
                              seed: int = 0,
                              tol: float | None = None) -> MaxPrincipleReport:
    """Directional hull spot-check.

    Attraction intervals anchor the hull at their left endpoint, repulsion
    intervals at their right endpoint.  Second-order runs check the
    velocity hulls (positions drift and obey no hull).  Violations are
    aggregated per sample: one record per offending sample time, carrying
    the worst exceedance.
    """
    _check_alignment(traj, schedule)
    tol = cert_slack(traj.h_max) if tol is None else tol
    arr = traj.velocities if traj.model == "CS" else traj.positions
    dims = arr.shape[2]
    dirs = default_directions(dims, seed=seed) if directions is None else \
        np.asarray(directions, dtype=float)
    violations = []
    for seg in traj.segments:
        if seg.sign == BAD and not seg.complete:
            continue  # anchor would be past the horizon
        anchor_idx = seg.i_start if seg.sign == GOOD else seg.i_end
        proj_anchor = arr[anchor_idx] @ dirs.T  # (N, n_dir)
        lo = proj_anchor.min(axis=0)
        hi = proj_anchor.max(axis=0)
        slack = tol * max(1.0, float(np.abs(proj_anchor).max()))
        proj = arr[seg.i_start : seg.i_end + 1] @ dirs.T  # (S, N, n_dir)
        over = np.maximum(proj - hi[None, None, :], lo[None, None, :] - proj)
        worst = over.max(axis=(1, 2))  # per sample
        for local in np.nonzero(worst > slack)[0]:
            j = seg.i_start + int(local)
            violations.append(Violation(
                "directional hull (%s)" % ("attraction, left anchor"
                                           if seg.sign == GOOD
                                           else "repulsion, right anchor"),
                float(traj.times[j]), float(worst[local]), slack,
                float(worst[local]) - slack))
    # The boundary sample belongs to two segments; if both flag it, keep one.
    seen, unique = set(), []
    for v in violations:
        if v.t not in seen:
            seen.add(v.t)
            unique.append(v)
    return MaxPrincipleReport(unique, len(dirs),
                              "velocities" if traj.model == "CS" else "positions",
                              not unique)


@dataclass
class BoundReport:
    max_abs_state: float
    state_bound: float
    state_ok: bool
    min_kernel_value: float | None
    kernel_floor: float | None
    kernel_ok: bool
    violations: list
    ok: bool

    def to_json(self) -> dict:
        return {"ok": self.ok, "max_abs_state": self.max_abs_state,
                "state_bound": self.state_bound, "state_ok": self.state_ok,
                "min_kernel_value": self.min_kernel_value,
                "kernel_floor": self.kernel_floor, "kernel_ok": self.kernel_ok,
                "violations": [v.to_json() for v in self.violations]}


def _pair_kernel_values(kernel: InfluenceKernel, snaps: np.ndarray) -> np.ndarray:
    """Min over agent pairs of the kernel value, per snapshot."""
    s, n, d = snaps.shape
    iu, ju = np.triu_indices(n, k=1)
    out = np.empty(s)
    step = max(1, int(2**21 // max(1, len(iu))))
    for i0 in range(0, s, step):
        blk = snaps[i0 : i0 + step]
        a = blk[:, iu, :]
        b = blk[:, ju, :]
        if kernel.form == RADIAL:
            r = np.sqrt(((a - b) ** 2).sum(-1))
            vals = kernel.eval(r)
        else:
            vals = kernel._raw_general(a, b)
            kernel._guard(vals)
        out[i0 : i0 + step] = np.asarray(vals).min(axis=-1)
    return out


def bound_certificates(traj: Trajectory, M0: float, psi0: float | None,
                       kernel: InfluenceKernel,
                       tol: float | None = None) -> BoundReport:
    """Uniform state bound and kernel floor along the whole run.

    The state bound applies to positions for first-order runs and to
    velocities for second-order runs (that is where the uniform bound
    theory lives); per attraction interval the anchored bound
    max_i |state_i(t)| <= max_i |state_i(interval start)| is also checked.
    The kernel floor is always evaluated on position pairs.
    """
    tol = cert_slack(traj.h_max) if tol is None else tol
    arr = traj.velocities if traj.model == "CS" else traj.positions
    norms = np.linalg.norm(arr, axis=2)  # (S, N)
    per_sample = norms.max(axis=1)
    violations = []
    max_abs = float(per_sample.max())
    state_ok = max_abs <= M0 * (1.0 + tol)
    if not state_ok:
        j = int(np.argmax(per_sample))
        violations.append(Violation("uniform state bound", float(traj.times[j]),
                                    max_abs, M0 * (1.0 + tol),
                                    max_abs - M0 * (1.0 + tol)))
    for seg in traj.segments:
        if seg.sign != GOOD:
            continue
        anchored = float(norms[seg.i_start].max())
        inside = per_sample[seg.i_start : seg.i_end + 1]
        worst = float(inside.max())
        if worst > anchored * (1.0 + tol):
            j = seg.i_start + int(np.argmax(inside))
            violations.append(Violation(
                "anchored state bound on attraction interval",
                float(traj.times[j]), worst, anchored * (1.0 + tol),
                worst - anchored * (1.0 + tol)))
    min_kernel = None
    kernel_ok = True
    if psi0 is not None:
        mins = _pair_kernel_values(kernel, traj.positions)
        min_kernel = float(mins.min())
        kernel_ok = min_kernel >= psi0 * (1.0 - tol)
        if not kernel_ok:
            j = int(np.argmin(mins))
            violations.append(Violation("kernel floor", float(traj.times[j]),
                                        min_kernel, psi0 * (1.0 - tol),
                                        psi0 * (1.0 - tol) - min_kernel))
    return BoundReport(max_abs, M0, state_ok, min_kernel, psi0, kernel_ok,
                       violations, state_ok and kernel_ok and
                       not violations)


@dataclass
class EnvelopeReport:
    gamma: float
    c: float
    T: float
    case: str
    violations: list
    ok: bool

    def to_json(self) -> dict:
        return {"ok": self.ok, "gamma": self.gamma, "c": self.c, "T": self.T,
                "case": self.case,
                "violations": [v.to_json() for v in self.violations]}


def envelope_certificate(traj: Trajectory, rate: ExpRateCert, K: float,
                         tol: float | None = None) -> EnvelopeReport:
    """Check d(t) <= exp(-gamma (t - ln2/K - T)) d(0) at every sample."""
    tol = cert_slack(traj.h_max) if tol is None else tol
    d = _primary_diameters(traj)
    offset = math.log(2.0) / K + rate.T
    env = np.exp(-rate.gamma * (traj.times - offset)) * d[0]
    bad = np.nonzero(d > env * (1.0 + tol))[0]
    violations = [
        Violation("exponential envelope", float(traj.times[j]), float(d[j]),
                  float(env[j] * (1.0 + tol)), float(d[j] - env[j] * (1.0 + tol)))
        for j in bad[:100]
    ]
    return EnvelopeReport(rate.gamma, rate.c, rate.T, rate.case, violations,
                          len(bad) == 0)


# ----------------------------------------------------------------------
# Second-order decay functional and flocking verdict.
# ----------------------------------------------------------------------


def _running_min_table(kernel: InfluenceKernel, r_hi: float, n: int = 4096):
    """Grid radii and the running minimum of the kernel over [0, r]."""
    radii = np.linspace(0.0, max(r_hi, 1e-12), n)
    vals = np.asarray(kernel.eval(radii), dtype=float)
    return radii, np.minimum.accumulate(vals)


def _interp_running_min(kernel, radii, table, r):
    if kernel.nonincreasing:
        return np.asarray(kernel.eval(np.asarray(r, dtype=float)), dtype=float)
    return np.interp(np.asarray(r, dtype=float), radii, table)


@dataclass
class LyapunovReport:
    T: float
    D: np.ndarray
    phi: np.ndarray
    L: np.ndarray
    monotone_ok: bool
    jump_ok: bool
    contraction_ok: bool
    violations: list
    interval_flags: list
    ok: bool
    phi_integrals: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"ok": self.ok, "T": self.T, "monotone_ok": self.monotone_ok,
                "jump_ok": self.jump_ok, "contraction_ok": self.contraction_ok,
                "interval_flags": self.interval_flags,
                "violations": [v.to_json() for v in self.violations]}


def lyapunov_series(traj: Trajectory, schedule: SwitchingSchedule,
                    kernel: InfluenceKernel, T: float,
                    tol: float = TOL_LYAP) -> LyapunovReport:
    """Evaluate the decay majorant D, the density phi, and the functional L.

    D follows the velocity diameter piecewise: on an attraction piece
    (a, b] it is (1 - int_a^t phi) d_V(a); on a repulsion piece it is
    (1 - int phi) d_V(b), anchored at the *right* endpoint.  phi(t) caps
    the running kernel minimum at e^{-KT}/T with discount e^{-KT}.  L adds
    the integral of the capped running minimum up to the running maximum
    of the position diameter.  Checks: L never increases inside an
    interval; jumps at switch times obey the growth factor (entering
    repulsion) and the 1/(1 - int phi) factor (entering attraction); and
    each attraction interval contracts d_V by at least (1 - int phi).

    All integrals are trapezoid sums on the recorded grid, so ``tol`` is
    looser than the endpoint certificates' slack.
    """
    if traj.velocities is None:
        raise MissingVelocities("the decay functional needs velocities")
    _check_alignment(traj, schedule)
    Kt = kernel.sup_norm
    if T <= math.log(2.0) / Kt:
        raise TIntervalViolation(
            "T=%.6g must exceed ln2/K = %.6g" % (T, math.log(2.0) / Kt))
    for seg in traj.segments:
        if seg.complete and seg.t_end - seg.t_start > T * (1.0 + 1e-12):
            raise TIntervalViolation(
                "interval %d has length %.6g > T=%.6g"
                % (seg.index, seg.t_end - seg.t_start, T))

    t = traj.times
    dX = position_diameters(traj)
    dV = velocity_diameters(traj)
    runmax = np.maximum.accumulate(dX)
    r_hi = float(runmax[-1])

    radii, min_table = _running_min_table(kernel, r_hi)
    disc = math.exp(-Kt * T)
    cap = disc / T
    psit = disc * _interp_running_min(kernel, radii, min_table, runmax)
    phi = np.minimum(psit, cap)

    # Cumulative integral of the capped running minimum in the radius
    # variable, evaluated at the running maximum of d_X.
    integrand = np.minimum(disc * min_table, cap)
    phi_radial_cum = np.concatenate(
        [[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(radii))])
    # positive integrand: the cumulative table starts at 0 and never drops
    assert phi_radial_cum[0] == 0.0 and np.all(np.diff(phi_radial_cum) >= 0.0)
    big_phi = np.interp(runmax, radii, phi_radial_cum)

    D = np.empty_like(dV)
    D[0] = dV[0]
    seg_phi_int = {}
    for seg in traj.segments:
        sl = slice(seg.i_start, seg.i_end + 1)
        tt, ff = t[sl], phi[sl]
        cum = np.concatenate(
            [[0.0], np.cumsum(0.5 * (ff[1:] + ff[:-1]) * np.diff(tt))])
        seg_phi_int[seg.index] = float(cum[-1])
        anchor = dV[seg.i_start] if seg.sign == GOOD else dV[seg.i_end]
        # Sample at the piece's left endpoint belongs to the previous piece.
        D[seg.i_start + 1 : seg.i_end + 1] = (1.0 - cum[1:]) * anchor

    L = D + big_phi
    ref = max(1.0, float(L.max()))
    slack = tol * ref
    violations = []
    interval_flags = []
    monotone_ok = jump_ok = contraction_ok = True

    for k, seg in enumerate(traj.segments):
        flags = {"index": seg.index, "sign": seg.sign,
                 "monotone": True, "jump": None, "contraction": None}
        lo = seg.i_start if k == 0 else seg.i_start + 1
        piece = L[lo : seg.i_end + 1]
        if len(piece) >= 2:
            diffs = np.diff(piece)
            worst = float(diffs.max())
            if worst > slack:
                j = lo + int(np.argmax(diffs)) + 1
                flags["monotone"] = False
                monotone_ok = False
                violations.append(Violation(
                    "functional must not increase inside an interval",
                    float(t[j]), float(L[j]), float(L[j - 1] + slack),
                    worst - slack))
        if k > 0:
            l_switch = float(L[seg.i_start])
            if seg.sign == BAD:
                factor = growth_factor(Kt, seg.t_end - seg.t_start) \
                    if seg.complete else None
            else:
                prev = traj.segments[k - 1]
                if prev.sign == BAD:
                    denom = 1.0 - seg_phi_int[prev.index]
                    factor = 1.0 / denom if denom > 0 else None
                else:
                    # Artificial boundary inside attraction (split
                    # schedules): the functional is continuous there.
                    factor = 1.0
            if factor is not None and len(piece):
                bound = factor * l_switch + slack
                worst = float(piece.max())
                ok = worst <= bound
                flags["jump"] = ok
                if not ok:
                    jump_ok = False
                    j = lo + int(np.argmax(piece))
                    violations.append(Violation(
                        "functional jump bound", float(t[j]), worst, bound,
                        worst - bound))
        if seg.sign == GOOD and seg.complete:
            lhs = float(dV[seg.i_end])
            rhs = (1.0 - seg_phi_int[seg.index]) * float(dV[seg.i_start]) + slack
            ok = lhs <= rhs
            flags["contraction"] = ok
            if not ok:
                contraction_ok = False
                violations.append(Violation(
                    "attraction must contract the velocity diameter by (1 - int phi)",
                    seg.t_end, lhs, rhs, lhs - rhs))
        interval_flags.append(flags)

    return LyapunovReport(
        T=T, D=D, phi=phi, L=L, monotone_ok=monotone_ok, jump_ok=jump_ok,
        contraction_ok=contraction_ok, violations=violations,
        interval_flags=interval_flags,
        ok=monotone_ok and jump_ok and contraction_ok,
        phi_integrals=seg_phi_int,
    )


@dataclass
class FlockingVerdict:
    dX_sup: float
    dV_initial: float
    dV_final: float
    flocked: bool
    psi_star: float
    phi_star: float
    d_star: float
    d_star_bound_ok: bool
    cycle_violations: list
    ok: bool

    def to_json(self) -> dict:
        return {"dX_sup": self.dX_sup, "dV_initial": self.dV_initial,
                "dV_final": self.dV_final, "flocked": self.flocked,
                "psi_star": self.psi_star, "phi_star": self.phi_star,
                "d_star": self.d_star, "d_star_bound_ok": self.d_star_bound_ok,
                "cycle_violations": [v.to_json() for v in self.cycle_violations],
                "ok": self.ok}


def flocking_detector(traj: Trajectory, kernel: InfluenceKernel,
                      schedule: SwitchingSchedule, eps_v: float,
                      T: float | None = None,
                      lyap: LyapunovReport | None = None,
                      tol: float = TOL_LYAP) -> FlockingVerdict:
    """Decide flocking at the horizon and certify the per-cycle decay.

    ``flocked`` means the final velocity diameter fell below
    eps_v * d_V(0).  The tail constants are the kernel minimum over the
    realized position-diameter range and its capped, discounted version;
    each complete cycle must satisfy
    d_V(cycle end) <= G * (1 - phi_star * good_len) * d_V(cycle start).
    The a-priori bound on sup d_X uses the realized finite product of
    per-cycle functional factors (the full series may diverge for
    constant-length schedules; the product up to the horizon is still a
    valid bound there).
    """
    if traj.velocities is None:
        raise MissingVelocities("flocking is a second-order notion")
    dX = position_diameters(traj)
    dV = velocity_diameters(traj)
    dX_sup = float(dX.max())
    dV0 = float(dV[0])
    dV_final = float(dV[-1])
    flocked = dV_final <= eps_v * dV0 if dV0 > 0 else True

    Kt = kernel.sup_norm
    if T is None:
        T = max((s.t_end - s.t_start) for s in traj.segments) \
            if traj.segments else math.log(2.0) / Kt * 1.5
    if lyap is None:
        lyap = lyapunov_series(traj, schedule, kernel, T, tol=tol)

    psi_star = running_min(kernel, dX_sup,
                           grid_step=max(dX_sup, 1e-9) * 1e-3)
    disc = math.exp(-Kt * T)
    phi_star = min(disc * psi_star, disc / T)

    # Per-cycle velocity decay with the tail constants.
    violations = []
    segs = traj.segments
    slack_ref = max(1.0, dV0)
    for k, seg in enumerate(segs):
        if seg.sign != GOOD or not seg.complete:
            continue
        if k + 1 >= len(segs):
            continue
        nxt = segs[k + 1]
        if nxt.sign != BAD or not nxt.complete:
            continue
        g_len = seg.t_end - seg.t_start
        factor = growth_factor(Kt, nxt.t_end - nxt.t_start) * \
            (1.0 - phi_star * g_len)
        lhs = float(dV[nxt.i_end])
        rhs = factor * float(dV[seg.i_start]) + tol * slack_ref
        if lhs > rhs:
            violations.append(Violation(
                "per-cycle velocity decay with tail constants",
                nxt.t_end, lhs, rhs, lhs - rhs))

    # A-priori bound on the position diameter: the radial integral of the
    # capped kernel floor, evaluated at dX_sup, must stay below the
    # realized product bound C on the functional.
    c_bound = _functional_product_bound(traj, lyap, Kt)
    big_phi_at_sup = _radial_floor_integral(kernel, dX_sup, disc, disc / T)
    d_star_bound_ok = big_phi_at_sup <= c_bound * (1.0 + tol)
    d_star = _invert_radial_floor_integral(kernel, c_bound, disc, disc / T,
                                           start=max(dX_sup, 1.0))

    return FlockingVerdict(
        dX_sup=dX_sup, dV_initial=dV0, dV_final=dV_final, flocked=flocked,
        psi_star=psi_star, phi_star=phi_star, d_star=d_star,
        d_star_bound_ok=d_star_bound_ok, cycle_violations=violations,
        ok=flocked and d_star_bound_ok and not violations,
    )


def _radial_floor_integral(kernel, r, disc, cap, n=4096):
    radii, table = _running_min_table(kernel, r, n)
    integrand = np.minimum(disc * table, cap)
    return float(np.trapezoid(integrand, radii))


def _invert_radial_floor_integral(kernel, target, disc, cap, start,
                                  max_radius=1e15):
    """Smallest radius whose capped-floor integral reaches ``target``."""
    r = max(start, 1.0)
    val = _radial_floor_integral(kernel, r, disc, cap)
    while val < target and r < max_radius:
        r *= 4.0
        val = _radial_floor_integral(kernel, r, disc, cap)
    if val < target:
        return math.inf
    lo, hi = 0.0, r
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _radial_floor_integral(kernel, mid, disc, cap) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def _functional_product_bound(traj: Trajectory, lyap: LyapunovReport,
                              Kt: float) -> float:
    """Realized product bound on the functional, following its jump chain."""
    segs = traj.segments
    L = lyap.L
    # Anchor at the end of the first complete repulsion interval if there
    # is one; a purely attractive run has a non-increasing functional.
    anchor_val = float(L[0])
    anchor_k = -1
    for k, seg in enumerate(segs):
        if seg.sign == BAD and seg.complete:
            anchor_val = float(L[seg.i_end])
            anchor_k = k
            break
    if anchor_k < 0:
        return float(L.max())
    bound = anchor_val
    prev_sign = BAD
    prev_bad_int = lyap.phi_integrals.get(segs[anchor_k].index, 0.0)
    k = anchor_k + 1
    while k < len(segs):
        seg = segs[k]
        if seg.sign == GOOD:
            if prev_sign == BAD:
                bound /= 1.0 - prev_bad_int
        else:
            # The clipped length covers a truncated trailing interval too:
            # the amplification up to the last recorded sample is what the
            # bound must dominate.
            bound *= growth_factor(Kt, seg.t_end - seg.t_start)
            prev_bad_int = lyap.phi_integrals.get(seg.index, 0.0)
        prev_sign = seg.sign
        k += 1
    return bound
