"""Consensus and flocking under alternating attraction-repulsion.

Simulates first-order opinion dynamics and second-order flocking whose
pairwise coupling sign flips between +1 (attraction) and -1 (repulsion)
on a prescribed interval sequence, and numerically certifies the
quantitative bounds that make the long-run behaviour provable: interval
admissibility, per-interval contraction and growth factors, uniform state
bounds, exponential consensus envelopes, and a decay functional for the
flocking regime.

The O(N^2 d) pairwise loops run on a compiled core when the extension was
built (``switchflock.pairwise.backend()`` tells you which); semantics are
identical to the NumPy fallback.
"""

from . import pairwise
from .diagnostics import (
    bound_certificates,
    cert_slack,
    contraction_certificate,
    diameter,
    envelope_certificate,
    flocking_detector,
    growth_certificate,
    lyapunov_series,
    max_principle_certificate,
    position_diameters,
    velocity_diameters,
)
from .dynamics import CS, HK, ModelSpec, SystemState, cs_rhs, hk_rhs
from .integrator import Trajectory, integrate, step_rk4
from .kernels import (
    InfluenceKernel,
    KernelLowerBound,
    bump_kernel,
    constant_kernel,
    gaussian_kernel,
    general_gaussian_kernel,
    lower_bound_on_ball,
    make_kernel,
    rational_kernel,
    running_min,
    sup_norm_check,
)
from .oracle import (
    SignedArea,
    fine_euler_reference,
    two_agent_cs,
    two_agent_cs_position_gap,
    two_agent_hk,
)
from .schedule import (
    ExpRateCert,
    ScheduleValidation,
    SwitchingSchedule,
    constant_lengths,
    contraction_factor,
    default_split_length,
    exp_rate,
    explicit_schedule,
    geometric_bad,
    growth_factor,
    uniform_bound,
    validate,
)

__version__ = "0.1.0"
