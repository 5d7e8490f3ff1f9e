"""Numerical toolkit for linear and nonlinear dynamic equations on time scales."""

from __future__ import annotations

__version__ = "0.1.0"

from .bocher import (
    ConditionReport,
    TailLadder,
    Transform,
    check_ominus_variant,
    check_order_k,
    check_theorem1,
    higher_transform,
    tail_matrix,
    transform_residual,
    wintner_transform,
)
from .calculus import (
    Convergence,
    ConvergenceVerdict,
    MatrixSignal,
    Tolerances,
    delta_integral,
    exp_matrix,
    exp_scalar,
    improper_delta_integral,
    ominus,
    regressivity_check,
)
from .errors import *  # noqa: F401,F403
from .oscillator import OscillatorSpec, oscillator_reduce, run_oscillator
from .solver import (
    ClassS,
    ClassSVerdict,
    NonlinearField,
    Trajectory,
    advance_nonlinear,
    fundamental_matrix,
    gronwall_envelope,
    gronwall_lower,
    limit_estimate,
    solve_linear,
    solve_nonlinear,
    theorem4_gate,
)
from .timescale import (
    Grid,
    GridSpec,
    Interval,
    Point,
    TimeScale,
    doubling_schedule,
    explicit,
    from_description,
    geometric,
    integers,
    lattice,
    reals,
)
