from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _support import sequence_signal, summable_system
from tempus import systems
from tempus.calculus import MatrixSignal, norm_signal
from tempus.errors import DimensionMismatch, DomainEscape, NotRegressive, ScheduleTooShort
from tempus.solver import (
    ClassS,
    NonlinearField,
    advance_nonlinear,
    classify_limit,
    fundamental_matrix,
    gronwall_envelope,
    gronwall_envelope_path,
    gronwall_lower,
    gronwall_lower_path,
    limit_estimate,
    solve_linear,
    solve_nonlinear,
    theorem4_gate,
)
from tempus.timescale import GridSpec, Interval, Point, explicit, integers, reals

Z = integers()
SCHED = [2.0**k for k in range(5, 15)]


def scalar(fn):
    return MatrixSignal.scalar(fn, vectorized=True)


def sine_recursion(x0: float, n: int) -> float:
    """Plain loop for x(k+1) = x(k) + (k+1)^-2 sin x(k)."""
    x = x0
    for k in range(n):
        x = x + (k + 1.0) ** -2 * math.sin(x)
    return x


class TestLinear:
    def test_zero_system(self):
        traj = solve_linear(Z, systems.zero(2), [1.0, 2.0], 0, GridSpec(50))
        assert np.all(traj.values == [1.0, 2.0])

    def test_product_oracle(self):
        traj = solve_linear(Z, scalar(lambda n: 2.0 ** (-n - 1)), [1.0], 0, GridSpec(30))
        oracle = math.prod(1 + 2.0 ** (-n - 1) for n in range(30))
        assert traj.values[-1, 0] == pytest.approx(oracle, rel=1e-15)

    def test_continuous_decay(self):
        traj = solve_linear(reals(), MatrixSignal.constant([[-1.0]]), [1.0], 0, GridSpec(1, 1e-2))
        assert traj.values[-1, 0] == pytest.approx(math.exp(-1), rel=1e-8)

    def test_fundamental_identity_path(self):
        fm = fundamental_matrix(Z, systems.zero(3), 0, GridSpec(10))
        assert np.all(fm.values == np.eye(3))

    def test_fundamental_diagonal(self):
        rng = np.random.default_rng(2)
        d = rng.uniform(-0.5, 0.5, (21, 2))
        fm = fundamental_matrix(Z, sequence_signal(np.stack([np.diag(r) for r in d])), 0, GridSpec(20))
        oracle = np.cumprod(np.vstack([np.ones(2), 1 + d[:20]]), axis=0)
        assert np.allclose(np.diagonal(fm.values, axis1=1, axis2=2), oracle, rtol=1e-14)
        assert np.all(fm.values[:, 0, 1] == 0)

    def test_finite_support(self):
        fm = fundamental_matrix(Z, scalar(lambda n: np.where(n < 3, 1.0, 0.0)), 0, GridSpec(10))
        assert np.all(fm.values[3:, 0, 0] == 8.0)

    def test_shape_errors(self):
        with pytest.raises(DimensionMismatch):
            solve_linear(Z, systems.zero(2), [1.0, 2.0, 3.0], 0, GridSpec(5))

    def test_csv(self):
        traj = solve_linear(Z, systems.zero(2), [1.0, 1.0 / 3.0], 0, GridSpec(2))
        lines = traj.to_csv().splitlines()
        assert lines[0] == "t,component_0,component_1"
        assert lines[1] == "0,1,0.33333333333333331"
        fm = fundamental_matrix(Z, systems.zero(2), 0, GridSpec(2))
        assert fm.header() == ["t", "X_00", "X_01", "X_10", "X_11"]


class TestLimits:
    def test_zero_system(self):
        v = limit_estimate(fundamental_matrix(Z, systems.zero(2), 0, GridSpec(64)), [16, 32, 64])
        assert v.verdict is ClassS.CLASS_S
        assert np.all(v.limit == np.eye(2)) and all(r == 0 for r in v.cauchy_residuals)

    def test_geometric_diagonal(self):
        sig = MatrixSignal(2, lambda n: 2.0 ** -np.asarray(n)[:, None, None] * np.eye(2), vectorized=True)
        v = limit_estimate(fundamental_matrix(Z, sig, 0, GridSpec(64)), [8, 16, 32, 64])
        oracle = math.prod(1 + 2.0**-n for n in range(64))
        assert v.verdict is ClassS.CLASS_S
        assert np.allclose(v.limit, oracle * np.eye(2), rtol=1e-14)

    def test_growth(self):
        v = limit_estimate(fundamental_matrix(Z, MatrixSignal.constant(np.eye(1)), 0, GridSpec(64)), [8, 16, 32, 64])
        assert v.verdict is ClassS.NOT_CLASS_S

    def test_singular_limit(self):
        # A = diag(0, -1) annihilates the second column at n = 0
        with pytest.raises(NotRegressive):
            fundamental_matrix(Z, MatrixSignal.constant(np.diag([0.0, -1.0])), 0, GridSpec(8))
        vals = [np.diag([1.0, 0.0])] * 4
        assert classify_limit([1, 2, 4, 8], vals).verdict is ClassS.NOT_CLASS_S

    def test_vector_zero_solution(self):
        traj = solve_linear(Z, systems.zero(2), [0.0, 0.0], 0, GridSpec(16))
        assert limit_estimate(traj, [4, 8, 16]).verdict is ClassS.CLASS_S

    def test_short_schedule(self):
        with pytest.raises(ScheduleTooShort):
            limit_estimate(fundamental_matrix(Z, systems.zero(1), 0, GridSpec(8)), [4, 8])


class TestGronwall:
    def test_envelope_examples(self):
        assert gronwall_envelope(Z, scalar(lambda t: np.zeros_like(t)), 3.0, 0, 10) == 3.0
        assert gronwall_envelope(Z, scalar(lambda t: np.ones_like(t)), 1.0, 0, 4) == 16.0
        k = scalar(lambda n: (n + 1.0) ** -2)
        oracle = 2 * math.prod(1 + (n + 1.0) ** -2 for n in range(100))
        assert gronwall_envelope(Z, k, 2.0, 0, 100) == pytest.approx(oracle, rel=1e-14)

    def test_lower_examples(self):
        zero = scalar(lambda t: np.zeros_like(t))
        one = scalar(lambda t: np.ones_like(t))
        assert gronwall_lower(Z, zero, 5.0, 0, 9) == 5.0
        assert gronwall_lower(Z, one, 8.0, 3, 5, form="inverse") == 2.0
        # 1 - mu |A| = 0 on every step: the safe bound collapses
        assert gronwall_lower(Z, one, 8.0, 3, 5) == 0.0

    def test_lower_uniform_for_summable(self):
        k = scalar(lambda n: (n + 1.0) ** -2)
        lows = [gronwall_lower(Z, k, 1.0, 1, t) for t in (10, 100, 1000, 4000)]
        # prod_{n>=1} (1 - (n+1)^-2) = 1/2
        assert all(b <= a for a, b in zip(lows, lows[1:]))
        assert lows[-1] > 0.5

    def test_inverse_form_can_exceed_solution(self):
        a = MatrixSignal.constant([[-0.9]])
        x = solve_linear(Z, a, [1.0], 0, GridSpec(1)).values[-1, 0]
        assert gronwall_lower(Z, norm_signal(a), 1.0, 0, 1, form="inverse") > abs(x)
        assert gronwall_lower(Z, norm_signal(a), 1.0, 0, 1) <= abs(x)

    def test_forms_agree_on_reals(self):
        k = scalar(lambda t: 1.0 / (1.0 + np.asarray(t)) ** 2)
        spec = GridSpec(5, 1e-2)
        safe = gronwall_lower(reals(), k, 1.0, 0, 5, spec)
        inverse = gronwall_lower(reals(), k, 1.0, 0, 5, spec, form="inverse")
        assert safe == pytest.approx(inverse, rel=1e-9)
        assert safe == pytest.approx(math.exp(-(1 - 1 / 6)), rel=1e-9)


class TestNonlinear:
    def test_zero_field(self):
        f = NonlinearField(2, lambda t, x: np.zeros_like(x), scalar(lambda t: np.zeros_like(t)))
        traj = solve_nonlinear(Z, f, [0.3, -0.2], 0, GridSpec(20))
        assert np.all(traj.values == [0.3, -0.2])

    def test_reduces_to_linear(self):
        f = NonlinearField(1, lambda t, x: 2.0 ** (-t - 1) * x, scalar(lambda t: 2.0 ** (-np.asarray(t) - 1)))
        got = solve_nonlinear(Z, f, [1.0], 0, GridSpec(30)).values[:, 0]
        lin = solve_linear(Z, scalar(lambda n: 2.0 ** (-n - 1)), [1.0], 0, GridSpec(30)).values[:, 0]
        assert np.array_equal(got, lin)

    def test_sine_limit(self):
        f = systems.sine_field(1, 2.0, 1.0)
        traj = solve_nonlinear(Z, f, [0.1], 0, GridSpec(4096))
        assert traj.values[-1, 0] == pytest.approx(sine_recursion(0.1, 4096), abs=1e-15)
        v = limit_estimate(traj, [2.0**k for k in range(5, 13)])
        assert v.verdict is ClassS.CLASS_S and v.limit[0] > 0.36

    def test_advance_matches_solve(self):
        f = systems.sine_field(2, 2.0, 1.0)
        hs = [64.0, 1000.0, 4096.0]
        fast = advance_nonlinear(Z, f, [0.06, 0.08], 0, hs, chunk=512)
        slow = solve_nonlinear(Z, f, [0.06, 0.08], 0, GridSpec(4096))
        assert np.allclose(fast, [slow.at(h) for h in hs], rtol=1e-14, atol=0)

    def test_advance_mixed_scale(self):
        ts = explicit([Interval(0.0, 1.0), Point(2.0), Point(3.5)], period=4.0)
        f = systems.sine_field(1, 2.0, 1.0, jit=False)
        spec = GridSpec(40, 0.05)
        fast = advance_nonlinear(ts, f, [0.2], 0, [8.0, 40.0], spec)
        slow = solve_nonlinear(ts, f, [0.2], 0, spec)
        assert np.allclose(fast[:, 0], [slow.at(8.0)[0], slow.at(40.0)[0]], rtol=1e-14)

    def test_domain_escape(self):
        f = NonlinearField(1, lambda t, x: x, scalar(lambda t: np.ones_like(t)), delta_bound=10.0)
        with pytest.raises(DomainEscape):
            solve_nonlinear(Z, f, [1.0], 0, GridSpec(10))

    def test_gate_examples(self):
        zero = scalar(lambda t: np.zeros_like(t))
        assert theorem4_gate(Z, zero, 0.5, 1.0, 0, [1, 2, 4, 8]) == (True, 0.5)
        ok, sup = theorem4_gate(Z, scalar(lambda n: (n + 1.0) ** -2), 0.1, 1.0, 0, SCHED)
        assert ok and sup == pytest.approx(0.1 * math.prod(1 + (n + 1.0) ** -2 for n in range(int(SCHED[-1]))))
        assert theorem4_gate(Z, scalar(lambda t: np.ones_like(t)), 1.0, 10.0, 0, [1, 2, 4, 8, 16])[0] is False


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_envelope_sandwich(seed):
    rng = np.random.default_rng(seed)
    sig, _, n = summable_system(rng, 512)
    x0 = rng.standard_normal(n)
    spec = GridSpec(512)
    norms = solve_linear(Z, sig, x0, 0, spec).norms()
    x0n = float(np.linalg.norm(x0))
    _, up = gronwall_envelope_path(Z, norm_signal(sig), x0n, 0, spec)
    _, lo = gronwall_lower_path(Z, norm_signal(sig), x0n, 0, spec)
    assert np.all(norms <= up * (1 + 1e-10)) and np.all(norms >= lo * (1 - 1e-10))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), t1=st.integers(0, 200), t2=st.integers(201, 512))
def test_cauchy_tail_bound(seed, t1, t2):
    rng = np.random.default_rng(seed)
    sig, _, n = summable_system(rng, 512)
    traj = solve_linear(Z, sig, rng.standard_normal(n), 0, GridSpec(512))
    weights = np.linalg.norm(sig.sample(traj.t), axis=(1, 2)) * traj.norms()
    bound = float(np.sum(weights[t1:t2]))
    assert np.linalg.norm(traj.at(t2) - traj.at(t1)) <= bound * (1 + 1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_columns_match_unit_solves(seed):
    rng = np.random.default_rng(seed)
    sig, _, n = summable_system(rng, 256)
    fm = fundamental_matrix(Z, sig, 0, GridSpec(256))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        assert np.array_equal(fm.values[:, :, j], solve_linear(Z, sig, e, 0, GridSpec(256)).values)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), alpha=st.floats(-3, 3), beta=st.floats(-3, 3))
def test_linearity(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    sig, _, n = summable_system(rng, 256)
    x, y = rng.standard_normal(n), rng.standard_normal(n)
    spec = GridSpec(256)
    lhs = solve_linear(Z, sig, alpha * x + beta * y, 0, spec).values
    rhs = alpha * solve_linear(Z, sig, x, 0, spec).values + beta * solve_linear(Z, sig, y, 0, spec).values
    scale = np.max(np.abs(lhs)) + np.max(np.abs(rhs)) + 1e-300
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_nonvanishing_limit(seed):
    rng = np.random.default_rng(seed)
    sig, _, n = summable_system(rng, int(SCHED[-1]))
    x0 = rng.standard_normal(n)
    traj = solve_linear(Z, sig, x0, 0, GridSpec(SCHED[-1]))
    v = limit_estimate(traj, SCHED)
    s = 1.0
    lower = gronwall_lower(Z, norm_signal(sig), float(np.linalg.norm(traj.at(s))), s, SCHED[-1])
    # random signs make single residuals noisy, so Inconclusive is allowed here
    assert v.verdict is not ClassS.NOT_CLASS_S
    assert np.linalg.norm(v.limit) >= lower * (1 - 1e-10) > 0
