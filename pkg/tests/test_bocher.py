from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _support import unit_frobenius
from tempus import systems
from tempus.bocher import (
    TailLadder,
    check_ominus_variant,
    check_order_k,
    check_theorem1,
    higher_transform,
    tail_matrix,
    transform_residual,
    wintner_transform,
)
from tempus.calculus import Convergence
from tempus.errors import NoValidityWindow, PrerequisiteNotConvergent
from tempus.solver import ClassS, fundamental_matrix, limit_estimate
from tempus.timescale import GridSpec, integers, lattice, reals

Z = integers()
HS = [2.0**k for k in range(5, 13)]


def alternating(c=0.5, n=2):
    return systems.alternating_harmonic(c * np.eye(n))


class TestConditions:
    def test_zero_system(self):
        rep = check_order_k(Z, systems.zero(2), 0.0, 2, HS)
        assert rep.implied_class_s == "Yes"
        assert rep.first_absolute_order == 1
        assert np.all(rep.orders_convergent[0][1].limit == 0)

    def test_geometric_decay(self):
        sig = systems.exponential_decay(np.array([[0.3, -0.2], [0.1, 0.4]]), math.log(2.0))
        rep = check_theorem1(Z, sig, 0.0, HS)
        assert rep.implied_class_s == "Yes"
        assert rep.orders_convergent[0][1].kind is Convergence.ABSOLUTE

    def test_alternating_needs_order_two(self):
        sig = alternating()
        assert check_theorem1(Z, sig, 0.0, HS).implied_class_s == "NotImplied"
        rep = check_order_k(Z, sig, 0.0, 2, HS)
        assert [v.kind for _, v in rep.orders_convergent] == [Convergence.CONDITIONAL, Convergence.ABSOLUTE]
        assert rep.first_absolute_order == 2
        assert rep.implied_class_s == "Yes"

    def test_continuous_decay(self):
        sig = systems.decay(np.array([[0.2, 0.5], [-0.5, 0.2]]), 2.0)
        hs = [2.0**k for k in range(0, 8)]
        rep = check_theorem1(reals(), sig, 0.0, hs, GridSpec(hs[-1], h_max=0.05))
        assert rep.implied_class_s == "Yes"

    def test_harmonic_diverges(self):
        rep = check_order_k(Z, systems.decay(0.7 * np.eye(2), 1.0), 0.0, 3, HS)
        assert rep.implied_class_s == "NotImplied"
        assert [v.kind for _, v in rep.orders_convergent] == [Convergence.DIVERGENT]

    def test_report_record(self):
        rec = check_order_k(Z, alternating(), 0.0, 2, HS, include_ominus=True).to_record()
        assert rec["implied_class_s"] == "Yes"
        assert [o["order"] for o in rec["orders"]] == [1, 2]
        assert rec["ominus_variant"]["kind"] == "AbsolutelyConvergent"

    def test_k_max_validated(self):
        with pytest.raises(ValueError):
            check_order_k(Z, systems.zero(1), 0.0, 0, HS)


class TestOminusVariant:
    def test_zero(self):
        assert check_ominus_variant(Z, systems.zero(2), 0.0, HS).kind is Convergence.ABSOLUTE

    def test_alternating_matches_order_two(self):
        sig = alternating()
        variant = check_ominus_variant(Z, sig, 0.0, HS)
        order2 = check_order_k(Z, sig, 0.0, 2, HS).orders_convergent[1][1]
        assert variant.kind is order2.kind

    def test_divergent_inner_integral(self):
        assert check_ominus_variant(Z, systems.decay(0.5 * np.eye(1), 1.0), 0.0, HS).kind is Convergence.DIVERGENT


class TestTails:
    def test_geometric_tail_closed_form(self):
        # A(n) = 2^(-n-1), so Y1(n) = -2^(-n)
        sig = systems.exponential_decay(np.array([[0.5]]), math.log(2.0))
        y1 = tail_matrix(Z, sig, 1, 64.0).values[:, 0, 0]
        n = np.arange(65.0)
        np.testing.assert_allclose(y1, -(2.0**-n), rtol=1e-9, atol=1e-14)

    def test_tails_decay(self):
        sig = systems.decay(unit_frobenius(np.random.default_rng(3), 2), 2.0)
        ladder = TailLadder(Z, sig, 0.0, 4096.0, schedule=HS)
        for j in (1, 2):
            y = np.linalg.norm(ladder.Y(j), axis=(1, 2))
            assert y[1024] < y[64] < y[4]

    def test_eval_inside_interval(self):
        sig = systems.decay(np.eye(1), 2.0)
        hs = [2.0**k for k in range(0, 8)]
        ladder = TailLadder(reals(), sig, 0.0, hs[-1], GridSpec(hs[-1], h_max=0.05), schedule=hs)
        # Y1(t) = -1/(1+t), up to the O(h^2) trapezoid error
        assert ladder.eval(1, 0.37)[0, 0] == pytest.approx(-1.0 / 1.37, rel=1e-3)

    def test_prerequisite_not_convergent(self):
        sig = systems.decay(np.eye(2), 1.0)
        ladder = TailLadder(Z, sig, 0.0, 4096.0, schedule=HS)
        with pytest.raises(PrerequisiteNotConvergent):
            ladder.Y(1)
        with pytest.raises(PrerequisiteNotConvergent):
            tail_matrix(Z, sig, 2, 4096.0, ladder=ladder)
        with pytest.raises(PrerequisiteNotConvergent):
            higher_transform(Z, sig, 1, 4096.0, ladder=ladder)


class TestTransforms:
    def test_zero_system(self):
        tr = wintner_transform(Z, systems.zero(2), 64.0)
        assert tr.t_star == 0.0
        assert np.all(tr.B_values[:-1] == 0)
        assert np.array_equal(tr.backmap(17.0), np.eye(2))

    def test_order_one_is_wintner(self):
        sig = alternating()
        ladder = TailLadder(Z, sig, 0.0, 4096.0, schedule=HS)
        a = higher_transform(Z, sig, 1, 4096.0, ladder=ladder)
        b = wintner_transform(Z, sig, 4096.0, ladder=ladder)
        assert a.t_star == b.t_star
        np.testing.assert_array_equal(a.B_values, b.B_values)

    def test_closed_form_coefficient(self):
        sig = systems.exponential_decay(np.array([[0.5]]), math.log(2.0))
        tr = wintner_transform(Z, sig, 64.0)
        # |Y1(sigma(0))| sits on the 0.5 threshold, so compare from n = 1
        n = np.arange(1.0, 40.0)
        expected = 2.0 ** (-n - 1) * -(2.0**-n) / (1.0 - 2.0 ** (-n - 1))
        # Y1 is exact to ~1e-15 absolute, and B inherits that error times A(n)
        assert np.all(np.abs(tr.B_values[1:40, 0, 0] - expected) <= 1e-14 * 2.0 ** (-n - 1))

    @pytest.mark.parametrize("k", [1, 2])
    def test_backmap_identity(self, k):
        sig = alternating(0.4, 3)
        tr = higher_transform(Z, sig, k, 4096.0, ladder=TailLadder(Z, sig, 0.0, 4096.0, schedule=HS))
        assert transform_residual(tr, sig).max_residual < 1e-10

    def test_unshifted_factor_breaks_identity(self):
        sig = alternating(0.4, 2)
        ladder = TailLadder(Z, sig, 0.0, 4096.0, schedule=HS)
        good = transform_residual(wintner_transform(Z, sig, 4096.0, ladder=ladder), sig).max_residual
        bad = transform_residual(wintner_transform(Z, sig, 4096.0, unshifted=True, ladder=ladder), sig).max_residual
        assert good < 1e-10
        assert bad > 1e-4

    def test_no_validity_window(self):
        sig = systems.decay(0.5 * np.eye(2), 2.0)
        with pytest.raises(NoValidityWindow):
            higher_transform(Z, sig, 1, 64.0, threshold=1e-6)

    def test_transformed_coefficient_summable(self):
        sig = alternating(0.5, 2)
        tr = higher_transform(Z, sig, 1, 4096.0, ladder=TailLadder(Z, sig, 0.0, 4096.0, schedule=HS))
        hs = [h for h in HS if h > tr.t_star and h < 4096]
        assert check_theorem1(Z, tr.B, tr.t_star, hs, GridSpec(hs[-1])).implied_class_s == "Yes"


def test_lattice_agrees_with_reals():
    sig = systems.decay(np.eye(1), 2.0)
    hs = [2.0**k for k in range(0, 9)]
    exact = -1.0  # Y1(0) on the reals
    errs = []
    for h in (0.1, 0.05):
        y = tail_matrix(lattice(h), sig, 1, hs[-1], GridSpec(hs[-1]), a=0.0).values[0, 0, 0]
        errs.append(abs(y - exact))
    r = tail_matrix(reals(), sig, 1, hs[-1], GridSpec(hs[-1], h_max=0.05), a=0.0).values[0, 0, 0]
    assert abs(r - exact) < 1e-3  # trapezoid, O(h^2)
    assert errs[0] <= 0.1 and errs[1] <= 0.05
    assert errs[1] < 0.6 * errs[0]


# ---------------------------------------------------------------------------
# cross-validation against the fundamental matrix


@settings(max_examples=12, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    family=st.sampled_from(["decay", "alternating", "geometric"]),
    n=st.integers(1, 3),
    c=st.floats(0.05, 0.45),
)
def test_implied_class_s_is_never_contradicted(seed, family, n, c):
    m = c * unit_frobenius(np.random.default_rng(seed), n)
    sig = {
        "decay": lambda: systems.decay(m, 2.0),
        "alternating": lambda: systems.alternating_harmonic(m),
        "geometric": lambda: systems.exponential_decay(m, math.log(2.0)),
    }[family]()
    rep = check_order_k(Z, sig, 0.0, 2, HS)
    if rep.implied_class_s == "Yes":
        cls = limit_estimate(fundamental_matrix(Z, sig, 0.0, GridSpec(HS[-1])), HS)
        assert cls.verdict is not ClassS.NOT_CLASS_S
