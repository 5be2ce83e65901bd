"""Tests for the model family: closed-form solution, branches, monodromy."""

import cmath
import math

import numpy as np
import pytest

from confluence.model import (
    BranchSpec,
    UndefinedOperatorError,
    branch_value,
    continue_logs,
    e_chi,
    equilibria,
    formal_monodromy,
    model_fundamental_matrix,
    standard_path,
    torus_action,
)
from confluence.normalform import formal_invariant
from test_normalform import manufactured_family


CHI = (0.7 + 0.1j, -0.3 + 0.05j)  # plain (chi0, chi1) values for most tests


class TestContinuedLogs:
    def test_principal_at_single_point(self):
        (w,) = continue_logs([0.0], [1.0 + 1.0j])
        assert abs(w - cmath.log(1.0 + 1.0j)) < 1e-15

    def test_full_loop_adds_winding(self):
        # square loop around the origin, counterclockwise
        loop = [1, 1j, -1, -1j, 1]
        (w,) = continue_logs([0.0], loop)
        assert abs(w - (0.0 + 2j * math.pi)) < 1e-14

    def test_loop_not_around_anchor(self):
        loop = [1, 1j, -1, -1j, 1]
        (w,) = continue_logs([3.0], loop)
        assert abs(w - cmath.log(1 - 3.0)) < 1e-14

    def test_through_anchor_raises(self):
        with pytest.raises(ValueError):
            continue_logs([0.5], [0.0 + 1e-320j, 1.0])
        with pytest.raises(ValueError):
            continue_logs([0.5], [0.0, 1.0])


class TestStandardPath:
    def test_right_targets_shared(self):
        base = 0.25
        target = 0.2 - 0.1j
        up = standard_path(base, target, "upper")
        lo = standard_path(base, target, "lower")
        assert np.allclose(up, lo)

    def test_left_targets_differ_by_loop(self):
        base = 0.25
        target = -0.2 + 0.0j
        up = standard_path(base, target, "upper")
        lo = standard_path(base, target, "lower")
        (wu,) = continue_logs([0.0], up)
        (wl,) = continue_logs([0.0], lo)
        assert abs((wu - wl) - 2j * math.pi) < 1e-13

    def test_bad_sheet(self):
        with pytest.raises(ValueError):
            standard_path(0.25, -0.2, "sideways")


class TestModelSolution:
    def test_solves_the_ode(self):
        # numeric derivative of E along a short segment vs chi * E / (x(x-eps))
        eps = 0.04 + 0.01j
        h = 0.0
        x = 0.3 + 0.2j
        d = 1e-6
        c0, c1 = CHI
        vals = [e_chi(CHI, h, eps, [0.25, x + t * d]) for t in (-1, 0, 1)]
        deriv = (vals[2] - vals[0]) / (2 * d)
        chi_x = c0 + x * c1
        rhs = chi_x * vals[1] / (x * (x - eps))
        assert abs(deriv - rhs) / abs(rhs) < 1e-7

    def test_solves_the_ode_at_eps_zero(self):
        h = 0.0
        x = 0.2 - 0.15j
        d = 1e-6
        c0, c1 = CHI
        vals = [e_chi(CHI, h, 0.0, [0.25, x + t * d]) for t in (-1, 0, 1)]
        deriv = (vals[2] - vals[0]) / (2 * d)
        rhs = (c0 + x * c1) * vals[1] / (x * x)
        assert abs(deriv - rhs) / abs(rhs) < 1e-6

    def test_principal_value_at_base(self):
        eps = 0.03
        val = e_chi(CHI, 0.0, eps, 0.25)
        c0, c1 = CHI
        ref = cmath.exp(
            -(c0 / eps) * cmath.log(0.25) + (c0 / eps + c1) * cmath.log(0.25 - eps)
        )
        assert abs(val - ref) < 1e-12 * abs(ref)

    def test_branch_coherence(self):
        # left values on the two sheets differ by the total monodromy factor;
        # right values agree exactly
        eps = 0.03 + 0.005j
        h = 0.02
        inv = formal_invariant(manufactured_family(), h_order=2)
        up = BranchSpec(base=0.25, sheet="upper")
        lo = BranchSpec(base=0.25, sheet="lower")
        x_left = -0.2 + 0.01j
        vu = branch_value(inv, h, eps, x_left, up)
        vl = branch_value(inv, h, eps, x_left, lo)
        c1 = inv.chi1(h=h, eps=eps)
        factor = cmath.exp(2j * math.pi * c1)
        assert abs(vu / vl - factor) < 1e-10 * abs(factor)
        x_right = 0.2 - 0.05j
        assert branch_value(inv, h, eps, x_right, up) == branch_value(inv, h, eps, x_right, lo)

    def test_winding_at_eps_zero(self):
        # a full loop multiplies E by e^{2 pi i chi1}: the essential factor
        # is single-valued, only the power contributes
        loop = [0.25, 0.25j, -0.25, -0.25j, 0.25]
        v_loop = e_chi(CHI, 0.0, 0.0, loop)
        v_base = e_chi(CHI, 0.0, 0.0, 0.25)
        factor = cmath.exp(2j * math.pi * CHI[1])
        assert abs(v_loop / v_base - factor) < 1e-12 * abs(factor)

    def test_fundamental_matrix_determinant(self):
        m = model_fundamental_matrix(CHI, 0.0, 0.02, 0.25)
        assert abs(np.linalg.det(m) - 1.0) < 1e-14


class TestEquilibria:
    def test_roles_swap_with_sign(self):
        eps = 0.05 + 0.01j
        plus = equilibria(eps, "+")
        minus = equilibria(eps, "-")
        assert plus["attractive"] == 0.0 and plus["repulsive"] == eps
        assert minus["attractive"] == eps and minus["repulsive"] == 0.0
        assert equilibria(eps, 1) == plus

    def test_bad_sign(self):
        with pytest.raises(ValueError):
            equilibria(0.05, "x")


class TestFormalMonodromy:
    def test_torus_action_preserves_product(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            a = complex(rng.standard_normal(), rng.standard_normal())
            c = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            m = torus_action(a)
            c2 = m @ c
            assert abs(c2[0] * c2[1] - c[0] * c[1]) < 1e-12 * abs(c[0] * c[1])

    def test_factorization_algebra(self):
        eps = 0.048
        h = 0.01
        n0 = formal_monodromy(CHI, h, eps, "zero")
        ne = formal_monodromy(CHI, h, eps, "eps")
        nt = formal_monodromy(CHI, h, eps, "total")
        # diagonal factors commute and compose to the total action
        assert np.allclose(n0 @ ne, ne @ n0, rtol=0, atol=1e-13 * np.abs(ne @ n0).max())
        assert np.allclose(n0 @ ne, nt, rtol=1e-12)

    def test_eps_zero_individual_undefined(self):
        with pytest.raises(UndefinedOperatorError):
            formal_monodromy(CHI, 0.0, 0.0, "zero")
        with pytest.raises(UndefinedOperatorError):
            formal_monodromy(CHI, 0.0, 0.0, "eps")
        nt = formal_monodromy(CHI, 0.0, 0.0, "total")
        assert abs(nt[0, 0] - cmath.exp(2j * math.pi * CHI[1])) < 1e-13

    def test_matches_analytic_continuation(self):
        # the formal monodromy around x = 0 is realized by continuing E
        # along a small loop around 0 only
        eps = 0.21  # keep eps outside the loop of radius 0.12
        h = 0.0
        r = 0.12
        loop = [r * cmath.exp(2j * math.pi * k / 64) for k in range(65)]
        v0 = e_chi(CHI, h, eps, r)
        v1 = e_chi(CHI, h, eps, loop)
        m = formal_monodromy(CHI, h, eps, "zero")
        assert abs(v1 / v0 - m[0, 0]) < 1e-10 * abs(m[0, 0])
