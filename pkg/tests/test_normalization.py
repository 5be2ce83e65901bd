"""Tests for the sectoral normalization pipeline.

Frozen reference values used below, all derived by hand from the
coefficient recursions before the module was written:

- scalar center manifold of x(x-eps) p' = m p + x(x-eps):
  matching powers gives p20 = -1/m, p11 = 1/m, p30 = -2/m^2, p21 = 3/m^2,
  p12 = -1/m^2, p40 = -6/m^3, p31 = 12/m^3, p22 = -7/m^3, p13 = 1/m^3,
  and p_{0b} = 0 for all b;
- the Euler equation x^2 p' = -p + x^2 has p_k = (-1)^k (k-1)! for k >= 2,
  so the ratios |p_{k+1}| / ((k+1) |p_k|) = k/(k+1) approach 1: exact
  order-one divergence with unit rate;
- for the lower-triangular family A = [[1, 0], [x, -1]] the balanced
  eigenvector gauge is exactly C = [[1, 0], [x/2, 1]], the quotient matrix
  is R = [[0, 0], [-1/2, 0]], the first Riccati series vanishes, and the
  second solves x^2 t' = -2t - x^2/2 at eps = 0:
  t2 = -1/4, t3 = 1/4, t4 = -3/8, t5 = 3/4, t_{a} = -(a-1) t_{a-1}/2,
  giving the folded Borel transform -(1/4)/(1 + x s/2)^2 with a double
  pole at s = -2/x and lateral-sum jump 2 pi i exp(2/x);
- one homological step for a remainder c*u1^2 (first component) with
  lam = lam0 + lam1 x solves x^2 g' + lam g = c x^2 coefficientwise:
  g2 = c/lam0, g3 = -(2 + lam1) c / lam0^2;
- the factorially divergent series sum_{k>=1} (-1)^{k-1} (k-1)! x^k has
  Borel sum exp(1/x) E1(1/x) (checked against scipy's exp1 and against
  adaptive quadrature along the rotated ray);
- the wild part of the transition between the two lateral sums of that
  series across the singular direction is 2 pi i exp(1/x) (residue of the
  double pole of the folded transform at s = -1/x).
"""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confluence.model import e_chi
from confluence.normalform import FormalInvariant
from confluence.normalization import (
    BorelLaplaceValue,
    BudgetError,
    CenterManifoldSeries,
    DiagonalSystem,
    IsotropyFit,
    OrderTooLowError,
    PrenormalSystem,
    SingularDirectionError,
    borel_laplace,
    center_manifold_series,
    default_c_samples,
    diagonalize_linear_part,
    directional_sum,
    gauge_sectoral_frame,
    normalize_formal,
    prenormalize_traceless_linear,
    stokes_isotropy_structure,
)
from confluence.series import TruncatedSeries

CTX = ("u1", "u2", "x", "eps")


def xxe(variables, orders):
    vs = tuple(variables)
    ix = vs.index("x")
    key2 = tuple(2 if i == ix else 0 for i in range(len(vs)))
    coeffs = {key2: 1.0}
    if "eps" in vs:
        ie = vs.index("eps")
        key11 = tuple((1 if i == ix else 0) + (1 if i == ie else 0) for i in range(len(vs)))
        coeffs[key11] = -1.0
    return TruncatedSeries(vs, tuple(orders), coeffs)


def make_invariant(chi0_coeffs, chi1_coeffs, h_order, eps_order):
    chi0 = TruncatedSeries(("h", "eps"), (h_order, eps_order), chi0_coeffs)
    chi1 = TruncatedSeries(("h", "eps"), (h_order, eps_order), chi1_coeffs)
    return FormalInvariant(chi0, chi1)


def chi_times_state(inv, ords):
    """chi(u1*u2, x, eps) * diag(1,-1) * u as a pair of series."""
    hord = inv.chi0.orders[inv.chi0.vars.index("h")]
    u1 = TruncatedSeries.variable("u1", CTX, ords)
    u2 = TruncatedSeries.variable("u2", CTX, ords)
    xv = TruncatedSeries.variable("x", CTX, ords)
    chi = TruncatedSeries.zero(CTX, ords)
    for n in range(hord + 1):
        for b in range(inv.chi0.orders[inv.chi0.vars.index("eps")] + 1):
            c0 = inv.chi0.coeff({"h": n, "eps": b})
            c1 = inv.chi1.coeff({"h": n, "eps": b})
            add = {}
            if c0:
                add[(n, n, 0, b)] = c0
            if c1:
                add[(n, n, 1, b)] = c1
            if add:
                chi = chi + TruncatedSeries(CTX, ords, add)
    return chi * u1, -1.0 * (chi * u2), chi


def tri_entries():
    a11 = TruncatedSeries(("x", "eps"), (1, 0), {(0, 0): 1.0})
    a12 = TruncatedSeries(("x", "eps"), (1, 0), {})
    a21 = TruncatedSeries(("x", "eps"), (1, 0), {(1, 0): 1.0})
    return a11, a12, a21


def gen_entries(order_x, order_eps):
    a11 = TruncatedSeries(("x", "eps"), (order_x, order_eps), {(0, 0): 1.0, (1, 0): 0.2, (0, 1): 0.1})
    a12 = TruncatedSeries(("x", "eps"), (order_x, order_eps), {(0, 0): 0.3, (1, 0): -0.15})
    a21 = TruncatedSeries(("x", "eps"), (order_x, order_eps), {(0, 0): -0.2, (1, 0): 0.4, (1, 1): 0.05})
    return a11, a12, a21


# ---------------------------------------------------------------------------
# center manifolds


class TestCenterManifold:
    def test_zero_remainder_gives_zero(self):
        f = TruncatedSeries.zero(("u1", "x", "eps"), (2, 5, 2))
        cm = center_manifold_series(1.7, f, 5, 2)
        assert all(c.max_abs_coeff() == 0.0 for c in cm.components)
        assert cm.plugback_residual == 0.0
        assert cm.slice_residual == 0.0

    @pytest.mark.parametrize("m", [2.0, -1.3 + 0.4j])
    def test_scalar_toy_oracle(self, m):
        ords = (1, 4, 3)
        f = xxe(("u1", "x", "eps"), ords)
        cm = center_manifold_series(m, f, 4, 3)
        p = cm.components[0]
        expected = {
            (2, 0): -1 / m, (1, 1): 1 / m,
            (3, 0): -2 / m**2, (2, 1): 3 / m**2, (1, 2): -1 / m**2,
            (4, 0): -6 / m**3, (3, 1): 12 / m**3, (2, 2): -7 / m**3, (1, 3): 1 / m**3,
        }
        for (a, b), val in expected.items():
            assert p.coeff({"x": a, "eps": b}) == pytest.approx(val, abs=1e-13)
        for b in range(4):
            assert p.coeff({"x": 0, "eps": b}) == 0.0
        assert cm.plugback_residual < 1e-12
        assert cm.slice_residual < 1e-13

    def test_euler_divergence_rate(self):
        K = 12
        f = TruncatedSeries(("u1", "x", "eps"), (1, K, 0), {(0, 2, 0): 1.0})
        cm = center_manifold_series(-1.0, f, K, 0)
        p = cm.components[0]
        for k in range(2, K + 1):
            assert p.coeff({"x": k, "eps": 0}) == pytest.approx(
                (-1) ** k * math.factorial(k - 1), rel=1e-12
            )
        # order-one divergence with unit rate: ratios k/(k+1) -> 1
        tail = [r for r in cm.gevrey_ratios[3:] if r > 0]
        assert tail
        assert all(0.5 <= r <= 1.01 for r in tail)
        assert 0.5 <= cm.gevrey_L <= 2.0
        # after the Borel transform in x the coefficients are 1/k: their
        # k-th roots stabilize near 1 (finite radius, no factorial left)
        roots = [
            abs(p.borel("x").coeff({"x": k, "eps": 0})) ** (1.0 / k)
            for k in range(4, K + 1)
        ]
        assert max(roots) / min(roots) < 1.6
        assert 0.4 < roots[-1] < 1.2

    def test_two_dimensional_state_and_plugback(self):
        M = np.array([[1.1, 0.0], [0.2, -0.9]])
        ords = (2, 2, 6, 2)
        base = xxe(CTX, ords)
        f1 = base * TruncatedSeries(CTX, ords, {(0, 0, 0, 0): 0.7, (0, 0, 1, 0): -0.2}) + TruncatedSeries(
            CTX, ords, {(2, 0, 0, 0): 0.4, (1, 1, 1, 0): 0.3}
        )
        f2 = base * TruncatedSeries(CTX, ords, {(0, 0, 0, 0): -0.3}) + TruncatedSeries(
            CTX, ords, {(0, 2, 0, 1): 0.5}
        )
        cm = center_manifold_series(M, (f1, f2), 6, 2)
        assert cm.dimension == 2
        assert cm.plugback_residual < 1e-11
        assert cm.slice_residual < 1e-12

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1))
    def test_plugback_property(self, seed):
        rng = np.random.default_rng(seed)
        ords = (2, 2, 5, 2)

        def rc():
            return 0.4 * complex(rng.standard_normal(), rng.standard_normal())

        base = xxe(CTX, ords)
        flat = TruncatedSeries(CTX, ords, {(0, 0, a, b): rc() for a in range(3) for b in range(2)})
        quad = TruncatedSeries(
            CTX, ords,
            {
                (2, 0, 0, 0): rc(), (1, 1, 0, 0): rc(), (0, 2, 1, 0): rc(),
                (2, 0, 0, 1): rc(), (1, 1, 2, 0): rc(),
            },
        )
        f1 = base * flat + quad
        f2 = base * TruncatedSeries(CTX, ords, {(0, 0, 0, 0): rc()}) + TruncatedSeries(
            CTX, ords, {(0, 2, 0, 0): rc(), (1, 1, 1, 1): rc()}
        )
        M = np.array([[1.0 + abs(rc()), rc() * 0.1], [0.0, -1.0 - abs(rc())]])
        cm = center_manifold_series(M, (f1, f2), 5, 2)
        scale = max(1.0, f1.max_abs_coeff(), f2.max_abs_coeff())
        assert cm.plugback_residual < 1e-10 * scale
        assert cm.slice_residual < 1e-11 * scale

    def test_rejects_singular_linear_part(self):
        f = TruncatedSeries.zero(("u1", "x", "eps"), (1, 3, 0))
        with pytest.raises(ValueError, match="invertible"):
            center_manifold_series(0.0, f, 3, 0)

    def test_rejects_state_linear_term_at_origin(self):
        f = TruncatedSeries(("u1", "x", "eps"), (1, 3, 0), {(1, 0, 0): 0.5})
        with pytest.raises(ValueError, match="state-linear"):
            center_manifold_series(1.0, f, 3, 0)

    def test_rejects_non_divisible_constant_part(self):
        f = TruncatedSeries(("u1", "x", "eps"), (1, 3, 0), {(0, 1, 0): 1.0})
        with pytest.raises(ValueError, match="divisible"):
            center_manifold_series(1.0, f, 3, 0)


# ---------------------------------------------------------------------------
# prenormal systems and the eigenvector gauge


class TestPrenormal:
    def test_from_rhs_recovers_invariant(self):
        inv = make_invariant(
            {(0, 0): 1.0, (1, 0): 0.3, (0, 1): 0.1},
            {(0, 0): -0.4, (1, 0): 0.12},
            1, 1,
        )
        ords = (4, 4, 5, 1)
        rhs1, rhs2, _ = chi_times_state(inv, ords)
        extra = xxe(CTX, ords)
        rhs1 = rhs1 + extra * TruncatedSeries(CTX, ords, {(2, 0, 0, 0): 0.25, (0, 3, 1, 0): -0.1})
        rhs2 = rhs2 + extra * TruncatedSeries(CTX, ords, {(1, 2, 0, 1): 0.4})
        pre = PrenormalSystem.from_rhs(rhs1, rhs2)
        assert pre.prenormal_residual < 1e-12
        for key, val in [((0, 0), 1.0), ((1, 0), 0.3), ((0, 1), 0.1)]:
            assert pre.inv.chi0.coeff({"h": key[0], "eps": key[1]}) == pytest.approx(val, abs=1e-13)
        assert pre.inv.chi1.coeff({"h": 0, "eps": 0}) == pytest.approx(-0.4, abs=1e-13)
        assert pre.inv.chi1.coeff({"h": 1, "eps": 0}) == pytest.approx(0.12, abs=1e-13)
        assert pre.lam00() == pytest.approx(1.0)

    def test_from_rhs_rejects_asymmetric_resonant_part(self):
        ords = (2, 2, 3, 0)
        u1 = TruncatedSeries.variable("u1", CTX, ords)
        u2 = TruncatedSeries.variable("u2", CTX, ords)
        rhs1 = 1.0 * u1
        rhs2 = -1.3 * u2  # d != -c
        with pytest.raises(ValueError, match="resonant diagonal"):
            PrenormalSystem.from_rhs(rhs1, rhs2)

    def test_from_rhs_rejects_affine_off_resonant_junk(self):
        ords = (2, 2, 3, 0)
        u1 = TruncatedSeries.variable("u1", CTX, ords)
        u2 = TruncatedSeries.variable("u2", CTX, ords)
        rhs1 = 1.0 * u1 + TruncatedSeries(CTX, ords, {(0, 1, 1, 0): 0.2})
        rhs2 = -1.0 * u2
        with pytest.raises(ValueError, match="off-resonant"):
            PrenormalSystem.from_rhs(rhs1, rhs2)

    def test_triangular_family_exact_gauge(self):
        a11, a12, a21 = tri_entries()
        pre, C, lam_t = prenormalize_traceless_linear(a11, a12, a21, order_x=8)
        # balanced gauge is exactly [[1, 0], [x/2, 1]]
        assert (C[0][0] - 1.0).max_abs_coeff() < 1e-13
        assert C[0][1].max_abs_coeff() < 1e-13
        assert (C[1][1] - 1.0).max_abs_coeff() < 1e-13
        assert C[1][0].coeff({"x": 1, "eps": 0}) == pytest.approx(0.5, abs=1e-13)
        assert C[1][0].coeff({"x": 0, "eps": 0}) == 0.0
        # the invariant is chi = 1 exactly
        assert (lam_t - 1.0).max_abs_coeff() < 1e-13
        assert pre.inv.chi0.coeff({"h": 0, "eps": 0}) == pytest.approx(1.0, abs=1e-13)
        assert pre.inv.chi1.max_abs_coeff() < 1e-13

    def test_generic_family_gauge_is_unimodular(self):
        a11, a12, a21 = gen_entries(10, 2)
        pre, C, lam_t = prenormalize_traceless_linear(a11, a12, a21, order_x=10, order_eps=2)
        det = C[0][0] * C[1][1] - C[0][1] * C[1][0]
        assert (det - 1.0).max_abs_coeff() < 1e-11
        assert pre.prenormal_residual < 1e-10
        assert pre.lam00() == pytest.approx(cmath.sqrt(0.94), abs=1e-12)

    def test_rejects_colliding_eigenvalues(self):
        z = TruncatedSeries(("x", "eps"), (2, 0), {})
        a11 = TruncatedSeries(("x", "eps"), (2, 0), {(1, 0): 1.0})
        with pytest.raises(ValueError, match="collide"):
            prenormalize_traceless_linear(a11, z, z, order_x=2)


# ---------------------------------------------------------------------------
# the diagonalizing affine gauge


class TestDiagonalize:
    def test_already_diagonal_affine_gives_identity(self):
        inv = make_invariant({(0, 0): 1.0, (0, 1): 0.2}, {(0, 0): -0.3}, 0, 1)
        ords = (1, 1, 8, 1)
        rhs1, rhs2, _ = chi_times_state(inv, ords)
        pre = PrenormalSystem.from_rhs(rhs1, rhs2)
        gauge = diagonalize_linear_part(pre, order_x=6, order_eps=1)
        assert gauge.t1.max_abs_coeff() < 1e-13
        assert gauge.t2.max_abs_coeff() < 1e-13
        assert gauge.b1.max_abs_coeff() < 1e-13
        assert gauge.b2.max_abs_coeff() < 1e-13
        assert all(c.max_abs_coeff() < 1e-13 for c in gauge.phi0.components)
        assert gauge.det_residual < 1e-13
        assert all(f.max_abs_coeff() < 1e-12 for f in gauge.system.f)

    def test_triangular_family_riccati_oracle(self):
        a11, a12, a21 = tri_entries()
        pre, _, _ = prenormalize_traceless_linear(a11, a12, a21, order_x=8)
        gauge = diagonalize_linear_part(pre, order_x=6)
        assert gauge.t1.max_abs_coeff() < 1e-13
        t2 = gauge.t2
        expected = {2: -0.25, 3: 0.25, 4: -0.375, 5: 0.75}
        for k, val in expected.items():
            assert t2.coeff({"x": k, "eps": 0}) == pytest.approx(val, abs=1e-12)
        assert gauge.b1.max_abs_coeff() < 1e-13
        assert gauge.b2.max_abs_coeff() < 1e-13
        assert gauge.det_residual < 1e-12
        # a linear input leaves no second-order remainder
        assert all(f.max_abs_coeff() < 1e-11 for f in gauge.system.f)

    def test_generic_family_clean_reduction(self):
        a11, a12, a21 = gen_entries(12, 1)
        pre, _, _ = prenormalize_traceless_linear(a11, a12, a21, order_x=12, order_eps=1)
        gauge = diagonalize_linear_part(pre, order_x=9, order_eps=1)
        assert gauge.det_residual < 1e-10
        assert gauge.flatness_residual < 1e-9
        assert all(f.max_abs_coeff() < 1e-9 for f in gauge.system.f)

    def test_budget_error_without_padding(self):
        a11, a12, a21 = gen_entries(6, 0)
        pre, _, _ = prenormalize_traceless_linear(a11, a12, a21, order_x=6)
        with pytest.raises(BudgetError):
            diagonalize_linear_part(pre, order_x=6, pad_polynomial=False)

    def test_hamiltonian_remainder_stays_divergence_free(self):
        inv = make_invariant(
            {(0, 0): 1.0, (1, 0): 0.3, (0, 1): 0.1},
            {(0, 0): -0.4, (1, 0): 0.12},
            1, 1,
        )
        ords = (4, 4, 9, 1)
        rhs1, rhs2, _ = chi_times_state(inv, ords)
        base = xxe(CTX, ords)
        # remainder J grad G for G = 0.2 u1^3 u2 + 0.15 u1 u2^3
        #                            + 0.1 u1^2 u2^2 x + 0.05 u2^2 / 2
        f1 = TruncatedSeries(
            CTX, ords,
            {(3, 0, 0, 0): 0.2, (1, 2, 0, 0): 0.45, (2, 1, 1, 0): 0.2, (0, 1, 0, 0): 0.05},
        )
        f2 = TruncatedSeries(
            CTX, ords,
            {(2, 1, 0, 0): -0.6, (0, 3, 0, 0): -0.15, (1, 2, 1, 0): -0.2},
        )
        pre = PrenormalSystem.from_rhs(rhs1 + base * f1, rhs2 + base * f2)
        gauge = diagonalize_linear_part(pre, order_x=6, order_eps=1)
        # the u2 -> u1 linear drive makes the gauge genuinely non-trivial
        assert gauge.t1.max_abs_coeff() > 1e-4
        assert gauge.det_residual < 1e-10
        assert gauge.flatness_residual < 1e-9
        assert gauge.divergence_residual < 1e-9


# ---------------------------------------------------------------------------
# formal normalization


@pytest.fixture(scope="module")
def hamiltonian_normalization():
    inv = make_invariant(
        {(0, 0): 1.0, (1, 0): 0.3, (0, 1): 0.1},
        {(0, 0): -0.4, (1, 0): 0.12},
        2, 2,
    )
    ords = (4, 4, 10, 2)
    # f = J grad G, G = 0.2 u1^3 u2 + 0.15 u1 u2^3 + 0.1 u1^2 u2^2 x
    #                  + 0.08 u1^2 u2^2 eps
    f1 = TruncatedSeries(
        CTX, ords,
        {(3, 0, 0, 0): 0.2, (1, 2, 0, 0): 0.45, (2, 1, 1, 0): 0.2, (2, 1, 0, 1): 0.16},
    )
    f2 = TruncatedSeries(
        CTX, ords,
        {(2, 1, 0, 0): -0.6, (0, 3, 0, 0): -0.15, (1, 2, 1, 0): -0.2, (1, 2, 0, 1): -0.16},
    )
    sys = DiagonalSystem(inv=inv, f=(f1, f2))
    ns = normalize_formal(sys, orders=(4, 6, 2))
    return inv, sys, ns


class TestNormalizeFormal:
    def test_model_is_fixed_point(self):
        inv = make_invariant(
            {(0, 0): 1.0, (1, 0): 0.25, (0, 1): -0.1},
            {(0, 0): 0.3, (1, 0): -0.05},
            2, 1,
        )
        sys = DiagonalSystem.model(inv, order_u=4, order_x=8, order_eps=1)
        ns = normalize_formal(sys, orders=(4, 6, 1))
        u1 = TruncatedSeries.variable("u1", CTX, ns.transformation[0].orders)
        u2 = TruncatedSeries.variable("u2", CTX, ns.transformation[1].orders)
        assert (ns.transformation[0] - u1).max_abs_coeff() < 1e-13
        assert (ns.transformation[1] - u2).max_abs_coeff() < 1e-13
        assert ns.beta.max_abs_coeff() < 1e-13
        assert ns.conjugacy_residual < 1e-13
        assert ns.chi_match_residual < 1e-13
        assert not ns.psi_tilde

    def test_single_homological_step_oracle(self):
        lam0, lam1 = 1.3, -0.7
        c = 0.85
        inv = make_invariant({(0, 0): lam0}, {(0, 0): lam1}, 1, 0)
        ords = (2, 2, 8, 0)
        f1 = TruncatedSeries(CTX, ords, {(2, 0, 0, 0): c})
        f2 = TruncatedSeries.zero(CTX, ords)
        ns = normalize_formal(
            DiagonalSystem(inv=inv, f=(f1, f2)), orders=(2, 6, 0)
        )
        phi1 = ns.model_transformation[0]
        assert phi1.coeff({"u1": 2, "u2": 0, "x": 0, "eps": 0}) == 0.0
        assert phi1.coeff({"u1": 2, "u2": 0, "x": 1, "eps": 0}) == 0.0
        assert phi1.coeff({"u1": 2, "u2": 0, "x": 2, "eps": 0}) == pytest.approx(
            c / lam0, abs=1e-12
        )
        assert phi1.coeff({"u1": 2, "u2": 0, "x": 3, "eps": 0}) == pytest.approx(
            -(2 + lam1) * c / lam0**2, abs=1e-12
        )
        assert ns.conjugacy_residual < 1e-12
        assert ns.identity_residual < 1e-13

    def test_stage_order_is_immaterial(self):
        inv = make_invariant({(0, 0): 0.9, (1, 0): 0.2}, {(0, 0): -0.3}, 1, 1)
        ords = (3, 3, 7, 1)
        f1 = TruncatedSeries(CTX, ords, {(2, 0, 0, 0): 0.4, (1, 1, 1, 0): -0.2, (0, 2, 0, 1): 0.3})
        f2 = TruncatedSeries(CTX, ords, {(0, 2, 0, 0): -0.5, (2, 1, 0, 0): 0.25})
        sys = DiagonalSystem(inv=inv, f=(f1, f2))
        base = normalize_formal(sys, orders=(3, 5, 1))
        for seed in (7, 1234):
            other = normalize_formal(
                sys, orders=(3, 5, 1), stage_order_rng=np.random.default_rng(seed)
            )
            for a, b in zip(base.transformation, other.transformation):
                assert (a - b).max_abs_coeff() < 1e-12

    def test_hamiltonian_residual_ladder(self, hamiltonian_normalization):
        inv, sys, ns = hamiltonian_normalization
        assert ns.identity_residual < 1e-13
        assert ns.resonant_consistency < 1e-10
        assert ns.conjugacy_residual < 1e-10
        assert ns.division_residual < 1e-10

    def test_hamiltonian_is_symplectic(self, hamiltonian_normalization):
        _, _, ns = hamiltonian_normalization
        assert ns.sympl_residual < 1e-10

    def test_hamiltonian_preserves_invariant(self, hamiltonian_normalization):
        _, _, ns = hamiltonian_normalization
        assert ns.chi_match_residual < 1e-10

    def test_first_integral_along_trajectories(self, hamiltonian_normalization):
        inv, sys, ns = hamiltonian_normalization

        def rhs_w(w, x):
            # dw/dx = [chi(w1 w2, x, 0) diag(1,-1) w + x^2 f(w, x, 0)] / x^2
            h = w[0] * w[1]
            chi = inv.chi_at(h, x, 0.0)
            fv = np.array(
                [f(u1=w[0], u2=w[1], x=x, eps=0.0) for f in sys.f], dtype=complex
            )
            return np.array([chi * w[0], -chi * w[1]]) / x**2 + fv

        def pull_h(w, x):
            # Newton inversion of the (truncated) transformation at x
            v = w.copy()
            for _ in range(50):
                r = ns.evaluate(v[0], v[1], x, 0.0) - w
                if np.max(np.abs(r)) < 1e-13:
                    break
                J = np.zeros((2, 2), dtype=complex)
                for i in range(2):
                    e = np.zeros(2, dtype=complex)
                    e[i] = 1e-6
                    J[:, i] = (
                        ns.evaluate(*(v + e), x, 0.0) - ns.evaluate(*(v - e), x, 0.0)
                    ) / 2e-6
                v = v - np.linalg.solve(J, r)
            return v[0] * v[1]

        x0, x1 = 0.45, 0.3
        v0 = np.array([0.04 + 0.01j, 0.05 - 0.02j])
        w = ns.evaluate(v0[0], v0[1], x0, 0.0)
        n_steps = 400
        dx = (x1 - x0) / n_steps
        xs = x0
        h_vals = [pull_h(w.copy(), x0)]
        for _ in range(n_steps):
            k1 = rhs_w(w, xs)
            k2 = rhs_w(w + dx / 2 * k1, xs + dx / 2)
            k3 = rhs_w(w + dx / 2 * k2, xs + dx / 2)
            k4 = rhs_w(w + dx * k3, xs + dx)
            w = w + dx / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            xs += dx
        h_vals.append(pull_h(w.copy(), x1))
        drift = abs(h_vals[1] - h_vals[0])
        assert drift < 1e-6

    def test_eps0_mode_forces_confluent_limit(self):
        inv = make_invariant({(0, 0): 1.0, (1, 0): 0.2}, {(0, 0): -0.3}, 1, 1)
        ords = (3, 3, 7, 1)
        f1 = TruncatedSeries(CTX, ords, {(2, 0, 0, 0): 0.4, (1, 1, 0, 1): 0.2})
        f2 = TruncatedSeries(CTX, ords, {(0, 2, 0, 0): -0.5})
        sys = DiagonalSystem(inv=inv, f=(f1, f2))
        ns = normalize_formal(sys, mode="eps0", orders=(3, 5, 1))
        assert ns.orders == (3, 5, 0)
        for t in ns.transformation:
            assert t.degree("eps") == 0

    def test_rejects_flat_remainder_terms(self):
        inv = make_invariant({(0, 0): 1.0}, {(0, 0): 0.0}, 0, 0)
        ords = (2, 2, 6, 0)
        f1 = TruncatedSeries(CTX, ords, {(1, 0, 1, 0): 0.3})
        f2 = TruncatedSeries.zero(CTX, ords)
        with pytest.raises(ValueError, match="second order"):
            normalize_formal(DiagonalSystem(inv=inv, f=(f1, f2)), orders=(2, 4, 0))

    def test_budget_error_on_short_invariant(self):
        inv = make_invariant({(0, 0): 1.0}, {(0, 0): 0.0}, 0, 0)
        ords = (4, 4, 6, 0)
        f1 = TruncatedSeries(CTX, ords, {(2, 0, 0, 0): 0.3})
        f2 = TruncatedSeries.zero(CTX, ords)
        with pytest.raises(BudgetError):
            normalize_formal(
                DiagonalSystem(inv=inv, f=(f1, f2)),
                orders=(4, 4, 0),
                pad_polynomial=False,
            )


# ---------------------------------------------------------------------------
# directional sums


def euler_coeffs(n):
    """c_k of sum_{k>=1} (-1)^{k-1} (k-1)! x^k, with c_0 = 0."""
    return [0.0] + [(-1) ** (k - 1) * math.factorial(k - 1) for k in range(1, n)]


class TestDirectionalSum:
    def test_short_lists_are_exact(self):
        v = directional_sum([1.5 - 0.5j], 0.0, 0.2)
        assert v.value == pytest.approx(1.5 - 0.5j)
        v = directional_sum([1.0, 2.0], 0.3, 0.1 + 0.05j)
        assert v.value == pytest.approx(1.0 + 2.0 * (0.1 + 0.05j))
        v = directional_sum(euler_coeffs(13), 0.0, 0.0)
        assert v.value == 0.0

    def test_euler_series_against_exp1(self):
        scipy_special = pytest.importorskip("scipy.special")
        x = 0.1 * cmath.exp(0.1j)
        got = directional_sum(euler_coeffs(13), 0.0, x)
        exact = cmath.exp(1 / x) * complex(scipy_special.exp1(1 / x))
        assert abs(got.value - exact) < 1e-8

    def test_euler_series_against_adaptive_quadrature(self):
        scipy_integrate = pytest.importorskip("scipy.integrate")
        x = 0.12 * cmath.exp(-0.2j)
        theta = 0.25
        got = directional_sum(euler_coeffs(13), theta, x)

        rot = cmath.exp(1j * theta)

        def integrand(s):
            z = s * rot
            return rot * cmath.exp(-z) * x / (1 + z * x)

        re = scipy_integrate.quad(lambda s: integrand(s).real, 0, 200, limit=400)[0]
        im = scipy_integrate.quad(lambda s: integrand(s).imag, 0, 200, limit=400)[0]
        assert abs(got.value - (re + 1j * im)) < 1e-9

    def test_lateral_jump_matches_residue(self):
        x = -0.12
        up = directional_sum(euler_coeffs(13), +0.5, x, n_nodes=96)
        dn = directional_sum(euler_coeffs(13), -0.5, x, n_nodes=96)
        jump = dn.value - up.value
        expected = 2j * math.pi * cmath.exp(1 / x)
        assert abs(jump - expected) < 1e-7 * abs(expected) + 1e-12

    def test_singular_direction_raises(self):
        with pytest.raises(SingularDirectionError):
            directional_sum(euler_coeffs(13), 0.0, -0.12)
        with pytest.raises(SingularDirectionError):
            directional_sum(euler_coeffs(13), 0.03, -0.12)

    def test_order_too_low(self):
        with pytest.raises(OrderTooLowError) as exc:
            directional_sum(euler_coeffs(13), 0.0, 0.9, tol=1e-30)
        assert exc.value.suggested_order >= 1

    def test_convergent_series_recovered(self):
        coeffs = [0.5 ** k for k in range(14)]
        x = 0.3
        got = directional_sum(coeffs, 0.0, x)
        assert abs(got.value - 1.0 / (1.0 - x / 2)) < 1e-9

    def test_polynomial_method_agrees_when_safe(self):
        coeffs = [1.0 / math.factorial(k) for k in range(12)]
        x = 0.2
        a = directional_sum(coeffs, 0.0, x, method="pade")
        b = directional_sum(coeffs, 0.0, x, method="polynomial")
        assert abs(a.value - b.value) < 1e-9
        assert abs(a.value - math.exp(x)) < 1e-8


class TestBorelLaplace:
    def test_model_normalization_sums_to_identity(self):
        inv = make_invariant({(0, 0): 1.0, (1, 0): 0.2}, {(0, 0): -0.3}, 1, 0)
        sys = DiagonalSystem.model(inv, order_u=4, order_x=8, order_eps=0)
        ns = normalize_formal(sys, orders=(4, 6, 0))
        u = (0.03 + 0.01j, -0.02 + 0.04j)
        val = borel_laplace(ns, 0.1, u, 0.2)
        assert val.values[0] == pytest.approx(u[0], abs=1e-12)
        assert val.values[1] == pytest.approx(u[1], abs=1e-12)


# ---------------------------------------------------------------------------
# sectoral frames and transition structure


class TestSectoralFrame:
    def test_triangular_frame_analytic_in_theta_off_the_cut(self):
        a11, a12, a21 = tri_entries()
        pre, C, _ = prenormalize_traceless_linear(a11, a12, a21, order_x=20)
        gauge = diagonalize_linear_part(pre, order_x=18)
        x = 0.3  # Borel pole of t2 sits at -2/x < 0: both rays are clear
        f1 = gauge_sectoral_frame(gauge, +0.3, x)
        f2 = gauge_sectoral_frame(gauge, -0.3, x)
        assert np.max(np.abs(f1.matrix - f2.matrix)) < 1e-10
        assert np.max(np.abs(f1.shift)) < 1e-12
        assert f1.matrix[0, 1] == pytest.approx(0.0, abs=1e-12)


def linear_frame_sums(gauge, C, theta, x):
    frame = gauge_sectoral_frame(gauge, theta, x)
    Cnum = np.array(
        [[C[i][j](x=x, eps=0.0) for j in range(2)] for i in range(2)],
        dtype=complex,
    )
    mat = Cnum @ frame.matrix

    def sum_fn(u, x_pt):
        return mat @ np.asarray(u, dtype=complex)

    return sum_fn


class TestIsotropy:
    def test_identity_transition(self):
        inv = make_invariant({(0, 0): 1.0}, {(0, 0): 0.0}, 0, 0)

        def ident(u, x):
            return np.asarray(u, dtype=complex)

        fit = stokes_isotropy_structure(
            ident, ident, inv, -0.25, default_c_samples(), sector=1
        )
        assert fit.forbidden_max < 1e-11
        assert fit.identity_residual < 1e-11
        assert abs(fit.linear_entry) < 1e-11
        assert abs(fit.sigma_ramification) < 1e-11

    def test_synthetic_unipotent_transition(self):
        inv = make_invariant({(0, 0): 1.0}, {(0, 0): 0.0}, 0, 0)
        x_star = -0.25
        E = e_chi(inv, 0.0, 0.0, x_star)
        sigma_u = 1e-3 + 4e-4j
        S = np.array([[1.0, 0.0], [sigma_u, 1.0]], dtype=complex)

        def sum_a(u, x):
            return np.asarray(u, dtype=complex)

        def sum_b(u, x):
            return S @ np.asarray(u, dtype=complex)

        fit = stokes_isotropy_structure(
            sum_a, sum_b, inv, x_star, default_c_samples(), sector=1
        )
        assert fit.forbidden_max < 1e-9
        assert fit.identity_residual < 1e-9
        assert fit.linear_entry == pytest.approx(sigma_u * E**2, rel=1e-8)

    def test_triangular_family_wild_transition(self):
        a11, a12, a21 = tri_entries()
        pre, C, _ = prenormalize_traceless_linear(a11, a12, a21, order_x=20)
        gauge = diagonalize_linear_part(pre, order_x=18)
        x_star = -0.25  # Borel pole of t2 at s = +8: theta = 0 is the cut
        sum_plus = linear_frame_sums(gauge, C, +0.5, x_star)
        sum_minus = linear_frame_sums(gauge, C, -0.5, x_star)
        fit = stokes_isotropy_structure(
            sum_plus, sum_minus, pre.inv, x_star, default_c_samples(), sector=1
        )
        assert fit.forbidden_max < 1e-6
        assert fit.identity_residual < 1e-7
        assert fit.linear_entry == pytest.approx(2j * math.pi, abs=1e-5)

    def test_sample_grid_is_deterministic_and_clean(self):
        s1 = default_c_samples()
        s2 = default_c_samples()
        assert s1 == s2
        assert (0.0 + 0.0j, 0.0 + 0.0j) in s1
        assert len(set(s1)) == len(s1)
