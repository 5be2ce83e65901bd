"""Regression locks for the orientation and sheet conventions of the
linear engine, and for the default-gauge connection numbers.

Every numeric literal below was measured once under the frozen
conventions (counterclockwise loops based on the positive-lam0 ray, the
wide loop passing below the singular pair, upper sheet dressed by one
formal-monodromy factor).  The raw connection entries s1, s2 depend on
the normalization gauge, so they are locked only for the library's
default gauge; the products s1*s2 and all eigenvalues are
gauge-independent.  A legitimate convention change must re-derive every
number in this file, not relax a tolerance.
"""

import cmath
import math

import numpy as np

from confluence.linear import (
    _CANONICAL_SIDE,
    _SHEET_FACTOR_POWER,
    _SHEET_SIGMA,
    LinearSystemSpec,
    accumulate,
    decompose_check,
    formal_monodromy_matrix,
    mixed_basis,
    stokes_matrices,
)

EPS = 0.048
TWO_PI_I = 2j * math.pi


def tri():
    return LinearSystemSpec.from_entries({(0, 0): 1.0}, {}, {(1, 0): 1.0})


def tri_up():
    return LinearSystemSpec.from_entries({(0, 0): 1.0}, {(1, 0): 1.0}, {})


def gen_sys():
    return LinearSystemSpec.from_entries(
        {(0, 0): 1.0, (1, 0): 0.2, (0, 1): 0.1},
        {(0, 0): 0.3, (1, 0): -0.15},
        {(0, 0): -0.2, (1, 0): 0.4, (1, 1): 0.05},
    )


class TestFrozenConstants:
    def test_canonical_loop_side(self):
        assert _CANONICAL_SIDE == "below"

    def test_sheet_dressing_powers(self):
        assert _SHEET_FACTOR_POWER == {"lower": 0, "upper": 1}

    def test_sheet_half_plane_signs(self):
        assert _SHEET_SIGMA == {"upper": 1.0, "lower": -1.0}


class TestTriangularOrientation:
    """The triangular systems' connection numbers are exactly +2 pi i
    (the counterclockwise residue of the variation-of-constants
    integrand); their sign locks the orientation of the extraction."""

    def test_lower_triangular_irregular(self):
        st = stokes_matrices(tri())
        assert abs(st.s1 - TWO_PI_I) < 1e-9
        assert abs(st.s2) < 1e-12

    def test_lower_triangular_eps_nonzero(self):
        rep = decompose_check(tri(), EPS)
        assert abs(rep.s1 - TWO_PI_I) < 1e-9
        assert abs(rep.s2) < 1e-9

    def test_upper_triangular_irregular(self):
        st = stokes_matrices(tri_up())
        assert abs(st.s2 - TWO_PI_I) < 1e-9
        assert abs(st.s1) < 1e-12

    def test_upper_triangular_eps_nonzero(self):
        rep = decompose_check(tri_up(), EPS)
        assert abs(rep.s2 - TWO_PI_I) < 1e-9
        assert abs(rep.s1) < 1e-9


class TestDefaultGaugeNumbers:
    """Raw connection entries of the reference full system, valid only
    for the default normalization gauge (unit upper-left connection
    entry and unit determinant at the canonical anchor point)."""

    def test_irregular_values(self):
        st = stokes_matrices(gen_sys())
        assert abs(st.s1 - (5.192287592537151 - 1.1141445961228182j)) < 1e-6
        assert abs(st.s2 - (-0.6143532694782512j)) < 1e-6

    def test_eps_nonzero_values(self):
        rep = decompose_check(gen_sys(), EPS)
        assert abs(rep.s1 - (5.200390288987123 - 1.029565600817832j)) < 1e-6
        assert abs(rep.s2 - (-0.6125826326905887j)) < 1e-6

    def test_torus_invariant_products(self):
        st = stokes_matrices(gen_sys())
        rep = decompose_check(gen_sys(), EPS)
        assert abs(st.s1 * st.s2 - (-0.6844783752995791 - 3.1898988585465564j)) < 1e-6
        assert abs(rep.s1 * rep.s2 - (-0.6306940062814554 - 3.1856687742453524j)) < 1e-6


class TestSequenceConventions:
    def test_plus_family_marching(self):
        acc = accumulate(tri(), EPS, 3)
        for n, e in zip(acc.ns, acc.eps_values):
            assert abs(e - 1.0 / (1.0 / EPS + n)) < 1e-15

    def test_minus_family_marching(self):
        acc = accumulate(tri(), -EPS, 3, which=2, sign="-")
        for n, e in zip(acc.ns, acc.eps_values):
            assert abs(e - 1.0 / (-1.0 / EPS - n)) < 1e-15

    def test_wild_limit_closed_form(self):
        # tri has constant lam0 = 1, lam1 = 0, so the limit family around
        # the attractive point is [[1/k, 0], [2 pi i / k, k]]
        acc = accumulate(tri(), EPS, 8)
        kappa = cmath.exp(TWO_PI_I / EPS)
        assert abs(acc.kappa - kappa) < 1e-12
        hand = np.array([[1.0 / kappa, 0.0], [TWO_PI_I / kappa, kappa]])
        assert np.abs(acc.wild_target - hand).max() < 1e-9
        assert np.abs(acc.matrices[-1] - hand).max() < 1e-9


class TestSheetDressing:
    def test_upper_sheet_is_lower_times_formal_factor(self):
        lo = mixed_basis(tri(), EPS, "lower")
        up = mixed_basis(tri(), EPS, "upper")
        N2 = formal_monodromy_matrix(tri(), EPS, "eps")
        diff = up.matrix - lo.matrix @ N2
        assert np.abs(diff).max() < 1e-12 * np.abs(up.matrix).max()
