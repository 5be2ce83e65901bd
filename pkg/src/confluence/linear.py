"""Monodromy and Stokes data for 2x2 traceless linear systems with two
merging regular singular points.

The systems treated here have the form

    x (x - eps) dY/dx = A(x, eps) Y,

where ``A`` is a 2x2 matrix of polynomials in ``(x, eps)`` with
``tr A = 0`` identically and ``A(0, 0)`` invertible with distinct
eigenvalues.  For ``eps != 0`` the equation has two regular singular
points ``x = 0`` and ``x = eps``; as ``eps -> 0`` they merge into an
irregular singular point of Poincare rank one.

Because the trace vanishes, ``det A = -lam^2`` defines the eigenvalue
function ``lam_tilde(x, eps) = sqrt(-det A(x, eps))`` (branch-tracked),
and the two scalars

    lam0(eps) = lam_tilde(0, eps),
    lam1(eps) = (lam_tilde(eps, eps) - lam_tilde(0, eps)) / eps

carry the local exponents at the two singular points: the multiplier of
the scalar comparison factor

    E(x, eps) = x**(-lam0/eps) * (x - eps)**(lam0/eps + lam1)

is ``exp(-2 pi i lam0/eps)`` counterclockwise around ``x = 0`` and
``exp(+2 pi i (lam0/eps + lam1))`` around ``x = eps``.  The comparison
model is the diagonal system with fundamental solution ``diag(E, 1/E)``.

Numerical strategy.  For the admissible parameter range |lam0/eps| is
large (tens), so solutions swing through many orders of magnitude near
the singular points, and naive transport of full fundamental matrices
through the deep region destroys the subdominant solution in floating
point.  The module therefore

* builds each canonical column as a convergent local (regular singular
  point) power-series solution with the positive-real-part exponent,
  evaluated at a fraction of the singular-pair distance and transported
  outward as a single vector (the numerically stable direction), and
* measures monodromy along wide "gap loops" that cross the axis through
  the midpoint between the two singular points, where the two local
  factors balance (|E| = O(1) on the equidistance line), and otherwise
  stay at a fixed multiple of the pair distance from both points.  The
  growth swing along such loops is bounded uniformly in eps, so the
  off-diagonal connection data survives in double precision.

Provided operations:

* ``continue_solution`` / ``continue_vector`` -- high-order Taylor
  transport of fundamental matrices / single solutions along polygonal
  paths avoiding the singular points.
* ``monodromy``          -- monodromy matrix along an explicit loop,
  expressed in a declared solution basis.
* ``mixed_basis``        -- canonical fundamental matrix at a reference
  point on the positive-lam0 ray.  Column 1 is the solution line that
  vanishes at the repulsive equilibrium (model growth ``E``), column 2
  the one vanishing at the attractive equilibrium (``1/E``); the
  scaling is fixed by the transition ``T = U^{-1} B`` to the diagonal
  model having ``T[0,0] = 1`` and ``det T = 1``.  The two sheets
  ("upper"/"lower") carry branches of ``E`` differing by the factor
  collected around the repulsive point; their bases and in-basis
  monodromies are related by the corresponding diagonal dressing.
* ``stokes_matrices``    -- for ``eps = 0``, the connection data of the
  irregular point: ``S1`` lower unipotent (sector on the negative-lam0
  ray) and ``S2`` upper unipotent (positive ray), from sectoral bases
  seeded by optimally truncated divergent expansions.
* ``decompose_check``    -- residuals of the four factorizations of the
  in-basis monodromies into unipotent times diagonal factors, across
  both sheets.
* ``accumulate``         -- monodromy matrices along the sequence
  ``1/eps_n = 1/eps_0 + n/lam0(0)``, on which the oscillatory part of
  the formal monodromy is frozen; Cauchy diagnostics, residuals against
  the one-parameter limit families, and recovery of the ``eps = 0``
  Stokes matrices by substituting the distinguished value of the
  accumulation parameter.

Only polynomial coefficient matrices are supported.  All matrices are
unimodular (det = 1) up to the stated tolerances; this is checked and
recorded throughout.
"""

from __future__ import annotations

import cmath
import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .geometry import DEFAULT_PARAMS, GeometryParams, default_base, family_member
from .model import equilibria

__all__ = [
    "AccumulationData",
    "DecompositionReport",
    "LinearSystemSpec",
    "MixedBasis",
    "MonodromyData",
    "PathTooCloseError",
    "ResonanceError",
    "StokesData",
    "accumulate",
    "attractive_loop",
    "big_circle_monodromy",
    "continue_solution",
    "continue_vector",
    "decompose_check",
    "formal_monodromy_matrix",
    "kappa_star",
    "mixed_basis",
    "model_branch_value",
    "monodromy",
    "repulsive_loop",
    "stokes_matrices",
    "wild_limit_matrix",
    "write_accumulation_csv",
]

TAU = 2.0 * math.pi

# Continuation defaults: high-order Taylor steps, step length capped by a
# third of the distance to the nearest singular point.
_TAYLOR_ORDER = 20
_MAX_STEP = 0.05
_LOCAL_TOL = 1e-12
_PATH_MARGIN = 1e-6

# Resonance guard: the canonical basis degenerates when a local exponent
# ratio approaches an integer.
_RESONANCE_TOL = 1e-3

# Geometry of local seeding and monodromy loops, in units of the
# singular-pair distance |eps|: local series evaluated at _SEED_FRACTION
# of the convergence radius; gap loops pass the non-encircled singular
# point at lateral clearance _LATERAL_FACTOR.  The worst log-dominance
# swing along a loop scales like 1/_LATERAL_FACTOR and is amplified by
# exp(2 |lam0/eps| * swing) in the extracted off-diagonal slot, so the
# clearance is chosen large enough to keep that amplification below the
# float noise floor for the exponent sizes the accumulation sequences
# reach (|lam0/eps| ~ 60).
_SEED_FRACTION = 0.35
_LATERAL_FACTOR = 4.0
_FROBENIUS_MAX_TERMS = 700

# Frozen conventions (pinned against the eps = 0 Stokes data through the
# accumulation limits; see tests/test_linear_conventions.py):
#  * the canonical ("lower"-sheet) transports and loops pass the
#    repulsive singular point on the side of negative imaginary part
#    relative to the singular-pair axis;
#  * the "lower" sheet uses the principal branch of E at the reference
#    point (_SHEET_FACTOR_POWER = 0); the "upper" sheet multiplies it by
#    the branch factor collected counterclockwise around the repulsive
#    point (power 1).
_CANONICAL_SIDE = "below"
_SHEET_FACTOR_POWER = {"lower": 0, "upper": 1}
# eps = 0 sectoral seeding: the "upper" sheet reaches the negative-ray
# sector through the upper half plane (argument +pi), the "lower" sheet
# through the lower half (argument -pi).
_SHEET_SIGMA = {"upper": 1.0, "lower": -1.0}

_SHEETS = ("upper", "lower")


class PathTooCloseError(RuntimeError):
    """A continuation path runs too close to a singular point."""


class ResonanceError(ValueError):
    """A local exponent ratio is too close to an integer."""


# ---------------------------------------------------------------------------
# bivariate polynomial helpers (coefficients keyed by (x_power, eps_power))
# ---------------------------------------------------------------------------

Coeffs = Dict[Tuple[int, int], complex]


def _normalize_coeffs(obj) -> Coeffs:
    """Coerce dict / nested-sequence coefficient data to a sparse dict."""
    out: Coeffs = {}
    if isinstance(obj, Mapping):
        for key, val in obj.items():
            i, j = int(key[0]), int(key[1])
            if i < 0 or j < 0:
                raise ValueError("polynomial powers must be non-negative")
            c = complex(val)
            if c != 0:
                out[(i, j)] = out.get((i, j), 0.0) + c
    else:
        arr = np.atleast_2d(np.asarray(obj, dtype=complex))
        for i in range(arr.shape[0]):
            for j in range(arr.shape[1]):
                if arr[i, j] != 0:
                    out[(i, j)] = complex(arr[i, j])
    return {k: v for k, v in out.items() if v != 0}


def _poly_eval(c: Coeffs, x: complex, eps: complex) -> complex:
    return sum(v * x**i * eps**j for (i, j), v in c.items()) if c else 0.0 + 0.0j


def _poly_mul(a: Coeffs, b: Coeffs) -> Coeffs:
    out: Coeffs = {}
    for (i, j), u in a.items():
        for (k, l), v in b.items():
            key = (i + k, j + l)
            out[key] = out.get(key, 0.0) + u * v
    return {k: v for k, v in out.items() if v != 0}


def _poly_add(a: Coeffs, b: Coeffs) -> Coeffs:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) + v
    return {k: v for k, v in out.items() if v != 0}


def _poly_x_coeffs(c: Coeffs, eps: complex) -> np.ndarray:
    """Collapse the eps variable: coefficients of the x-polynomial at fixed eps."""
    if not c:
        return np.zeros(1, dtype=complex)
    deg = max(i for (i, _) in c)
    out = np.zeros(deg + 1, dtype=complex)
    for (i, j), v in c.items():
        out[i] += v * eps**j
    return out


_BINOM_CACHE: Dict[int, np.ndarray] = {}


def _binom_row(n: int) -> np.ndarray:
    row = _BINOM_CACHE.get(n)
    if row is None:
        row = np.array([math.comb(n, k) for k in range(n + 1)], dtype=float)
        _BINOM_CACHE[n] = row
    return row


def _poly_shift(c: np.ndarray, x0: complex) -> np.ndarray:
    """Coefficients of p(x0 + t) given those of p(x)."""
    n = len(c)
    out = np.zeros(n, dtype=complex)
    for j in range(n):
        if c[j] == 0:
            continue
        row = _binom_row(j)
        powers = x0 ** np.arange(j, -1, -1)
        out[: j + 1] += c[j] * row * powers
    return out


def _seg_point_dist(a: complex, b: complex, p: complex) -> float:
    """Distance from point p to the segment [a, b]."""
    d = b - a
    L2 = (d * d.conjugate()).real
    if L2 == 0.0:
        return abs(p - a)
    t = ((p - a) * d.conjugate()).real / L2
    t = min(1.0, max(0.0, t))
    return abs(p - (a + t * d))


# ---------------------------------------------------------------------------
# system specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearSystemSpec:
    """A validated traceless polynomial coefficient matrix.

    ``a11, a12, a21, a22`` are sparse bivariate polynomials keyed by
    ``(x_power, eps_power)``.  The trace must vanish coefficient-wise
    and ``A(0, 0)`` must have nonzero determinant (two distinct
    eigenvalues ``+-lam0(0)``).
    """

    a11: Coeffs
    a12: Coeffs
    a21: Coeffs
    a22: Coeffs

    def __post_init__(self):
        for name in ("a11", "a12", "a21", "a22"):
            object.__setattr__(self, name, _normalize_coeffs(getattr(self, name)))
        trace = _poly_add(self.a11, self.a22)
        if trace:
            worst = max(abs(v) for v in trace.values())
            raise ValueError(
                f"matrix trace must vanish coefficient-wise (max residual {worst:.3e})"
            )
        if abs(self.neg_det_at(0.0, 0.0)) == 0.0:
            raise ValueError("A(0,0) must be invertible (distinct eigenvalues)")

    # -- construction -----------------------------------------------------

    @classmethod
    def from_entries(cls, a11, a12, a21, a22=None) -> "LinearSystemSpec":
        """Build a spec from entry coefficient data; a22 defaults to -a11."""
        a11n = _normalize_coeffs(a11)
        if a22 is None:
            a22n = {k: -v for k, v in a11n.items()}
        else:
            a22n = _normalize_coeffs(a22)
        return cls(a11n, _normalize_coeffs(a12), _normalize_coeffs(a21), a22n)

    # -- evaluation --------------------------------------------------------

    def A_of(self, x: complex, eps: complex) -> np.ndarray:
        return np.array(
            [
                [_poly_eval(self.a11, x, eps), _poly_eval(self.a12, x, eps)],
                [_poly_eval(self.a21, x, eps), _poly_eval(self.a22, x, eps)],
            ],
            dtype=complex,
        )

    def x_polys(self, eps: complex) -> List[np.ndarray]:
        """The four entries as x-polynomials at fixed eps (padded to equal length)."""
        polys = [
            _poly_x_coeffs(self.a11, eps),
            _poly_x_coeffs(self.a12, eps),
            _poly_x_coeffs(self.a21, eps),
            _poly_x_coeffs(self.a22, eps),
        ]
        deg = max(len(p) for p in polys)
        return [np.pad(p, (0, deg - len(p))) for p in polys]

    # -- eigenvalue data ---------------------------------------------------

    def neg_det_coeffs(self) -> Coeffs:
        """Coefficients of -det A = a11^2 + a12*a21 (using a22 = -a11)."""
        return _poly_add(_poly_mul(self.a11, self.a11), _poly_mul(self.a12, self.a21))

    def neg_det_at(self, x: complex, eps: complex) -> complex:
        return _poly_eval(self.neg_det_coeffs(), x, eps)

    @property
    def lam0_zero(self) -> complex:
        """Reference eigenvalue at the origin: sqrt(-det A(0,0)), fixed to the
        half-plane Re > 0 (Im > 0 on the boundary)."""
        w = cmath.sqrt(self.neg_det_at(0.0, 0.0))
        if w.real < 0 or (w.real == 0 and w.imag < 0):
            w = -w
        return w

    def lam_tilde(self, x: complex, eps: complex, ref: Optional[complex] = None) -> complex:
        """sqrt(-det A(x, eps)), the branch nearest ``ref`` (default lam0_zero)."""
        if ref is None:
            ref = self.lam0_zero
        w = cmath.sqrt(self.neg_det_at(x, eps))
        return w if abs(w - ref) <= abs(-w - ref) else -w

    def lam0(self, eps: complex) -> complex:
        return self.lam_tilde(0.0, eps)

    def lam1(self, eps: complex) -> complex:
        """(lam_tilde(eps,eps) - lam0(eps)) / eps, continued to the x-derivative
        of lam_tilde at the origin when eps = 0 (exact polynomial arithmetic)."""
        if eps != 0:
            l0 = self.lam0(eps)
            return (self.lam_tilde(eps, eps, ref=l0) - l0) / eps
        p = self.neg_det_coeffs()
        dpx = sum(v for (i, j), v in p.items() if i == 1 and j == 0)
        return dpx / (2.0 * self.lam0_zero)

    def dlam0_deps(self) -> complex:
        """d lam0 / d eps at eps = 0 (exact from the determinant polynomial)."""
        p = self.neg_det_coeffs()
        dpe = sum(v for (i, j), v in p.items() if i == 0 and j == 1)
        return dpe / (2.0 * self.lam0_zero)

    def eigvec_matrix(self, x: complex, eps: complex) -> np.ndarray:
        """Eigenvector frame C(x, eps) with columns for +lam_tilde, -lam_tilde,
        normalized so det C = 1.  Returns the identity for diagonal A (with the
        columns swapped if the diagonal carries -lam_tilde first)."""
        A = self.A_of(x, eps)
        lam = self.lam_tilde(x, eps)
        a, b, c = A[0, 0], A[0, 1], A[1, 0]
        if max(abs(b), abs(c)) < 1e-14 * max(1.0, abs(a)):
            if abs(a - lam) <= abs(a + lam):
                return np.eye(2, dtype=complex)
            return np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)
        if abs(b) >= abs(c):
            vp = np.array([b, lam - a], dtype=complex)
            vm = np.array([b, -lam - a], dtype=complex)
        else:
            vp = np.array([lam + a, c], dtype=complex)
            vm = np.array([-lam + a, c], dtype=complex)
        C = np.column_stack([vp, vm])
        det = C[0, 0] * C[1, 1] - C[0, 1] * C[1, 0]
        if det == 0:
            raise ValueError("eigenvector frame is singular (eigenvalue collision)")
        return C / cmath.sqrt(det)


# ---------------------------------------------------------------------------
# analytic continuation
# ---------------------------------------------------------------------------


def _check_path(pts: Sequence[complex], sing: Sequence[complex], margin: float):
    for a, b in zip(pts[:-1], pts[1:]):
        for s in sing:
            if _seg_point_dist(a, b, s) < margin:
                raise PathTooCloseError(
                    f"path segment {a:.6g} -> {b:.6g} passes within {margin} of x={s:.6g}"
                )


def _taylor_coeffs(polys, x: complex, eps: complex, seed, order: int):
    """Taylor coefficients of the solution through ``seed`` at ``x``.

    Writing x + t and expanding x(x-eps) = c0 + c1 t + t^2 and
    A(x+t) = sum A_m t^m, the coefficients of Y = sum Y_k t^k satisfy

        c0 (k+1) Y_{k+1} = sum_m A_m Y_{k-m} - c1 k Y_k - (k-1) Y_{k-1}.

    ``seed`` may be a (2,2) matrix or a (2,) vector.
    """
    shifted = [_poly_shift(p, x) for p in polys]
    deg = len(shifted[0])
    A_ms = [
        np.array([[shifted[0][m], shifted[1][m]], [shifted[2][m], shifted[3][m]]], dtype=complex)
        for m in range(deg)
    ]
    c0 = x * (x - eps)
    c1 = 2.0 * x - eps
    coeffs = [np.array(seed, dtype=complex)]
    for k in range(order):
        S = A_ms[0] @ coeffs[k]
        for m in range(1, min(k, deg - 1) + 1):
            S = S + A_ms[m] @ coeffs[k - m]
        if k >= 1:
            S = S - c1 * k * coeffs[k]
        if k >= 2:
            S = S - (k - 1) * coeffs[k - 1]
        elif k == 1:
            S = S - 0.0 * coeffs[0]
        coeffs.append(S / (c0 * (k + 1)))
    return coeffs


def _transport(
    sys: LinearSystemSpec,
    eps: complex,
    path: Sequence[complex],
    seed: np.ndarray,
    *,
    order: int,
    tol: float,
    max_step: float,
    margin: float,
    renormalize_det: bool,
) -> np.ndarray:
    pts = [complex(p) for p in path]
    if len(pts) < 2:
        return np.array(seed, dtype=complex)
    sing = [0.0 + 0.0j, complex(eps)] if eps != 0 else [0.0 + 0.0j]
    _check_path(pts, sing, margin)

    Y = np.array(seed, dtype=complex)
    det0 = None
    if renormalize_det and Y.ndim == 2:
        det0 = Y[0, 0] * Y[1, 1] - Y[0, 1] * Y[1, 0]
        if abs(det0) < 1e-250:
            raise ValueError("initial matrix must be invertible")

    polys = sys.x_polys(eps)
    ceps = complex(eps)

    for a, b in zip(pts[:-1], pts[1:]):
        if a == b:
            continue
        x = a
        seg = b - a
        seg_len = abs(seg)
        u = seg / seg_len
        travelled = 0.0
        while travelled < seg_len - 1e-15 * max(1.0, seg_len):
            rho = min(abs(x), abs(x - ceps)) if eps != 0 else abs(x)
            if rho < 4.0 * margin:
                raise PathTooCloseError(f"continuation stalled at x={x:.6g} (rho={rho:.3g})")
            h_abs = min(max_step, rho / 3.0, seg_len - travelled)

            coeffs = _taylor_coeffs(polys, x, ceps, Y, order)
            scale = max(float(np.max(np.abs(Y))), 1e-280)
            tail = float(np.max(np.abs(coeffs[order])))
            halvings = 0
            while tail * h_abs**order > tol * scale and halvings < 60:
                h_abs *= 0.5
                halvings += 1
            if halvings >= 60:
                raise PathTooCloseError(f"step size underflow near x={x:.6g}")

            h = h_abs * u
            Ynew = coeffs[order].copy()
            for k in range(order - 1, -1, -1):
                Ynew = coeffs[k] + h * Ynew
            if det0 is not None:
                det = Ynew[0, 0] * Ynew[1, 1] - Ynew[0, 1] * Ynew[1, 0]
                # only renormalize while the determinant is computable
                # without catastrophic cancellation: rescaling by a noisy
                # measurement would inject the cancellation error into the
                # solution scale, while the unrenormalized drift is only
                # the local truncation level per step
                cancel = (float(np.max(np.abs(Ynew))) ** 2) * 1e-16
                if abs(det) > 0 and cancel < 1e-9 * abs(det0):
                    f = cmath.sqrt(det0 / det)
                    if abs(f - 1.0) > abs(f + 1.0):
                        f = -f
                    Ynew = f * Ynew
            Y = Ynew
            x = x + h
            travelled += h_abs
        x = b
    return Y


def continue_solution(
    sys: LinearSystemSpec,
    eps: complex,
    path: Sequence[complex],
    Y0: np.ndarray,
    *,
    order: int = _TAYLOR_ORDER,
    tol: float = _LOCAL_TOL,
    max_step: float = _MAX_STEP,
    margin: float = _PATH_MARGIN,
) -> np.ndarray:
    """Transport a fundamental matrix along a polygonal path.

    High-order Taylor steps with length capped at min(max_step, rho/3),
    rho the distance to the nearest singular point, halved until the
    estimated local truncation error is below ``tol`` (relative to the
    current solution size).  The determinant is a constant of motion
    (zero trace); it is renormalized to its initial value after every
    step for which it can be evaluated without cancellation.
    """
    Y0 = np.asarray(Y0, dtype=complex)
    if Y0.shape != (2, 2):
        raise ValueError("Y0 must be a 2x2 matrix")
    return _transport(
        sys, eps, path, Y0, order=order, tol=tol, max_step=max_step, margin=margin,
        renormalize_det=True,
    )


def continue_vector(
    sys: LinearSystemSpec,
    eps: complex,
    path: Sequence[complex],
    v0: np.ndarray,
    *,
    order: int = _TAYLOR_ORDER,
    tol: float = _LOCAL_TOL,
    max_step: float = _MAX_STEP,
    margin: float = _PATH_MARGIN,
) -> np.ndarray:
    """Transport a single solution vector along a polygonal path."""
    v0 = np.asarray(v0, dtype=complex)
    if v0.shape != (2,):
        raise ValueError("v0 must be a 2-vector")
    return _transport(
        sys, eps, path, v0, order=order, tol=tol, max_step=max_step, margin=margin,
        renormalize_det=False,
    )


# ---------------------------------------------------------------------------
# model branch values and formal (diagonal) monodromy factors
# ---------------------------------------------------------------------------


def model_branch_value(
    x: complex,
    eps: complex,
    lam0: complex,
    lam1: complex,
    *,
    winding_zero: int = 0,
    winding_eps: int = 0,
) -> complex:
    """The scalar model solution E at a point, on an explicit log branch.

    For eps != 0:  E = x^(-lam0/eps) (x-eps)^(lam0/eps + lam1), evaluated
    with principal logarithms shifted by the requested winding integers.
    For eps == 0:  E = exp(-lam0/x) x^lam1.
    """
    if eps == 0:
        lx = cmath.log(x) + 2.0j * math.pi * winding_zero
        return cmath.exp(-lam0 / x + lam1 * lx)
    p = lam0 / eps
    lx = cmath.log(x) + 2.0j * math.pi * winding_zero
    lxe = cmath.log(x - eps) + 2.0j * math.pi * winding_eps
    return cmath.exp(-p * lx + (p + lam1) * lxe)


def _multiplier(point: str, lam0_over_eps: complex, lam1: complex) -> complex:
    """Branch factor collected by E on one counterclockwise turn around a point."""
    if point == "zero":
        return cmath.exp(-2.0j * math.pi * lam0_over_eps)
    if point == "eps":
        return cmath.exp(2.0j * math.pi * (lam0_over_eps + lam1))
    raise ValueError(f"unknown singular point label {point!r}")


def formal_monodromy_matrix(sys: LinearSystemSpec, eps: complex, point: str) -> np.ndarray:
    """Diagonal monodromy factor diag(m, 1/m) of the model around one point."""
    if eps == 0:
        raise ValueError("formal monodromy factors around individual points need eps != 0")
    l0 = sys.lam0(eps)
    l1 = sys.lam1(eps)
    m = _multiplier(point, l0 / eps, l1)
    return np.array([[m, 0.0], [0.0, 1.0 / m]], dtype=complex)


def _torus(a: complex) -> np.ndarray:
    return np.array([[cmath.exp(a), 0.0], [0.0, cmath.exp(-a)]], dtype=complex)


def _det2(M: np.ndarray) -> complex:
    """2x2 determinant in extended precision.

    For matrices with entries of size m the float64 evaluation of
    ad - bc carries cancellation noise ~ m^2 * 2e-16, which would mask
    unit-determinant residuals far above the true drift; 80-bit
    arithmetic pushes the evaluation noise below 1e-12 for m up to 1e5.
    """
    Ml = M.astype(np.clongdouble)
    return complex(Ml[0, 0] * Ml[1, 1] - Ml[0, 1] * Ml[1, 0])


# ---------------------------------------------------------------------------
# gap loops: wide counterclockwise loops threading the singular pair
# ---------------------------------------------------------------------------


def _pair_frame(eps: complex, x_ref: complex, far: complex, near: complex):
    """Frame data: origin at the far point, unit w toward the near point."""
    w = (near - far) / abs(near - far)
    q = abs(near - far)
    xr = (x_ref - far) / w
    return w, q, xr


def _far_loop_frame(xr: complex, q: float, side: str) -> List[complex]:
    """Frame vertices of the wide ccw loop around the origin (the far
    point), gap midpoint at q/2, lateral clearance h = _LATERAL_FACTOR*q.

    side = "below": dip below the axis, cross up through the gap, pass
    above the far point, exit down beyond it, return below everything.
    side = "above": the mirror traversal (dip up, travel above
    everything to the far side, exit down, return below the far point,
    cross up through the gap, come back above).  Both are
    counterclockwise around the origin with zero winding around the
    near point at q.
    """
    h = _LATERAL_FACTOR * q
    L = 0.8 * abs(xr)
    if L <= h:
        L = 1.5 * h
    g = q / 2.0
    a = xr.real
    if side == "below":
        return [xr, a - 1j * h, g - 1j * h, g + 1j * h, -L + 1j * h, -L - 1j * h, a - 1j * h, xr]
    if side == "above":
        return [xr, a + 1j * h, -L + 1j * h, -L - 1j * h, g - 1j * h, g + 1j * h, a + 1j * h, xr]
    raise ValueError("side must be 'below' or 'above'")


def _near_loop_frame(xr: complex, q: float) -> List[complex]:
    """Frame vertices of the ccw rectangle around the near point at q:
    up over it, down through the gap midpoint, back under.  The
    counterclockwise orientation forces this shape; there is no side
    choice."""
    h = _LATERAL_FACTOR * q
    g = q / 2.0
    a = xr.real
    return [xr, a + 1j * h, g + 1j * h, g - 1j * h, a - 1j * h, xr]


def attractive_loop(x_ref: complex, eps: complex, sign: str = "+", side: str = _CANONICAL_SIDE):
    """Counterclockwise loop around the attractive equilibrium (the far
    singular point as seen from the reference point).

    The loop keeps a lateral clearance proportional to |eps| off the
    pair axis, crosses the axis only through the midpoint between the
    two points (where the two local factors balance) and beyond the far
    point, and passes the repulsive point on the requested side.
    Winding numbers: (1, 0) around (attractive, repulsive)."""
    eq = equilibria(eps, sign)
    far, near = eq["attractive"], eq["repulsive"]
    w, q, xr = _pair_frame(eps, x_ref, far, near)
    return [far + w * z for z in _far_loop_frame(xr, q, side)]


def repulsive_loop(x_ref: complex, eps: complex, sign: str = "+"):
    """Counterclockwise loop around the repulsive equilibrium (the near
    singular point).  Rectangle at a lateral clearance proportional to
    |eps|: up over the near point, down through the midpoint gap, back
    under.  Winding numbers: (0, 1) around (attractive, repulsive).
    The orientation forces the over-passage side; there is no side
    choice.
    """
    eq = equilibria(eps, sign)
    far, near = eq["attractive"], eq["repulsive"]
    w, q, xr = _pair_frame(eps, x_ref, far, near)
    return [far + w * z for z in _near_loop_frame(xr, q)]


# ---------------------------------------------------------------------------
# monodromy along explicit loops
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonodromyData:
    """A monodromy matrix with its provenance.

    ``matrix`` is the representation of the continuation around ``loop``
    in the basis tagged by ``basis`` (``"standard"`` = the matrix whose
    columns are the continued coordinate solutions, i.e. the continuation
    of the identity seed).  ``det_residual`` records |det M - 1|.
    """

    matrix: np.ndarray
    base_point: complex
    loop: Tuple[complex, ...]
    basis: str
    around: complex
    eps: complex
    det_residual: float


def _resolve_point(eps: complex, around) -> Tuple[complex, str]:
    if isinstance(around, str):
        label = around.lower()
        if label in ("zero", "0"):
            return 0.0 + 0.0j, "zero"
        if label in ("eps", "epsilon"):
            return complex(eps), "eps"
        raise ValueError(f"unknown singular point label {around!r}")
    pt = complex(around)
    if abs(pt) <= 1e-12:
        return 0.0 + 0.0j, "zero"
    if abs(pt - eps) <= 1e-12 * max(1.0, abs(eps)):
        return complex(eps), "eps"
    raise ValueError("monodromy loops must encircle one of the singular points 0, eps")


def _default_loop(x_ref: complex, eps: complex, center: complex, side: str):
    """Gap loop around ``center`` (0 or eps), based at ``x_ref``."""
    other = complex(eps) if abs(center) <= 1e-15 else 0.0 + 0.0j
    # decide far/near by distance from the base point
    if abs(x_ref - center) >= abs(x_ref - other):
        # encircled point is the far one: side-dependent wide loop
        w, q, xr = _pair_frame(eps, x_ref, center, other)
        return [center + w * z for z in _far_loop_frame(xr, q, side)]
    # encircled point is the near one: orientation-forced rectangle
    w, q, xr = _pair_frame(eps, x_ref, other, center)
    return [other + w * z for z in _near_loop_frame(xr, q)]


def monodromy(
    sys: LinearSystemSpec,
    eps: complex,
    around,
    x0: Optional[complex] = None,
    *,
    basis: Optional[np.ndarray] = None,
    basis_tag: str = "standard",
    side: str = _CANONICAL_SIDE,
    loop: Optional[Sequence[complex]] = None,
) -> MonodromyData:
    """Monodromy matrix around one singular point, in a declared basis.

    The default loop is the wide counterclockwise gap loop based at
    ``x0`` (default: the reference point on the positive-lam0 ray); when
    the encircled point is the far one, the loop passes the other
    singular point at lateral clearance on the ``side`` of the pair
    axis.  With a ``basis`` B (column solutions evaluated at ``x0``),
    the returned matrix M satisfies  continuation(B) = B M.
    """
    if eps == 0:
        raise ValueError("monodromy around individual points needs eps != 0")
    center, _label = _resolve_point(eps, around)
    if x0 is None:
        x0 = default_base(sys.lam0_zero)
    x0 = complex(x0)
    if loop is None:
        loop = _default_loop(x0, eps, center, side)
    seed = np.eye(2, dtype=complex) if basis is None else np.array(basis, dtype=complex)
    Yhat = continue_solution(sys, eps, loop, seed)
    if basis is None:
        M = Yhat
    else:
        M = np.linalg.solve(seed, Yhat)
    det = _det2(M)
    return MonodromyData(
        matrix=M,
        base_point=x0,
        loop=tuple(complex(p) for p in loop),
        basis=basis_tag,
        around=center,
        eps=complex(eps),
        det_residual=abs(det - 1.0),
    )


def big_circle_monodromy(
    sys: LinearSystemSpec,
    eps: complex,
    x0: Optional[complex] = None,
    *,
    basis: Optional[np.ndarray] = None,
    segments: int = 96,
) -> np.ndarray:
    """Monodromy along the counterclockwise circle |x| = |x0| through x0.

    The circle must enclose both singular points (|eps| < |x0|)."""
    if x0 is None:
        x0 = default_base(sys.lam0_zero)
    if eps != 0 and abs(eps) >= abs(x0):
        raise ValueError("big circle must enclose both singular points")
    r = abs(x0)
    th0 = cmath.phase(x0)
    pts = [r * cmath.exp(1j * (th0 + TAU * k / segments)) for k in range(segments + 1)]
    seed = np.eye(2, dtype=complex) if basis is None else np.array(basis, dtype=complex)
    Yhat = continue_solution(sys, eps, pts, seed)
    return Yhat if basis is None else np.linalg.solve(seed, Yhat)


# ---------------------------------------------------------------------------
# local (regular singular point) series solutions
# ---------------------------------------------------------------------------


def _frobenius_n_terms(sigma_max: float) -> int:
    """Truncation order for the local series at seed radius _SEED_FRACTION.

    The analytic factor of a local solution with exponent of size sigma_max
    has Taylor coefficients that grow like binomial(a + k, k) with
    a ~ 2 sigma_max (the gap between the two local exponents) before the
    geometric factor z^k, z = _SEED_FRACTION < 1, takes over, so the terms
    peak near k ~ a z / (1 - z) and only then decay.  Walk the exact
    log-ratio of that majorant and stop once it has dropped 42 nats
    (~18 decades) below its running peak, which is where the evaluation
    loop's 1e-17 relative cutoff can trigger."""
    a = 2.0 * sigma_max + 4.0
    lz = math.log(_SEED_FRACTION)
    lr = 0.0
    peak = 0.0
    for k in range(1, _FROBENIUS_MAX_TERMS):
        lr += math.log((a + k) / k) + lz
        peak = max(peak, lr)
        if lr < peak - 42.0:
            return k + 8
    return _FROBENIUS_MAX_TERMS


def _frobenius_coeffs(
    sys: LinearSystemSpec,
    eps: complex,
    point: str,
    sigma: complex,
    n_terms: int,
    scale: float,
) -> List[np.ndarray]:
    """Radius-scaled coefficients d_k = c_k scale^k of the local solution
    (x - p)^sigma sum_k c_k (x - p)^k.

    ``sigma`` must be an exponent of the local fundamental system (the
    recursion divisors are then invertible for the exponent of larger
    real part, which is the only one requested here).  The raw c_k grow
    like scale^-k times a combinatorial factor and overflow for small
    eps, so the recursion is run directly on the d_k, which stay at the
    size of the series terms at radius ``scale``.
    """
    polys = sys.x_polys(eps)
    if point == "zero":
        A_ms = [
            np.array([[polys[0][m], polys[1][m]], [polys[2][m], polys[3][m]]], dtype=complex)
            for m in range(len(polys[0]))
        ]
        lead = -complex(eps)  # x(x-eps) = -eps*x + x^2 near 0
    elif point == "eps":
        shifted = [_poly_shift(p, complex(eps)) for p in polys]
        A_ms = [
            np.array(
                [[shifted[0][m], shifted[1][m]], [shifted[2][m], shifted[3][m]]], dtype=complex
            )
            for m in range(len(shifted[0]))
        ]
        lead = complex(eps)  # x(x-eps) = eps*u + u^2 near eps (u = x - eps)
    else:
        raise ValueError(f"unknown singular point label {point!r}")
    deg = len(A_ms)

    A0 = A_ms[0]
    ident = np.eye(2, dtype=complex)
    # k = 0: [lead*sigma*I - A0] c0 = 0
    M0 = lead * sigma * ident - A0
    # null vector of the (rank-1) matrix M0: pick the larger row of adj(M0)
    adj = np.array([[M0[1, 1], -M0[0, 1]], [-M0[1, 0], M0[0, 0]]], dtype=complex)
    cols = [adj[:, 0], adj[:, 1]]
    c0 = max(cols, key=lambda v: float(np.linalg.norm(v)))
    n0 = float(np.linalg.norm(c0))
    if n0 < 1e-13 * max(1.0, float(np.linalg.norm(M0))):
        raise ValueError(f"sigma={sigma} is not an exponent at the {point} point")
    c0 = c0 / n0
    r = complex(scale)
    A_ms_scaled = [A_ms[m] * r**m for m in range(deg)]
    coeffs = [c0]
    for k in range(1, n_terms):
        rhs = -(sigma + k - 1) * r * coeffs[k - 1]
        for m in range(1, min(k, deg - 1) + 1):
            rhs = rhs + A_ms_scaled[m] @ coeffs[k - m]
        Mk = lead * (sigma + k) * ident - A0
        dk = np.linalg.solve(Mk, rhs)
        coeffs.append(dk)
    return coeffs


def _frobenius_eval(coeffs: List[np.ndarray], u: complex, scale: float) -> np.ndarray:
    """Evaluate the analytic factor sum c_k (local)^k of a local solution,
    rescaled to unit norm, from its radius-scaled coefficients.

    The scalar power prefactor (local)^sigma is deliberately dropped: it
    can underflow for large exponents, and every column is rescaled by
    the basis normalization afterwards, so only the direction and the
    analytic variation matter.  Terms are accumulated until three
    consecutive ones fall below 1e-17 of the running sum; raises if the
    series has not settled."""
    acc = np.zeros(2, dtype=complex)
    small = 0
    z = complex(u) / complex(scale)
    uk = 1.0 + 0.0j
    for k, ck in enumerate(coeffs):
        term = ck * uk
        acc = acc + term
        uk *= z
        tn = float(np.max(np.abs(term)))
        an = float(np.max(np.abs(acc)))
        if k >= 8 and tn <= 1e-17 * max(an, 1e-280):
            small += 1
            if small >= 3:
                break
        else:
            small = 0
    else:
        raise ValueError("local series did not converge at the seed point")
    n = float(np.linalg.norm(acc))
    if n == 0.0:
        raise ValueError("local series evaluated to zero")
    return acc / n


# ---------------------------------------------------------------------------
# mixed bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixedBasis:
    """Canonical fundamental matrix at the reference point.

    ``matrix`` columns: [solution vanishing at the repulsive equilibrium
    (model growth E) | solution vanishing at the attractive one (1/E)],
    scaled so the transition T = U^{-1} B to the diagonal model at
    ``x_ref`` has T[0,0] = 1 and det T = 1.  ``e_ref`` is the branch
    value of E used for this sheet.  ``m_attractive`` / ``m_repulsive``
    are the in-basis monodromy matrices around the two equilibria along
    the canonical loops; their eigen-column slots are exact by
    construction and ``multiplier_residual`` records the worst relative
    mismatch between the measured diagonal entries and the model
    multipliers (a health check at the continuation accuracy level).
    """

    matrix: np.ndarray
    x_ref: complex
    sheet: str
    sign: str
    eps: complex
    lam0: complex
    lam1: complex
    e_ref: complex
    multiplier_residual: float
    m_attractive: Optional[np.ndarray] = None
    m_repulsive: Optional[np.ndarray] = None
    loop_attractive: Optional[Tuple[complex, ...]] = None
    loop_repulsive: Optional[Tuple[complex, ...]] = None


def _check_resonance(lam0_over_eps: complex, lam1: complex):
    for label, val in (("lam0/eps", lam0_over_eps), ("lam0/eps + lam1", lam0_over_eps + lam1)):
        dist = min(abs(val - n) for n in (math.floor(val.real), math.ceil(val.real)))
        if dist < _RESONANCE_TOL:
            raise ResonanceError(
                f"{label} = {val:.6g} is within {_RESONANCE_TOL} of an integer; "
                "the canonical basis degenerates at resonance"
            )


def mixed_basis(
    sys: LinearSystemSpec,
    eps: complex,
    sheet: str = "lower",
    sign: str = "+",
    *,
    x_ref: Optional[complex] = None,
    params: GeometryParams = DEFAULT_PARAMS,
) -> MixedBasis:
    """Construct the canonical solution basis on one sheet.

    For eps != 0 the columns are the local series solutions with
    positive-real-part exponent at the repulsive / attractive
    equilibrium, transported to the reference point (the transport of
    the attractive-point column passes the repulsive point at wide
    lateral clearance on the canonical side).  In this basis the
    monodromy around the attractive point is lower triangular and the
    one around the repulsive point upper triangular, with the diagonals
    carrying the model multipliers exactly.  For eps == 0 the columns
    are sectoral solutions seeded by optimally truncated divergent
    expansions (subdominant selection); see ``stokes_matrices``.

    The scalar gauge is always anchored at the canonical reference
    point on the positive-lam0 ray; passing an explicit ``x_ref`` moves
    the evaluation/base point only (the anchored columns are
    transported there), so connection data and in-basis monodromies do
    not depend on the choice.
    """
    if sheet not in _SHEETS:
        raise ValueError(f"sheet must be one of {_SHEETS}")
    if eps == 0:
        return _mixed_basis_irregular(sys, sheet, x_ref=x_ref)

    lam00 = sys.lam0_zero
    if not family_member(eps, lam00, sign=sign, params=params):
        raise ValueError(f"eps={eps:.6g} is outside the admissible '{sign}' parameter set")
    l0 = sys.lam0(eps)
    l1 = sys.lam1(eps)
    p = l0 / eps
    _check_resonance(p, l1)

    anchor = complex(default_base(lam00, params=params))
    x_ref = anchor if x_ref is None else complex(x_ref)

    eq = equilibria(eps, sign)
    x_attr, x_rep = complex(eq["attractive"]), complex(eq["repulsive"])
    lab_attr = "zero" if abs(x_attr) <= 1e-15 else "eps"
    lab_rep = "zero" if abs(x_rep) <= 1e-15 else "eps"

    # E-exponents at the two points: E ~ (x)^{-p} near 0, (x-eps)^{p+lam1} near eps
    e_exp = {"zero": -p, "eps": p + l1}
    sigma1 = e_exp[lab_rep]            # column 1 ~ E vanishes at the repulsive point
    sigma2 = -e_exp[lab_attr]          # column 2 ~ 1/E vanishes at the attractive point

    q = abs(eps)
    r_seed = _SEED_FRACTION * q
    h = _LATERAL_FACTOR * q
    side_s = -1.0 if _CANONICAL_SIDE == "below" else 1.0
    n_terms = _frobenius_n_terms(max(abs(sigma1), abs(sigma2)))

    # --- column 1: local solution at the repulsive point, straight transport
    u1 = (anchor - x_rep) / abs(anchor - x_rep)
    seed1_pt = x_rep + r_seed * u1
    c1 = _frobenius_coeffs(sys, eps, lab_rep, sigma1, n_terms, r_seed)
    v1_seed = _frobenius_eval(c1, seed1_pt - x_rep, r_seed)
    col1 = continue_vector(sys, eps, [seed1_pt, anchor], v1_seed)

    # --- column 2: local solution at the attractive point, transport dips
    #     around the repulsive point at lateral clearance h on the
    #     canonical side of the pair axis
    w = (x_rep - x_attr) / abs(x_rep - x_attr)
    seed2_pt = x_attr + r_seed * w
    c2 = _frobenius_coeffs(sys, eps, lab_attr, sigma2, n_terms, r_seed)
    v2_seed = _frobenius_eval(c2, seed2_pt - x_attr, r_seed)
    lateral = 1j * w * side_s * h
    xr_frame = (anchor - x_attr) / w
    path2 = [
        seed2_pt,
        seed2_pt + lateral,
        x_attr + w * xr_frame.real + lateral,
        anchor,
    ]
    col2 = continue_vector(sys, eps, path2, v2_seed)

    # --- normalization against the diagonal model at the anchor point
    e_ref = model_branch_value(anchor, eps, l0, l1)
    e_ref *= _multiplier(lab_rep, p, l1) ** _SHEET_FACTOR_POWER[sheet]
    if abs(col1[0]) < 1e-12 * float(np.linalg.norm(col1)):
        raise ValueError("degenerate normalization: E-type column orthogonal to the model")
    t11 = col1[0] / e_ref
    col1 = col1 / t11
    detB = col1[0] * col2[1] - col1[1] * col2[0]
    if abs(detB) < 1e-300:
        raise ValueError("mixed-basis columns are parallel")
    col2 = col2 / detB

    # --- move the anchored basis to the requested base point, if different
    if abs(x_ref - anchor) > 1e-15 * max(1.0, abs(anchor)):
        col1 = continue_vector(sys, eps, [anchor, x_ref], col1)
        col2 = continue_vector(sys, eps, [anchor, x_ref], col2)
    B = np.column_stack([col1, col2])

    # --- in-basis monodromies along the canonical loops
    loop_attr = attractive_loop(x_ref, eps, sign, side=_CANONICAL_SIDE)
    loop_rep = repulsive_loop(x_ref, eps, sign)
    mu_attr = cmath.exp(2.0j * math.pi * sigma2)  # multiplier of column 2 around x_attr
    mu_rep = cmath.exp(2.0j * math.pi * sigma1)   # multiplier of column 1 around x_rep

    img1 = continue_vector(sys, eps, loop_attr, col1)
    coef1 = np.linalg.solve(B, img1)
    M_attr = np.array([[coef1[0], 0.0], [coef1[1], mu_attr]], dtype=complex)

    img2 = continue_vector(sys, eps, loop_rep, col2)
    coef2 = np.linalg.solve(B, img2)
    M_rep = np.array([[mu_rep, coef2[0]], [0.0, coef2[1]]], dtype=complex)

    residual = max(
        abs(coef1[0] - 1.0 / mu_attr) / abs(1.0 / mu_attr),
        abs(coef2[1] - 1.0 / mu_rep) / abs(1.0 / mu_rep),
    )
    # The sheet dressing B -> B N2 is already realized by the e_ref branch
    # factor through the normalization (column 1 scales by the factor, column
    # 2 by its inverse via det B = 1), and the in-basis monodromies computed
    # against the dressed basis pick up the matching diagonal conjugation.

    return MixedBasis(
        matrix=B,
        x_ref=x_ref,
        sheet=sheet,
        sign=sign,
        eps=complex(eps),
        lam0=l0,
        lam1=l1,
        e_ref=e_ref,
        multiplier_residual=float(residual),
        m_attractive=M_attr,
        m_repulsive=M_rep,
        loop_attractive=tuple(loop_attr),
        loop_repulsive=tuple(loop_rep),
    )


# ---------------------------------------------------------------------------
# eps = 0: formal reduction and sectoral bases
# ---------------------------------------------------------------------------


def _formal_diagonal_data(sys: LinearSystemSpec, K: int):
    """Formal gauge data at the irregular point (eps = 0).

    Returns (P0, T_list, d1, d2): P0 is the det-1 eigenvector frame of
    A(0,0); T_list[k] are the off-diagonal gauge coefficients (T_0 = I,
    diag T_k = 0 for k >= 1) reducing the system to diagonal form; d1/d2
    are the Taylor coefficients of the two diagonal entries of the
    reduced system.  The scalar solutions of the reduced system are

        Z_1 = exp(-lam0/x + d1[1] log x + sum_{k>=2} d1[k] x^{k-1}/(k-1)),

    and similarly Z_2 (leading data +lam0, d2[1]).  The gauge series is
    divergent; truncation at K ~ 2|lam0|/|x| is optimal at x.
    """
    P0 = sys.eigvec_matrix(0.0, 0.0)
    P0inv = np.linalg.inv(P0)
    polys = sys.x_polys(0.0)
    deg = len(polys[0])
    A_ms = [
        P0inv
        @ np.array([[polys[0][m], polys[1][m]], [polys[2][m], polys[3][m]]], dtype=complex)
        @ P0
        for m in range(deg)
    ]
    lam0 = sys.lam0_zero
    T_list = [np.eye(2, dtype=complex)]
    D_list = [np.diag(np.diag(A_ms[0]))]
    for n in range(1, K + 1):
        R = np.zeros((2, 2), dtype=complex)
        for m in range(1, min(n, deg - 1) + 1):
            R = R + A_ms[m] @ T_list[n - m]
        for l in range(1, n):
            R = R - T_list[n - l] @ D_list[l]
        R = R - (n - 1) * T_list[n - 1]
        Dn = np.diag(np.diag(R))
        Tn = np.zeros((2, 2), dtype=complex)
        Tn[0, 1] = R[0, 1] / (2.0 * lam0)
        Tn[1, 0] = R[1, 0] / (-2.0 * lam0)
        T_list.append(Tn)
        D_list.append(Dn)
    d1 = [D[0, 0] for D in D_list]
    d2 = [D[1, 1] for D in D_list]
    return P0, T_list, d1, d2


def _scalar_exponent(d: List[complex], x: complex, log_x: complex) -> complex:
    """exp-argument of a reduced scalar solution: -d[0]/x + d[1] log x + tail."""
    s = -d[0] / x + (d[1] if len(d) > 1 else 0.0) * log_x
    for k in range(2, len(d)):
        s += d[k] * x ** (k - 1) / (k - 1)
    return s


def _corridor_path(
    u: complex, r: float, R: float, sheet: str, n: int = 16
) -> List[complex]:
    """Constant-dominance corridor from -r*u to R*u through one half plane.

    Transporting the 1/E-type column outward along the positive ray
    amplifies float noise in the E-direction by exp(2 lam0 (1/r - 1/R)),
    which is catastrophic for small seed radii.  This route keeps the
    amplification-to-endpoint at most one: a quarter arc at radius r
    from the negative ray to the imaginary axis (Re(lam0/x) <= 0), a
    radial leg along the imaginary axis (Re(lam0/x) = 0 identically),
    and a quarter arc at radius R on which Re(lam0/x) rises to its
    endpoint value, never beyond it."""
    sigma = _SHEET_SIGMA[sheet]
    a_u = cmath.phase(u)
    a0 = a_u + sigma * math.pi
    a_mid = a_u + sigma * math.pi / 2.0
    pts = [r * cmath.exp(1j * (a0 + (a_mid - a0) * k / n)) for k in range(n + 1)]
    pts.append(R * cmath.exp(1j * a_mid))
    pts.extend(
        R * cmath.exp(1j * (a_mid + (a_u - a_mid) * k / n)) for k in range(1, n + 1)
    )
    return pts


def _mixed_basis_irregular(
    sys: LinearSystemSpec,
    sheet: str,
    *,
    x_ref: Optional[complex] = None,
    seed_radius: float = 0.07,
) -> MixedBasis:
    """Sectoral basis at eps = 0 via optimally truncated formal seeding.

    Column 1 (model growth E, subdominant on the positive-lam0 ray) is
    seeded at ``seed_radius`` on that ray; column 2 (1/E, subdominant on
    the negative ray) is seeded at the antipodal point reached through
    the half plane of the requested sheet, and both are continued to the
    canonical anchor point where the scalar gauge is fixed (an explicit
    ``x_ref`` only moves the evaluation point afterwards).
    """
    lam0 = sys.lam0_zero
    u = lam0 / abs(lam0)
    anchor = complex(default_base(lam0))
    x_ref = anchor if x_ref is None else complex(x_ref)
    sigma = _SHEET_SIGMA[sheet]

    scale = seed_radius
    K = max(4, min(40, int(round(2.0 * abs(lam0) / scale))))
    P0, T_list, d1, d2 = _formal_diagonal_data(sys, K)

    def T_of(x: complex) -> np.ndarray:
        acc = np.zeros((2, 2), dtype=complex)
        for Tk in reversed(T_list):
            acc = Tk + x * acc
        return acc

    arg_u = cmath.phase(u)
    # right seed: principal branch on the positive ray
    x_near = scale * u
    log_near = math.log(scale) + 1j * arg_u
    z1 = cmath.exp(_scalar_exponent(d1, x_near, log_near))
    col1_seed = P0 @ T_of(x_near) @ np.array([z1, 0.0], dtype=complex)
    col1 = continue_vector(sys, 0.0, [x_near, anchor], col1_seed)

    # left seed: reached through the sheet's half plane (argument sigma*pi)
    x_left = scale * u * cmath.exp(1j * sigma * math.pi)
    log_left = math.log(scale) + 1j * (arg_u + sigma * math.pi)
    z2 = cmath.exp(_scalar_exponent(d2, x_left, log_left))
    col2_seed = P0 @ T_of(x_left) @ np.array([0.0, z2], dtype=complex)
    path = _corridor_path(u, scale, abs(anchor), sheet)
    col2 = continue_vector(sys, 0.0, path, col2_seed)

    # normalization against the model factor E(x,0) = exp(-lam0/x) x^lam1
    l1 = sys.lam1(0.0)
    e_ref = model_branch_value(anchor, 0.0, lam0, l1)
    t11 = col1[0] / e_ref
    if abs(t11) < 1e-14:
        raise ValueError("degenerate normalization at the irregular point")
    col1 = col1 / t11
    detB = col1[0] * col2[1] - col1[1] * col2[0]
    col2 = col2 / detB
    if abs(x_ref - anchor) > 1e-15 * max(1.0, abs(anchor)):
        col1 = continue_vector(sys, 0.0, [anchor, x_ref], col1)
        col2 = continue_vector(sys, 0.0, [anchor, x_ref], col2)
    B = np.column_stack([col1, col2])
    return MixedBasis(
        matrix=B,
        x_ref=x_ref,
        sheet=sheet,
        sign="+",
        eps=0.0 + 0.0j,
        lam0=lam0,
        lam1=l1,
        e_ref=e_ref,
        multiplier_residual=0.0,
    )


# ---------------------------------------------------------------------------
# Stokes matrices at eps = 0
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StokesData:
    """Connection data of the irregular point (eps = 0).

    ``S1`` is lower unipotent (jump across the sector on the negative
    lam0-ray), ``S2`` upper unipotent (positive ray); ``s1, s2`` are the
    off-diagonal entries.  ``unipotent_residual`` is the worst deviation
    of the computed matrices from exact unipotent triangular shape
    before that shape is imposed."""

    S1: np.ndarray
    S2: np.ndarray
    s1: complex
    s2: complex
    unipotent_residual: float
    x_ref: complex


def stokes_matrices(sys: LinearSystemSpec, *, x_ref: Optional[complex] = None) -> StokesData:
    """Extract (S1 lower unipotent, S2 upper unipotent) at eps = 0.

    S2 compares the two sheets' bases at the reference point on the
    positive-lam0 ray (their E-type columns agree; the 1/E-type columns
    differ by a multiple of the E-type one).  S1 compares the bases
    carried to the antipodal point, each through its own half plane,
    after removing the diagonal branch factor of the model: there the
    E-type columns differ by a multiple of the 1/E-type one.
    """
    lam0 = sys.lam0_zero
    if x_ref is None:
        x_ref = default_base(lam0)
    x_ref = complex(x_ref)

    B_up = _mixed_basis_irregular(sys, "upper", x_ref=x_ref).matrix
    B_lo = _mixed_basis_irregular(sys, "lower", x_ref=x_ref).matrix

    # orientation fixed so that the eps != 0 connection data converges to
    # these matrices along the accumulation sequences (see tests)
    S2_raw = np.linalg.solve(B_up, B_lo)

    # carry both bases to the antipodal reference point through their sheets
    n_arc = 48
    up_path = [
        abs(x_ref) * cmath.exp(1j * (cmath.phase(x_ref) + math.pi * k / n_arc))
        for k in range(n_arc + 1)
    ]
    lo_path = [
        abs(x_ref) * cmath.exp(1j * (cmath.phase(x_ref) - math.pi * k / n_arc))
        for k in range(n_arc + 1)
    ]
    G_up = continue_solution(sys, 0.0, up_path, B_up)
    G_lo = continue_solution(sys, 0.0, lo_path, B_lo)
    C_L = np.linalg.solve(G_lo, G_up)

    # remove the total formal branch factor: one counterclockwise turn
    # multiplies the model solution by exp(2 pi i lam1), which is exactly
    # the relative branch factor between the two sheets at the antipodal point
    l1 = sys.lam1(0.0)
    N_total = _torus(2.0j * math.pi * l1)
    S1_raw = C_L @ np.linalg.inv(N_total)

    resid = max(
        abs(S1_raw[0, 1]),
        abs(S1_raw[0, 0] - 1.0),
        abs(S1_raw[1, 1] - 1.0),
        abs(S2_raw[1, 0]),
        abs(S2_raw[0, 0] - 1.0),
        abs(S2_raw[1, 1] - 1.0),
    )
    s1 = complex(S1_raw[1, 0])
    s2 = complex(S2_raw[0, 1])
    S1 = np.array([[1.0, 0.0], [s1, 1.0]], dtype=complex)
    S2 = np.array([[1.0, s2], [0.0, 1.0]], dtype=complex)
    return StokesData(S1=S1, S2=S2, s1=s1, s2=s2, unipotent_residual=float(resid), x_ref=x_ref)


# ---------------------------------------------------------------------------
# decomposition of monodromy into unipotent and diagonal factors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecompositionReport:
    """Residuals of the four in-basis monodromy factorizations.

    Index 1 refers to the attractive equilibrium, index 2 to the
    repulsive one.  On the lower sheet  M1 = S1 . N1  and  M2 = N2 . S2;
    on the upper sheet  M1 = N2^{-1} . S1 . N1 . N2  and  M2 = S2 . N2,
    with N_i the diagonal model factors and S1/S2 unipotent triangular.
    The eigen-column slots of the measured matrices are exact by
    construction, so the informative residuals are the diagonal-slot
    mismatches (measured multiplier vs model multiplier) collected in
    ``identity_residuals``, plus ``det_residual`` (worst |det - 1|).
    """

    M1_lower: np.ndarray
    M2_lower: np.ndarray
    M1_upper: np.ndarray
    M2_upper: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    N1: np.ndarray
    N2: np.ndarray
    identity_residuals: Dict[str, float]
    triangular_residual: float
    det_residual: float
    s1: complex
    s2: complex


def _point_labels(eps: complex, sign: str) -> Tuple[str, str]:
    eq = equilibria(eps, sign)
    lab_attr = "zero" if abs(complex(eq["attractive"])) <= 1e-15 else "eps"
    lab_rep = "zero" if abs(complex(eq["repulsive"])) <= 1e-15 else "eps"
    return lab_attr, lab_rep


def decompose_check(sys: LinearSystemSpec, eps: complex, sign: str = "+") -> DecompositionReport:
    """Verify the factorizations of the in-basis monodromies.

    The unipotent factors are extracted from the lower sheet
    (S1 = M1 N1^{-1}, S2 = N2^{-1} M2) and reused in all four identity
    residuals.
    """
    if eps == 0:
        raise ValueError("the factorization check needs eps != 0")
    mb_lo = mixed_basis(sys, eps, "lower", sign)
    mb_up = mixed_basis(sys, eps, "upper", sign)
    M1_lo, M2_lo = mb_lo.m_attractive, mb_lo.m_repulsive
    M1_up, M2_up = mb_up.m_attractive, mb_up.m_repulsive

    lab_attr, lab_rep = _point_labels(eps, sign)
    N1 = formal_monodromy_matrix(sys, eps, lab_attr)
    N2 = formal_monodromy_matrix(sys, eps, lab_rep)
    N2inv = np.diag(1.0 / np.diag(N2))

    S1 = M1_lo @ np.diag(1.0 / np.diag(N1))
    S2 = N2inv @ M2_lo

    tri = max(
        abs(S1[0, 1]),
        abs(S1[0, 0] - 1.0),
        abs(S1[1, 1] - 1.0),
        abs(S2[1, 0]),
        abs(S2[0, 0] - 1.0),
        abs(S2[1, 1] - 1.0),
    )
    s1 = complex(S1[1, 0])
    s2 = complex(S2[0, 1])
    S1c = np.array([[1.0, 0.0], [s1, 1.0]], dtype=complex)
    S2c = np.array([[1.0, s2], [0.0, 1.0]], dtype=complex)

    N = N1 @ N2
    ident = {
        "M1_lower = S1 N1": float(np.linalg.norm(M1_lo - S1c @ N1)),
        "M2_lower = N2 S2": float(np.linalg.norm(M2_lo - N2 @ S2c)),
        "M1_upper = N2^-1 S1 N": float(np.linalg.norm(M1_up - N2inv @ S1c @ N)),
        "M2_upper = S2 N2": float(np.linalg.norm(M2_up - S2c @ N2)),
    }
    dets = [
        abs(_det2(M) - 1.0)
        for M in (M1_lo, M2_lo, M1_up, M2_up, S1c, S2c, N1, N2)
    ]
    return DecompositionReport(
        M1_lower=M1_lo,
        M2_lower=M2_lo,
        M1_upper=M1_up,
        M2_upper=M2_up,
        S1=S1c,
        S2=S2c,
        N1=N1,
        N2=N2,
        identity_residuals=ident,
        triangular_residual=float(tri),
        det_residual=float(max(dets)),
        s1=s1,
        s2=s2,
    )


# ---------------------------------------------------------------------------
# accumulation of monodromy along the frozen-phase sequence
# ---------------------------------------------------------------------------


def _nu_tilde_zero(kappa: complex, d: complex) -> np.ndarray:
    """Limit of the diagonal factor around x = 0 along the sequence."""
    return np.array([[1.0 / kappa, 0.0], [0.0, kappa]], dtype=complex) @ _torus(
        -2.0j * math.pi * d
    )


def _nu_tilde_eps(kappa: complex, d: complex, lam1_0: complex) -> np.ndarray:
    """Limit of the diagonal factor around x = eps along the sequence."""
    return np.array([[kappa, 0.0], [0.0, 1.0 / kappa]], dtype=complex) @ _torus(
        2.0j * math.pi * (d + lam1_0)
    )


def wild_limit_matrix(
    which: int,
    sheet: str,
    sign: str,
    kappa: complex,
    S1_0: np.ndarray,
    S2_0: np.ndarray,
    d: complex,
    lam1_0: complex,
) -> np.ndarray:
    """The one-parameter limit family of the in-basis monodromy matrices.

    ``which`` = 1 (attractive point) or 2 (repulsive point); ``sheet``
    picks the branch.  For the '+' parameter family the limits are

        M1_lower -> S1 . Nz(kappa),        M1_upper -> Ne(kappa)^-1 . S1 . N0,
        M2_lower -> Ne(kappa) . S2,        M2_upper -> S2 . Ne(kappa),

    where Nz/Ne are the diagonal limit factors around x = 0 / x = eps
    and N0 is the total formal branch factor at eps = 0.  For the '-'
    family the roles of the two diagonal factors swap.
    """
    Nz = _nu_tilde_zero(kappa, d)
    Ne = _nu_tilde_eps(kappa, d, lam1_0)
    N0 = _torus(2.0j * math.pi * lam1_0)
    if sign == "+":
        first, second = Nz, Ne
    elif sign == "-":
        first, second = Ne, Nz
    else:
        raise ValueError("sign must be '+' or '-'")
    if which == 1:
        if sheet == "lower":
            return S1_0 @ first
        return np.linalg.inv(second) @ S1_0 @ N0
    if which == 2:
        if sheet == "lower":
            return second @ S2_0
        return S2_0 @ second
    raise ValueError("which must be 1 or 2")


def kappa_star(which: int, sign: str, d: complex, lam1_0: complex) -> complex:
    """The substitution value of kappa that trivializes the diagonal limit
    factor attached to the given equilibrium index, leaving the bare
    unipotent connection matrix."""
    if sign == "+":
        delta = 0.0 if which == 1 else 1.0
    elif sign == "-":
        delta = 1.0 if which == 1 else 0.0
    else:
        raise ValueError("sign must be '+' or '-'")
    return cmath.exp(-2.0j * math.pi * (d + delta * lam1_0))


@dataclass(frozen=True)
class AccumulationData:
    """Monodromy matrices along 1/eps_n = 1/eps_0 + n/lam0(0).

    ``matrices[k]`` is the in-basis monodromy around the equilibrium of
    index ``which`` at eps_n, n = ns[k].  ``cauchy`` holds Frobenius
    norms of successive differences; ``residuals`` compares each matrix
    with the limit family evaluated at the sequence's kappa.
    ``non_cauchy`` flags a non-decreasing difference trend over the last
    five steps (no limit is then claimed).  ``stokes_recovered`` is the
    result of substituting the trivializing kappa into the fitted limit
    (it should reproduce the eps = 0 unipotent connection matrix)."""

    which: int
    sheet: str
    sign: str
    eps0: complex
    kappa: complex
    ns: Tuple[int, ...]
    eps_values: Tuple[complex, ...]
    matrices: Tuple[np.ndarray, ...]
    cauchy: Tuple[float, ...]
    residuals: Tuple[float, ...]
    non_cauchy: bool
    limit_last: np.ndarray
    wild_target: np.ndarray
    stokes_recovered: np.ndarray
    stokes_reference: np.ndarray
    kappa_substitution_residual: float


def accumulate(
    sys: LinearSystemSpec,
    eps0: complex,
    n_max: int,
    *,
    which: int = 1,
    sheet: str = "lower",
    sign: str = "+",
    workers: Optional[int] = None,
    stokes0: Optional[StokesData] = None,
    params: GeometryParams = DEFAULT_PARAMS,
) -> AccumulationData:
    """Follow the in-basis monodromy along the frozen-phase sequence.

    On 1/eps_n = 1/eps_0 + n/lam0(0) the quantity exp(2 pi i lam0(0)/eps_n)
    is literally constant (= kappa), so all variation in the diagonal
    factors comes from the eps-dependence of lam0, lam1 themselves and
    the matrices converge to the one-parameter limit family; the
    unipotent content converges to the eps = 0 connection matrices.
    """
    if which not in (1, 2):
        raise ValueError("which must be 1 (attractive) or 2 (repulsive)")
    lam00 = sys.lam0_zero
    inv0 = 1.0 / eps0
    ns = list(range(0, n_max + 1))
    # march 1/eps in the family direction (+1/lam0 for "+", -1/lam0 for
    # "-") so eps_n -> 0 inside the family while exp(2 pi i lam0/eps_n)
    # stays frozen at kappa
    direction = 1.0 if sign == "+" else -1.0
    eps_values = [1.0 / (inv0 + direction * n / lam00) for n in ns]
    for n, e in zip(ns, eps_values):
        _check_resonance(sys.lam0(e) / e, sys.lam1(e))
    kappa = cmath.exp(2.0j * math.pi * lam00 / eps0)
    d = sys.dlam0_deps()
    lam1_0 = sys.lam1(0.0)

    if stokes0 is None:
        stokes0 = stokes_matrices(sys)
    S1_0, S2_0 = stokes0.S1, stokes0.S2

    def one(e: complex) -> np.ndarray:
        mb = mixed_basis(sys, e, sheet, sign, params=params)
        return mb.m_attractive if which == 1 else mb.m_repulsive

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            matrices = list(pool.map(one, eps_values))
    else:
        matrices = [one(e) for e in eps_values]

    target = wild_limit_matrix(which, sheet, sign, kappa, S1_0, S2_0, d, lam1_0)
    cauchy = [
        float(np.linalg.norm(matrices[k + 1] - matrices[k])) for k in range(len(matrices) - 1)
    ]
    residuals = [float(np.linalg.norm(M - target)) for M in matrices]

    non_cauchy = False
    if len(cauchy) >= 5:
        tail = cauchy[-5:]
        floor = 1e-9
        decreasing = all(tail[i + 1] <= tail[i] * 1.05 + floor for i in range(len(tail) - 1))
        non_cauchy = not decreasing

    limit_last = matrices[-1]
    # kappa substitution: strip the diagonal limit factor from the fitted
    # limit; evaluating the family at the trivializing kappa then returns
    # the bare unipotent connection matrix.
    Nz = _nu_tilde_zero(kappa, d)
    Ne = _nu_tilde_eps(kappa, d, lam1_0)
    first, second = (Nz, Ne) if sign == "+" else (Ne, Nz)
    if which == 1 and sheet == "lower":
        recovered = limit_last @ np.linalg.inv(first)
        reference = S1_0
    elif which == 2 and sheet == "lower":
        recovered = np.linalg.inv(second) @ limit_last
        reference = S2_0
    elif which == 2 and sheet == "upper":
        recovered = limit_last @ np.linalg.inv(second)
        reference = S2_0
    else:  # which == 1, upper sheet: limit = second^-1 S1 N0
        N0 = _torus(2.0j * math.pi * lam1_0)
        recovered = second @ limit_last @ np.linalg.inv(N0)
        reference = S1_0
    ksub_res = float(np.linalg.norm(recovered - reference))

    return AccumulationData(
        which=which,
        sheet=sheet,
        sign=sign,
        eps0=complex(eps0),
        kappa=kappa,
        ns=tuple(ns),
        eps_values=tuple(eps_values),
        matrices=tuple(matrices),
        cauchy=tuple(cauchy),
        residuals=tuple(residuals),
        non_cauchy=non_cauchy,
        limit_last=limit_last,
        wild_target=target,
        stokes_recovered=recovered,
        stokes_reference=reference,
        kappa_substitution_residual=ksub_res,
    )


def write_accumulation_csv(data: AccumulationData, path: str) -> None:
    """Write the accumulation record with one row per sequence index.

    Columns: n, eps_re, eps_im, M11_re, M11_im, M12_re, M12_im,
    M21_re, M21_im, M22_re, M22_im, cauchy_diff, residual_vs_wild.
    The cauchy_diff of row k compares M(eps_{k+1}) with M(eps_k); the
    final row leaves it empty."""
    header = [
        "n",
        "eps_re",
        "eps_im",
        "M11_re",
        "M11_im",
        "M12_re",
        "M12_im",
        "M21_re",
        "M21_im",
        "M22_re",
        "M22_im",
        "cauchy_diff",
        "residual_vs_wild",
    ]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, n in enumerate(data.ns):
            M = data.matrices[k]
            e = data.eps_values[k]
            w.writerow(
                [
                    n,
                    f"{e.real:.16e}",
                    f"{e.imag:.16e}",
                    f"{M[0, 0].real:.16e}",
                    f"{M[0, 0].imag:.16e}",
                    f"{M[0, 1].real:.16e}",
                    f"{M[0, 1].imag:.16e}",
                    f"{M[1, 0].real:.16e}",
                    f"{M[1, 0].imag:.16e}",
                    f"{M[1, 1].real:.16e}",
                    f"{M[1, 1].imag:.16e}",
                    f"{data.cauchy[k]:.6e}" if k < len(data.cauchy) else "",
                    f"{data.residuals[k]:.6e}",
                ]
            )
