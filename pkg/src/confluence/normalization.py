"""Formal and sectoral normalization of planar ODE families with two
merging irregular singular points.

The systems treated here have the shape

    x(x - eps) dy/dx = G(y, x, eps),        y in C^2,

where the right-hand side is resonant-diagonal to leading order: modulo
the vanishing polynomial x(x - eps) the linear-plus-resonant part of G is
``chi(y1*y2, x, eps) * diag(1, -1) * y`` with ``chi`` affine in x.  The
module builds, at the level of truncated power series, the chain of
coordinate changes that conjugates such a family to its integrable model
and the directional (Borel-Laplace) sums that realize the divergent
pieces as genuine sectoral transformations:

* ``center_manifold_series``  -- the unique formal solution of
  ``x(x - eps) phi' = M phi + f(phi, x, eps)`` with invertible ``M``;
  it vanishes at both singular slices x = 0 and x = eps, and its
  coefficients grow at most like ``L**n * n!`` (order-one divergence).
* ``diagonalize_linear_part`` -- an affine gauge ``y = T(x, eps) w + phi0``
  built from a center-manifold shift, two Riccati series and two scalar
  integrals, reducing the linear part to the exact affine diagonal
  ``lam(x, eps) diag(1, -1)`` and leaving a remainder of second order in w.
* ``normalize_formal``        -- the order-by-order solution of the
  conjugacy equation between the prepared system and the model
  ``x(x - eps) v' = alpha(v1 v2, x, eps) diag(1, -1) v``, followed by the
  reduction of alpha to its affine-in-x part by a torus gauge.  All
  integrals are realized as coefficient-level linear solves; matching
  powers of x and eps selects the bounded solution automatically.
* ``directional_sum`` / ``borel_laplace`` -- numerical Borel sums of the
  divergent series along a ray of direction theta, by Pade continuation
  of the Borel transform and Gauss-Laguerre quadrature on the rotated ray.
* ``stokes_isotropy_structure`` -- given two sectoral realizations on an
  overlap, fits the transition map in the coordinates of the model's
  first integral and checks its characteristic triangular structure.

Everything formal is plain coefficient arithmetic on ``TruncatedSeries``;
nothing here integrates along paths.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .model import e_chi
from .normalform import FormalInvariant
from .series import TruncatedSeries

__all__ = [
    "BudgetError",
    "SingularDirectionError",
    "OrderTooLowError",
    "CenterManifoldSeries",
    "center_manifold_series",
    "PrenormalSystem",
    "prenormalize_traceless_linear",
    "DiagonalizingGauge",
    "DiagonalSystem",
    "diagonalize_linear_part",
    "NormalizationSeries",
    "normalize_formal",
    "DirectionalSumValue",
    "directional_sum",
    "BorelLaplaceValue",
    "borel_laplace",
    "SectoralFrame",
    "gauge_sectoral_frame",
    "IsotropyFit",
    "stokes_isotropy_structure",
    "default_c_samples",
]

_U = ("u1", "u2")
_CTX = ("u1", "u2", "x", "eps")


class BudgetError(ValueError):
    """An input series does not carry enough orders for the requested jet."""


class SingularDirectionError(ValueError):
    """The summation ray passes too close to a Borel-plane singularity."""


class OrderTooLowError(ValueError):
    """The truncation error bound exceeds the requested tolerance."""

    def __init__(self, message: str, suggested_order: int):
        super().__init__(message)
        self.suggested_order = int(suggested_order)


# ---------------------------------------------------------------------------
# small coefficient utilities


def _cast(s: TruncatedSeries, variables: Sequence[str], orders: Sequence[int]) -> TruncatedSeries:
    """Re-express ``s`` in the given context.

    Variables absent from the target must not occur in ``s``; coefficients
    beyond the target orders are dropped (jet truncation, never an error).
    """
    tgt = tuple(variables)
    pos = {v: i for i, v in enumerate(tgt)}
    for i, v in enumerate(s.vars):
        if v not in pos and any(k[i] for k in s.coeffs):
            raise ValueError(f"cannot drop live variable {v!r}")
    ords = tuple(int(o) for o in orders)
    out: dict[tuple[int, ...], complex] = {}
    for k, c in s.terms():
        key = [0] * len(tgt)
        ok = True
        for v, e in zip(s.vars, k):
            if e == 0:
                continue
            j = pos[v]
            if e > ords[j]:
                ok = False
                break
            key[j] = e
        if ok:
            out[tuple(key)] = out.get(tuple(key), 0.0) + c
    return TruncatedSeries(tgt, ords, out)


def _state_degree(s: TruncatedSeries) -> int:
    """Total degree of ``s`` in the state variables u1, u2 alone."""
    idx = [i for i, v in enumerate(s.vars) if v in _U]
    return max((sum(k[i] for i in idx) for k in s.coeffs), default=0)


def _xe_table(s: TruncatedSeries) -> dict[tuple[int, int], complex]:
    """Coefficient table {(x_exp, eps_exp): c} of a series in x/eps only."""
    ix = s.vars.index("x") if "x" in s.vars else None
    ie = s.vars.index("eps") if "eps" in s.vars else None
    for i, v in enumerate(s.vars):
        if v not in ("x", "eps") and any(k[i] for k in s.coeffs):
            raise ValueError(f"series has a live variable {v!r} besides x/eps")
    tab: dict[tuple[int, int], complex] = {}
    for k, c in s.terms():
        a = k[ix] if ix is not None else 0
        b = k[ie] if ie is not None else 0
        tab[(a, b)] = tab.get((a, b), 0.0) + c
    return tab


def _xe_series(tab: Mapping[tuple[int, int], complex], order_x: int, order_eps: int) -> TruncatedSeries:
    return TruncatedSeries(
        ("x", "eps"), (order_x, order_eps), {(a, b): c for (a, b), c in tab.items()}
    )


def _xxe(variables: Sequence[str], orders: Sequence[int]) -> TruncatedSeries:
    """The polynomial x*(x - eps) in the given context."""
    vs = tuple(variables)
    ords = tuple(orders)
    ix = vs.index("x")
    key2 = tuple(2 if i == ix else 0 for i in range(len(vs)))
    if "eps" in vs:
        ie = vs.index("eps")
        key11 = tuple(
            (1 if i == ix else 0) + (1 if i == ie else 0) for i in range(len(vs))
        )
        return TruncatedSeries(vs, ords, {key2: 1.0, key11: -1.0})
    return TruncatedSeries(vs, ords, {key2: 1.0})


def _split_xxe_groups(s: TruncatedSeries) -> tuple[float, dict[tuple[int, ...], complex]]:
    """Split every (state-monomial) slice of ``s`` as s0 + x*s1 + x(x-eps)*rho.

    Returns ``(aff_max, rho_coeffs)`` where ``aff_max`` is the largest
    affine-part magnitude (the obstruction to divisibility by x(x-eps))
    and ``rho_coeffs`` the quotient coefficients in the same context.
    The top ``eps_order`` x-orders of the quotient are incomplete; callers
    keep margins.
    """
    if "x" not in s.vars:
        return s.max_abs_coeff(), {}
    ix = s.vars.index("x")
    ie = s.vars.index("eps") if "eps" in s.vars else None
    X = s.orders[ix]
    J = s.orders[ie] if ie is not None else 0
    groups: dict[tuple[int, ...], dict[tuple[int, int], complex]] = {}
    for k, c in s.terms():
        a = k[ix]
        b = k[ie] if ie is not None else 0
        ukey = tuple(
            0 if i in (ix, ie) else e for i, e in enumerate(k)
        )
        groups.setdefault(ukey, {})[(a, b)] = c
    aff = 0.0
    rho_out: dict[tuple[int, ...], complex] = {}
    for ukey, tab in groups.items():
        rho: dict[tuple[int, int], complex] = {}
        for b in range(J + 1):
            for a in range(X, 1, -1):
                val = tab.get((a, b), 0.0) + rho.get((a - 1, b - 1), 0.0)
                if val:
                    rho[(a - 2, b)] = val
        for b in range(J + 1):
            aff = max(aff, abs(tab.get((0, b), 0.0)))
            aff = max(aff, abs(tab.get((1, b), 0.0) + rho.get((0, b - 1), 0.0)))
        for (p, q), c in rho.items():
            key = list(ukey)
            key[ix] = p
            if ie is not None:
                key[ie] = q
            elif q:
                continue
            rho_out[tuple(key)] = c
    return aff, rho_out


def _div_xxe(s: TruncatedSeries, *, what: str = "series", tol: float = 1e-9) -> TruncatedSeries:
    """Exact division by x(x - eps); raises if ``s`` is not divisible."""
    scale = max(1.0, s.max_abs_coeff())
    aff, rho = _split_xxe_groups(s)
    if aff > tol * scale:
        raise ValueError(
            f"{what} is not divisible by x*(x - eps): "
            f"affine residual {aff:.3e} exceeds {tol:.1e} * scale"
        )
    ords = list(s.orders)
    ords[s.vars.index("x")] = max(0, ords[s.vars.index("x")] - 2)
    return TruncatedSeries(s.vars, ords, rho)


def _affine_split_xe(s: TruncatedSeries) -> tuple[dict[int, complex], dict[int, complex], dict[tuple[int, int], complex]]:
    """Split an x/eps series as s0(eps) + x*s1(eps) + x(x-eps)*rho(x,eps).

    Returns coefficient dictionaries (s0 by eps power, s1 by eps power,
    rho by (x, eps) powers).
    """
    tab = _xe_table(s)
    X = s.orders[s.vars.index("x")] if "x" in s.vars else 0
    J = s.orders[s.vars.index("eps")] if "eps" in s.vars else 0
    rho: dict[tuple[int, int], complex] = {}
    for b in range(J + 1):
        for a in range(X, 1, -1):
            val = tab.get((a, b), 0.0) + rho.get((a - 1, b - 1), 0.0)
            if val:
                rho[(a - 2, b)] = val
    s0 = {b: tab[(0, b)] for b in range(J + 1) if (0, b) in tab}
    s1: dict[int, complex] = {}
    for b in range(J + 1):
        val = tab.get((1, b), 0.0) + rho.get((0, b - 1), 0.0)
        if val:
            s1[b] = val
    return s0, s1, rho


def _gevrey_fit(norms: Sequence[float]) -> tuple[float, float, tuple[float, ...]]:
    """Fit ``norms[n] <= C * L**n * n!`` from a sequence of jet norms.

    Returns ``(L, C, ratios)`` with ``ratios[n] = norms[n+1]/((n+1) norms[n])``
    (the quantity that stabilizes near L for factorial growth).  L is the
    largest ratio over the second half of the usable range -- an estimate
    that is insensitive to low-order transients.
    """
    ratios: list[float] = []
    for n in range(len(norms) - 1):
        if norms[n] > 0.0 and norms[n + 1] > 0.0:
            ratios.append(norms[n + 1] / ((n + 1) * norms[n]))
        else:
            ratios.append(0.0)
    usable = [r for r in ratios if r > 0.0]
    if not usable:
        return 0.0, max(norms, default=0.0), tuple(ratios)
    tail = usable[max(0, len(usable) // 2) :]
    L = max(tail)
    C = 0.0
    for n, v in enumerate(norms):
        if v > 0.0 and L > 0.0:
            C = max(C, v / (L ** n * math.factorial(n)))
    return L, C, tuple(ratios)


def _budget_cast(
    s: TruncatedSeries,
    variables: Sequence[str],
    orders: Sequence[int],
    *,
    pad_polynomial: bool,
    what: str,
) -> TruncatedSeries:
    """Cast with an order-budget check on x and eps.

    If ``s`` stores fewer x/eps orders than requested, the missing
    coefficients are treated as exactly zero when ``pad_polynomial`` is
    true (correct for polynomial data); otherwise a BudgetError explains
    what is missing.
    """
    if not pad_polynomial:
        for v, o in zip(variables, orders):
            if v in ("x", "eps") and v in s.vars:
                have = s.orders[s.vars.index(v)]
                if have < o:
                    raise BudgetError(
                        f"{what} carries {v}-order {have} but the requested "
                        f"truncation needs {o}; raise the input order or pass "
                        f"pad_polynomial=True if higher coefficients vanish identically"
                    )
            elif v in ("x", "eps") and v not in s.vars and o > 0:
                # an absent variable is a zero-order jet: constant in v
                pass
    return _cast(s, variables, orders)


# ---------------------------------------------------------------------------
# center manifolds: x(x-eps) phi' = M phi + f(phi, x, eps)


@dataclass(frozen=True)
class CenterManifoldSeries:
    """Formal center-manifold expansion ``phi(x, eps) = sum phi_kj x^k eps^j``.

    ``components`` are series in (x, eps), one per state dimension.  The
    expansion is the unique formal solution of
    ``x(x - eps) phi' = M phi + f(phi, x, eps)``; it vanishes on both
    singular slices (x = 0 and x = eps) and its coefficient norms obey the
    factorial bound ``|phi_n| <= gevrey_C * gevrey_L**n * n!`` over the
    computed range.
    """

    components: tuple[TruncatedSeries, ...]
    order_x: int
    order_eps: int
    gevrey_L: float
    gevrey_C: float
    gevrey_ratios: tuple[float, ...]
    plugback_residual: float
    slice_residual: float

    @property
    def dimension(self) -> int:
        return len(self.components)

    def coefficient(self, k: int, j: int = 0) -> np.ndarray:
        return np.array(
            [comp.coeff({"x": k, "eps": j}) for comp in self.components],
            dtype=np.complex128,
        )

    def coefficient_norms(self) -> list[float]:
        """Max-norm of the coefficient vectors per total order k + j."""
        norms = [0.0] * (self.order_x + self.order_eps + 1)
        for comp in self.components:
            for key, c in comp.terms():
                tab = dict(zip(comp.vars, key))
                n = tab.get("x", 0) + tab.get("eps", 0)
                norms[n] = max(norms[n], abs(c))
        return norms

    def value(self, x: complex, eps: complex = 0.0) -> np.ndarray:
        """Partial-sum evaluation (useful only well inside the Gevrey range)."""
        return np.array(
            [comp(x=x, eps=eps) for comp in self.components], dtype=np.complex128
        )


def center_manifold_series(
    linear_part,
    remainder,
    order_x: int,
    order_eps: int = 0,
    *,
    pad_polynomial: bool = True,
    tol: float = 1e-9,
) -> CenterManifoldSeries:
    """Solve ``x(x - eps) phi' = M phi + f(phi, x, eps)`` order by order.

    ``linear_part`` is an invertible scalar or 2x2 matrix M; ``remainder``
    is one series (scalar problem, state variable "u1") or a pair of series
    (state variables "u1", "u2") in the state and (x, eps).  Required shape
    of f: no state-linear term at x = eps = 0 (such terms belong to M) and
    f(0, x, eps) divisible by x(x - eps).  Matching powers of x and eps
    makes the coefficient recursion triangular:

        M phi_ab = (a-1) phi_{a-1,b} - a phi_{a,b-1} - [f(phi)]_ab,

    which simultaneously selects the solution vanishing on both slices.
    """
    M = np.atleast_2d(np.asarray(linear_part, dtype=np.complex128))
    if M.shape[0] != M.shape[1]:
        raise ValueError("linear part must be square")
    m = M.shape[0]
    if m not in (1, 2):
        raise ValueError("only one- and two-dimensional states are supported")
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= 1e-13 * max(1.0, sv[0]):
        raise ValueError("linear part must be invertible (center direction is x alone)")

    comps_in = (remainder,) if isinstance(remainder, TruncatedSeries) else tuple(remainder)
    if len(comps_in) != m:
        raise ValueError(f"remainder has {len(comps_in)} components for a {m}-dimensional state")
    state = _U[:m]
    X, J = int(order_x), int(order_eps)
    ctx = state + ("x", "eps")
    uord = max(max((c.degree(v) for v in state if v in c.vars), default=0) for c in comps_in)
    uord = max(uord, 1)
    ords = (uord,) * m + (X, J)
    f = tuple(
        _budget_cast(c, ctx, ords, pad_polynomial=pad_polynomial, what="remainder")
        for c in comps_in
    )

    scale = max(1.0, max(c.max_abs_coeff() for c in f))
    # precondition: no state-linear term at the origin of (x, eps)
    for i, comp in enumerate(f):
        for v in state:
            key = {v: 1}
            if abs(comp.coeff({**key, "x": 0, "eps": 0})) > tol * scale:
                raise ValueError(
                    "remainder carries a state-linear term at x = eps = 0; "
                    "it belongs in the linear part"
                )
    # precondition: the state-free slice must vanish at both singular slices
    for comp in f:
        flat = {}
        for k, c in comp.terms():
            tab = dict(zip(comp.vars, k))
            if all(tab.get(v, 0) == 0 for v in state):
                flat[(tab.get("x", 0), tab.get("eps", 0))] = c
        if flat:
            s0, s1, _ = _affine_split_xe(_xe_series(flat, X, J))
            bad = max([abs(v) for v in s0.values()] + [abs(v) for v in s1.values()], default=0.0)
            if bad > tol * scale:
                raise ValueError(
                    "remainder evaluated at zero state must be divisible by "
                    f"x*(x - eps); affine residual {bad:.3e}"
                )

    zero_vec = np.zeros(m, dtype=np.complex128)
    coeffs: dict[tuple[int, int], np.ndarray] = {}
    phi = [TruncatedSeries.zero(("x", "eps"), (X, J)) for _ in range(m)]

    def rebuild() -> None:
        for i in range(m):
            phi[i] = TruncatedSeries(
                ("x", "eps"), (X, J),
                {(a, b): vec[i] for (a, b), vec in coeffs.items() if vec[i] != 0},
            )

    for n in range(1, X + J + 1):
        fsub = []
        for comp in f:
            assignment = {v: phi[j] for j, v in enumerate(state) if v in comp.vars}
            res = comp.subs(assignment) if assignment else comp
            if isinstance(res, complex):
                res = TruncatedSeries.constant(res, ("x", "eps"), (X, J))
            else:
                res = _cast(res, ("x", "eps"), (X, J))
            fsub.append(res)
        for a in range(min(n, X), -1, -1):
            b = n - a
            if b > J:
                continue
            fv = np.array([fs.coeff({"x": a, "eps": b}) for fs in fsub])
            rhs = (
                (a - 1) * coeffs.get((a - 1, b), zero_vec)
                - a * coeffs.get((a, b - 1), zero_vec)
                - fv
            )
            vec = np.linalg.solve(M, rhs)
            if np.any(vec != 0):
                coeffs[(a, b)] = vec
        rebuild()

    # diagnostics: independent plug-back through series arithmetic
    xxe = _xxe(("x", "eps"), (X, J))
    fsub_final = []
    for comp in f:
        assignment = {v: phi[j] for j, v in enumerate(state) if v in comp.vars}
        res = comp.subs(assignment) if assignment else comp
        if isinstance(res, complex):
            res = TruncatedSeries.constant(res, ("x", "eps"), (X, J))
        else:
            res = _cast(res, ("x", "eps"), (X, J))
        fsub_final.append(res)
    plugback = 0.0
    for i in range(m):
        dphi = _cast(phi[i].derive("x"), ("x", "eps"), (X, J))
        lin = TruncatedSeries.zero(("x", "eps"), (X, J))
        for j in range(m):
            if M[i, j] != 0:
                lin = lin + phi[j] * M[i, j]
        resid = xxe * dphi - lin - fsub_final[i]
        plugback = max(plugback, _cast(resid, ("x", "eps"), (X, J)).max_abs_coeff())

    # both singular slices must carry the zero function
    slice_res = 0.0
    for i in range(m):
        for b in range(J + 1):
            slice_res = max(slice_res, abs(phi[i].coeff({"x": 0, "eps": b})))
        eps_slice: dict[int, complex] = {}
        for (a, b), vec in coeffs.items():
            t = a + b
            if t <= min(X, J):
                eps_slice[t] = eps_slice.get(t, 0.0) + vec[i]
        slice_res = max(slice_res, max((abs(v) for v in eps_slice.values()), default=0.0))

    norms = [0.0] * (X + J + 1)
    for (a, b), vec in coeffs.items():
        norms[a + b] = max(norms[a + b], float(np.max(np.abs(vec))))
    L, C, ratios = _gevrey_fit(norms)

    return CenterManifoldSeries(
        components=tuple(phi),
        order_x=X,
        order_eps=J,
        gevrey_L=L,
        gevrey_C=C,
        gevrey_ratios=ratios,
        plugback_residual=plugback,
        slice_residual=slice_res,
    )


# ---------------------------------------------------------------------------
# prenormal systems and the diagonalizing affine gauge


@dataclass(frozen=True)
class PrenormalSystem:
    """A system ``x(x-eps) y' = G(y, x, eps)`` whose right-hand side equals
    ``chi(y1 y2, x, eps) diag(1, -1) y`` modulo terms divisible by x(x-eps),
    with chi affine in x.

    ``rhs`` are the two components of G in variables (u1, u2, x, eps);
    ``inv`` packages chi.  ``prenormal_residual`` records how well the
    defining shape is satisfied (exact zero for honest inputs).
    """

    rhs: tuple[TruncatedSeries, TruncatedSeries]
    inv: FormalInvariant
    prenormal_residual: float = 0.0

    @classmethod
    def from_rhs(
        cls,
        rhs1: TruncatedSeries,
        rhs2: TruncatedSeries,
        *,
        tol: float = 1e-8,
    ) -> "PrenormalSystem":
        """Extract chi from the resonant diagonal of (rhs1, rhs2) and verify
        that everything else vanishes at both singular slices."""
        X = max(
            rhs1.orders[rhs1.vars.index("x")] if "x" in rhs1.vars else 0,
            rhs2.orders[rhs2.vars.index("x")] if "x" in rhs2.vars else 0,
        )
        J = max(
            rhs1.orders[rhs1.vars.index("eps")] if "eps" in rhs1.vars else 0,
            rhs2.orders[rhs2.vars.index("eps")] if "eps" in rhs2.vars else 0,
        )
        du = max(_state_degree(rhs1), _state_degree(rhs2), 1)
        ords = (du, du, X, J)
        g1 = _cast(rhs1, _CTX, ords)
        g2 = _cast(rhs2, _CTX, ords)
        scale = max(1.0, g1.max_abs_coeff(), g2.max_abs_coeff())

        def resonant_tables(g: TruncatedSeries, which: int) -> dict[int, dict[tuple[int, int], complex]]:
            iu1, iu2 = g.vars.index("u1"), g.vars.index("u2")
            ix, ie = g.vars.index("x"), g.vars.index("eps")
            out: dict[int, dict[tuple[int, int], complex]] = {}
            for k, c in g.terms():
                p, q = k[iu1], k[iu2]
                if which == 1 and p == q + 1:
                    out.setdefault(q, {})[(k[ix], k[ie])] = c
                if which == 2 and q == p + 1:
                    out.setdefault(p, {})[(k[ix], k[ie])] = c
            return out

        c_tabs = resonant_tables(g1, 1)
        d_tabs = resonant_tables(g2, 2)
        hmax = max(list(c_tabs) + list(d_tabs) + [0])
        chi0_coeffs: dict[tuple[int, int], complex] = {}
        chi1_coeffs: dict[tuple[int, int], complex] = {}
        mismatch = 0.0
        for n in range(hmax + 1):
            c0, c1, _ = _affine_split_xe(_xe_series(c_tabs.get(n, {}), X, J))
            d0, d1, _ = _affine_split_xe(_xe_series(d_tabs.get(n, {}), X, J))
            for b in range(J + 1):
                cv0, cv1 = c0.get(b, 0.0), c1.get(b, 0.0)
                mismatch = max(mismatch, abs(cv0 + d0.get(b, 0.0)), abs(cv1 + d1.get(b, 0.0)))
                if cv0:
                    chi0_coeffs[(n, b)] = cv0
                if cv1:
                    chi1_coeffs[(n, b)] = cv1
        if mismatch > tol * scale:
            raise ValueError(
                "the two components disagree on the resonant diagonal "
                f"(residual {mismatch:.3e}); not a prenormal system"
            )
        chi0 = TruncatedSeries(("h", "eps"), (hmax, J), chi0_coeffs)
        chi1 = TruncatedSeries(("h", "eps"), (hmax, J), chi1_coeffs)
        inv = FormalInvariant(chi0, chi1)

        chi_v = _chi_on_product(inv, du, X, J)
        u1v = TruncatedSeries.variable("u1", _CTX, ords)
        u2v = TruncatedSeries.variable("u2", _CTX, ords)
        res = 0.0
        for g, uv, sgn in ((g1, u1v, +1.0), (g2, u2v, -1.0)):
            defect = g - chi_v * uv * sgn
            aff, _ = _split_xxe_groups(defect)
            res = max(res, aff)
        if res > tol * scale:
            raise ValueError(
                "off-resonant terms do not vanish at the singular slices "
                f"(residual {res:.3e}); apply an eigenvector gauge first"
            )
        return cls(rhs=(g1, g2), inv=inv, prenormal_residual=res)

    def lam00(self) -> complex:
        return self.inv.chi0.coeff({"h": 0, "eps": 0})


def _chi_on_product(inv: FormalInvariant, du: int, X: int, J: int) -> TruncatedSeries:
    """chi(u1*u2, x, eps) as a series in the full context."""
    ords = (du, du, X, J)
    out = TruncatedSeries.zero(_CTX, ords)
    hmax = min(inv.chi0.orders[inv.chi0.vars.index("h")], du // 2 if du >= 2 else 0)
    for n in range(hmax + 1):
        tab: dict[tuple[int, ...], complex] = {}
        for (hexp, b), c in list(_h_eps_items(inv.chi0)):
            if hexp == n and b <= J:
                tab[(n, n, 0, b)] = tab.get((n, n, 0, b), 0.0) + c
        for (hexp, b), c in list(_h_eps_items(inv.chi1)):
            if hexp == n and b <= J and X >= 1:
                tab[(n, n, 1, b)] = tab.get((n, n, 1, b), 0.0) + c
        if tab:
            out = out + TruncatedSeries(_CTX, ords, tab)
    return out


def _h_eps_items(s: TruncatedSeries) -> Iterable[tuple[tuple[int, int], complex]]:
    ih = s.vars.index("h") if "h" in s.vars else None
    ie = s.vars.index("eps") if "eps" in s.vars else None
    for k, c in s.terms():
        hexp = k[ih] if ih is not None else 0
        b = k[ie] if ie is not None else 0
        yield (hexp, b), c


def prenormalize_traceless_linear(
    a_entry,
    b_entry,
    c_entry,
    *,
    order_x: int,
    order_eps: int = 0,
    tol: float = 1e-9,
):
    """Eigenvector gauge for a traceless linear family A = [[a, b], [c, -a]].

    Builds a unimodular series gauge ``C(x, eps)`` whose columns are
    eigenvectors of A for the eigenvalues ``+-lam_tilde``,
    ``lam_tilde = sqrt(a^2 + b c)``, normalized so that det C = 1 and the
    x = 0 slice of C is balanced (equal diagonal, or equal anti-diagonal
    when the diagonal degenerates).  The transformed system

        x(x-eps) u' = lam_tilde diag(1,-1) u - x(x-eps) C^{-1} C' u

    is prenormal; the x(x-eps)-divisible part of lam_tilde is folded into
    the remainder by the chi-extraction.  Returns
    ``(PrenormalSystem, C_entries, lam_tilde)``.
    """
    X, J = int(order_x), int(order_eps)
    xe = ("x", "eps")

    def as_xe(v) -> TruncatedSeries:
        if isinstance(v, TruncatedSeries):
            return _cast(v, xe, (X, J))
        return TruncatedSeries.constant(complex(v), xe, (X, J))

    a = as_xe(a_entry)
    b = as_xe(b_entry)
    c = as_xe(c_entry)
    disc = a * a + b * c
    if abs(disc.constant_term()) < 1e-13:
        raise ValueError("eigenvalues collide at x = eps = 0; no eigenvector gauge")
    lam_t = disc.sqrt()

    # eigenvector candidates; pick the better-conditioned representative
    def pick(opts):
        def weight(v):
            return max(abs(v[0].constant_term()), abs(v[1].constant_term()))
        return max(opts, key=weight)

    vp = pick([(b, lam_t - a), (lam_t + a, c)])
    vm = pick([(b, -lam_t - a), (lam_t - a, -c)])
    det = vp[0] * vm[1] - vp[1] * vm[0]
    if abs(det.constant_term()) < 1e-13:
        raise ValueError("eigenvector matrix is singular at the origin")
    scale = det.sqrt().inverse()
    C = [[vp[0] * scale, vm[0] * scale], [vp[1] * scale, vm[1] * scale]]

    # balance the x = 0 slice to pin the residual torus freedom
    c11_0 = C[0][0].coeff({"x": 0, "eps": 0})
    c22_0 = C[1][1].coeff({"x": 0, "eps": 0})
    c12_0 = C[0][1].coeff({"x": 0, "eps": 0})
    c21_0 = C[1][0].coeff({"x": 0, "eps": 0})
    if abs(c11_0 * c22_0) >= abs(c12_0 * c21_0):
        ratio = _x_zero_slice(C[1][1], J) * _x_zero_slice(C[0][0], J).inverse()
    else:
        ratio = _x_zero_slice(C[0][1], J) * _x_zero_slice(C[1][0], J).inverse()
    d = _cast(ratio.sqrt(), xe, (X, J))
    dinv = d.inverse()
    C = [[C[0][0] * d, C[0][1] * dinv], [C[1][0] * d, C[1][1] * dinv]]

    det_res = (C[0][0] * C[1][1] - C[0][1] * C[1][0] - 1.0).max_abs_coeff()
    if det_res > tol:
        raise ValueError(f"gauge normalization failed: |det C - 1| = {det_res:.3e}")

    # transformed right-hand side
    Cp = [[C[i][j].derive("x") for j in range(2)] for i in range(2)]
    Cp = [[_cast(Cp[i][j], xe, (X, J)) for j in range(2)] for i in range(2)]
    # C^{-1} = adj(C) since det C = 1
    Cinv = [[C[1][1], -1.0 * C[0][1]], [-1.0 * C[1][0], C[0][0]]]
    P = [
        [
            Cinv[i][0] * Cp[0][j] + Cinv[i][1] * Cp[1][j]
            for j in range(2)
        ]
        for i in range(2)
    ]
    ords = (1, 1, X, J)
    u1v = TruncatedSeries.variable("u1", _CTX, ords)
    u2v = TruncatedSeries.variable("u2", _CTX, ords)
    xxe = _xxe(_CTX, ords)

    def emb(s):
        return _cast(s, _CTX, ords)

    rhs1 = emb(lam_t) * u1v - xxe * (emb(P[0][0]) * u1v + emb(P[0][1]) * u2v)
    rhs2 = -1.0 * emb(lam_t) * u2v - xxe * (emb(P[1][0]) * u1v + emb(P[1][1]) * u2v)
    pre = PrenormalSystem.from_rhs(rhs1, rhs2, tol=max(tol, 1e-8))
    return pre, tuple(tuple(row) for row in C), lam_t


def _x_zero_slice(s: TruncatedSeries, J: int) -> TruncatedSeries:
    tab = _xe_table(s)
    return TruncatedSeries(("eps",), (J,), {(b,): c for (a, b), c in tab.items() if a == 0})


@dataclass(frozen=True)
class DiagonalSystem:
    """``x(x-eps) w' = chi(w1 w2, x, eps) diag(1,-1) w + x(x-eps) f(w, x, eps)``
    with chi affine in x and f of second order in the state."""

    inv: FormalInvariant
    f: tuple[TruncatedSeries, TruncatedSeries]

    @classmethod
    def model(cls, inv: FormalInvariant, *, order_u: int = 6, order_x: int = 8, order_eps: int = 4) -> "DiagonalSystem":
        """The integrable model itself: zero remainder."""
        ords = (order_u, order_u, order_x, order_eps)
        z = TruncatedSeries.zero(_CTX, ords)
        return cls(inv=inv, f=(z, z))


@dataclass(frozen=True)
class DiagonalizingGauge:
    """Affine gauge ``y = T(x, eps) w + phi0(x, eps)`` with
    ``T = [[1, t1], [t2, 1]] diag(exp(b1), exp(b2))`` reducing the linear
    part of a prenormal system to the exact affine diagonal."""

    phi0: CenterManifoldSeries
    t1: TruncatedSeries
    t2: TruncatedSeries
    b1: TruncatedSeries
    b2: TruncatedSeries
    T: tuple[tuple[TruncatedSeries, TruncatedSeries], tuple[TruncatedSeries, TruncatedSeries]]
    det_residual: float
    system: DiagonalSystem
    divergence_residual: float
    flatness_residual: float
    inv: FormalInvariant


def diagonalize_linear_part(
    pre: PrenormalSystem,
    *,
    order_x: int,
    order_eps: int = 0,
    pad_polynomial: bool = True,
    tol: float = 1e-8,
) -> DiagonalizingGauge:
    """Reduce the linear part of a prenormal system to ``lam(x,eps) diag(1,-1)``.

    The construction runs in four coefficient-level steps: a center-manifold
    shift ``phi0`` (the formal solution passing through both singular
    points), the exact division R = (A - lam diag)/(x(x-eps)) of the shifted
    linear part, two Riccati center-manifold series t1, t2 killing the
    off-diagonal of R, and the diagonal integrals b1, b2 absorbing what is
    left.  For divergence-free inputs det T = 1 holds identically through
    the truncation.  The transformed remainder f (second order in the state)
    together with the untouched invariant chi forms the returned
    DiagonalSystem.

    Order budget: the chain performs two exact divisions by x(x-eps), each
    of which consumes two x-orders, so the input must carry x-order
    ``order_x + order_eps + 4`` (checked when ``pad_polynomial`` is false;
    polynomial inputs may rely on zero-padding instead).  The remainder f
    comes back complete through ``order_x``; the gauge series t1, t2, b1,
    b2 through ``order_x + order_eps + 2``.
    """
    J = int(order_eps)
    X = int(order_x) + J + 4
    inv = pre.inv
    lam00 = pre.lam00()
    if abs(lam00) < 1e-12:
        raise ValueError("chi(0,0,0) = 0: the singular points are not hyperbolic")

    du = max(_state_degree(pre.rhs[0]), _state_degree(pre.rhs[1]), 2)
    ords = (du, du, X, J)
    g1 = _budget_cast(pre.rhs[0], _CTX, ords, pad_polynomial=pad_polynomial, what="right-hand side")
    g2 = _budget_cast(pre.rhs[1], _CTX, ords, pad_polynomial=pad_polynomial, what="right-hand side")

    u1v = TruncatedSeries.variable("u1", _CTX, ords)
    u2v = TruncatedSeries.variable("u2", _CTX, ords)

    # 1. center-manifold shift through both singular points
    M = np.array([[lam00, 0.0], [0.0, -lam00]], dtype=np.complex128)
    f_cm = (g1 - lam00 * u1v, g2 + lam00 * u2v)
    phi0 = center_manifold_series(M, f_cm, X, J, pad_polynomial=True, tol=tol)

    # 2. shifted linear part and its x(x-eps)-quotient
    ph1 = _cast(phi0.components[0], _CTX, ords)
    ph2 = _cast(phi0.components[1], _CTX, ords)
    A = [[None, None], [None, None]]
    for i, g in enumerate((g1, g2)):
        for j, v in enumerate(_U):
            der = g.derive(v)
            sub = der.subs({"u1": ph1, "u2": ph2})
            if isinstance(sub, complex):
                sub = TruncatedSeries.constant(sub, ("x", "eps"), (X, J))
            A[i][j] = _cast(sub, ("x", "eps"), (X, J))
    lam_xe = _cast(inv.lam0().embedded(("x", "eps"), (X, J)), ("x", "eps"), (X, J)) + _cast(
        inv.lam1().embedded(("x", "eps"), (X, J)), ("x", "eps"), (X, J)
    ) * TruncatedSeries.variable("x", ("x", "eps"), (X, J))
    R = [[None, None], [None, None]]
    R[0][0] = _div_xxe(A[0][0] - lam_xe, what="A11 - lam", tol=tol)
    R[1][1] = _div_xxe(A[1][1] + lam_xe, what="A22 + lam", tol=tol)
    R[0][1] = _div_xxe(A[0][1], what="A12", tol=tol)
    R[1][0] = _div_xxe(A[1][0], what="A21", tol=tol)
    XR = X - 2
    R = [[_cast(R[i][j], ("x", "eps"), (XR, J)) for j in range(2)] for i in range(2)]

    # 3. Riccati series for the off-diagonal directions
    t_ords = (2, XR, J)
    t_ctx = ("u1", "x", "eps")
    tv = TruncatedSeries.variable("u1", t_ctx, t_ords)
    xxe_t = _xxe(t_ctx, t_ords)
    lam_dev = _cast(lam_xe, t_ctx, t_ords) - lam00

    def riccati(sign: float, r_drive, r_diag, r_quad) -> TruncatedSeries:
        f_t = (
            2.0 * sign * lam_dev * tv
            + xxe_t
            * (
                _cast(r_drive, t_ctx, t_ords)
                + sign * (_cast(r_diag, t_ctx, t_ords)) * tv
                - _cast(r_quad, t_ctx, t_ords) * tv * tv
            )
        )
        cm = center_manifold_series(2.0 * sign * lam00, f_t, XR, J, pad_polynomial=True, tol=tol)
        return cm.components[0]

    t1 = riccati(+1.0, R[0][1], R[0][0] - R[1][1], R[1][0])
    t2 = riccati(-1.0, R[1][0], R[1][1] - R[0][0], R[0][1])

    # 4. diagonal integrals
    b1 = _cast((R[0][0] + R[0][1] * t2).integrate("x"), ("x", "eps"), (XR, J))
    b2 = _cast((R[1][1] + R[1][0] * t1).integrate("x"), ("x", "eps"), (XR, J))
    e1 = b1.exp()
    e2 = b2.exp()
    T11, T12 = e1, t1 * e2
    T21, T22 = t2 * e1, e2
    detT = T11 * T22 - T12 * T21
    det_residual = (detT - 1.0).max_abs_coeff()

    # transformed system: w-RHS = T^{-1} [G(T w + phi0) - x(x-eps)(T' w + phi0')]
    arg1 = _cast(T11, _CTX, ords) * u1v + _cast(T12, _CTX, ords) * u2v + _cast(ph1, _CTX, ords)
    arg2 = _cast(T21, _CTX, ords) * u1v + _cast(T22, _CTX, ords) * u2v + _cast(ph2, _CTX, ords)
    xxe = _xxe(_CTX, ords)
    Gw = []
    for g in (g1, g2):
        sub = g.subs({"u1": arg1, "u2": arg2})
        Gw.append(_cast(sub, _CTX, ords).truncate_total_degree(du, _U))
    dT = [
        _cast(T11.derive("x"), _CTX, ords) * u1v
        + _cast(T12.derive("x"), _CTX, ords) * u2v
        + _cast(phi0.components[0].derive("x"), _CTX, ords),
        _cast(T21.derive("x"), _CTX, ords) * u1v
        + _cast(T22.derive("x"), _CTX, ords) * u2v
        + _cast(phi0.components[1].derive("x"), _CTX, ords),
    ]
    V1 = Gw[0] - xxe * dT[0]
    V2 = Gw[1] - xxe * dT[1]
    det_inv = _cast(detT, _CTX, ords).inverse()
    rhsw1 = (_cast(T22, _CTX, ords) * V1 - _cast(T12, _CTX, ords) * V2) * det_inv
    rhsw2 = (-1.0 * _cast(T21, _CTX, ords) * V1 + _cast(T11, _CTX, ords) * V2) * det_inv
    rhsw1 = rhsw1.truncate_total_degree(du, _U)
    rhsw2 = rhsw2.truncate_total_degree(du, _U)

    chi_v = _chi_on_product(inv, du, X, J)
    f1 = _div_xxe(rhsw1 - chi_v * u1v, what="transformed remainder (first component)", tol=max(tol, 1e-7))
    f2 = _div_xxe(rhsw2 + chi_v * u2v, what="transformed remainder (second component)", tol=max(tol, 1e-7))

    flat = 0.0
    for fj in (f1, f2):
        iu1, iu2 = fj.vars.index("u1"), fj.vars.index("u2")
        for k, c in fj.terms():
            if k[iu1] + k[iu2] <= 1:
                flat = max(flat, abs(c))
    div = _cast(f1.derive("u1"), _CTX, ords) + _cast(f2.derive("u2"), _CTX, ords)
    divergence_residual = div.max_abs_coeff()

    system = DiagonalSystem(inv=inv, f=(f1, f2))
    return DiagonalizingGauge(
        phi0=phi0,
        t1=t1,
        t2=t2,
        b1=b1,
        b2=b2,
        T=((T11, T12), (T21, T22)),
        det_residual=det_residual,
        system=system,
        divergence_residual=divergence_residual,
        flatness_residual=flat,
        inv=inv,
    )


# ---------------------------------------------------------------------------
# formal normalization to the integrable model


@dataclass(frozen=True)
class NormalizationSeries:
    """The formal normalization of a DiagonalSystem.

    ``transformation`` is the full change of coordinates
    ``w = Psi(u, x, eps)`` (a pair of series in (u1, u2, x, eps))
    conjugating the normalized model
    ``x(x-eps) u' = chi_tilde(u1 u2, eps, x) diag(1,-1) u`` to the input
    system; chi_tilde is affine in x and coincides with the input chi for
    divergence-free remainders.  ``model_transformation`` and ``alpha``
    record the intermediate stage in which the model coefficient
    ``alpha(h, x, eps)`` still carries arbitrary powers of x;
    ``gauge_exponent`` is the scalar integral B with
    ``u = exp(-B diag(1,-1)) v`` removing the x(x-eps)-divisible part beta
    of alpha.

    The slices psi0 = Psi|_{x=0} (exactly the identity in this gauge),
    psi1 = d/dx Psi|_{x=0} and the quotient coefficients
    psi_tilde[(k, l)] of (Psi - psi0 - x psi1)/(x(x-eps)) express the
    transformation in Laplace-ready form; their norms grow at most
    factorially, with the fitted rate in ``gevrey_L``.
    """

    transformation: tuple[TruncatedSeries, TruncatedSeries]
    model_transformation: tuple[TruncatedSeries, TruncatedSeries]
    alpha: TruncatedSeries
    chi_tilde: FormalInvariant
    beta: TruncatedSeries
    gauge_exponent: TruncatedSeries
    orders: tuple[int, int, int]
    psi0: tuple[TruncatedSeries, TruncatedSeries]
    psi1: tuple[TruncatedSeries, TruncatedSeries]
    psi_tilde: dict
    gevrey_L: float
    gevrey_C: float
    gevrey_ratios: tuple[float, ...]
    conjugacy_residual: float
    resonant_consistency: float
    sympl_residual: float
    chi_match_residual: float
    identity_residual: float
    division_residual: float
    inv: FormalInvariant

    def evaluate(self, u1: complex, u2: complex, x: complex, eps: complex = 0.0) -> np.ndarray:
        """Partial-sum value of the transformation (formal; use the Borel
        sums for honest sectoral values)."""
        return np.array(
            [t(u1=u1, u2=u2, x=x, eps=eps) for t in self.transformation],
            dtype=np.complex128,
        )

    def x_slice_norms(self, eps_power: int = 0) -> list[float]:
        """Max coefficient norm of each x-slice of the transformation at a
        fixed eps power -- the sequence whose ratios exhibit the factorial
        divergence of the normalizing series."""
        kmax = min(t.orders[t.vars.index("x")] for t in self.transformation)
        norms = [0.0] * (kmax + 1)
        for t in self.transformation:
            ix, ie = t.vars.index("x"), t.vars.index("eps")
            for k, c in t.terms():
                if k[ie] == eps_power:
                    norms[k[ix]] = max(norms[k[ix]], abs(c))
        return norms


def normalize_formal(
    sys: DiagonalSystem,
    *,
    mode: str = "joint",
    orders: tuple[int, int, int] = (6, 8, 4),
    pad_polynomial: bool = True,
    tol: float = 1e-8,
    stage_order_rng: Optional[np.random.Generator] = None,
) -> NormalizationSeries:
    """Conjugate a DiagonalSystem to its integrable model, order by order.

    ``orders = (order_u, order_x, order_eps)``: total degree in the state,
    jet order in x, jet order in eps.  ``mode="eps0"`` treats the confluent
    limit alone (forces the eps order to 0); ``mode="joint"`` keeps the
    full unfolding in eps.

    The unknown coefficients of the transformation solve, slot by slot,
    the linearized conjugacy equation

        x(x-eps) g' + k lam(x, eps) g = <current defect>,
        k = m1 - m2 -+ 1   for the (u1^m1 u2^m2)-slot of either component.

    Non-resonant slots (k != 0) are uniquely solvable by matching powers;
    resonant slots (k = 0) fix the model coefficient alpha instead, and
    their x-free obstruction vanishes identically (checked and reported in
    ``resonant_consistency``).  The iteration order inside a stage is
    immaterial; passing ``stage_order_rng`` shuffles it, which must not
    change any output coefficient.
    """
    K_u, K_x, J = (int(o) for o in orders)
    if mode == "eps0":
        J = 0
    elif mode != "joint":
        raise ValueError(f"mode must be 'eps0' or 'joint', got {mode!r}")
    if K_u < 2:
        raise ValueError("the state order must be at least 2")
    X = K_x + J + 2
    ords = (K_u, K_u, X, J)
    inv = sys.inv
    lam00 = inv.chi0.coeff({"h": 0, "eps": 0})
    if abs(lam00) < 1e-12:
        raise ValueError("chi(0,0,0) = 0: the singular points are not hyperbolic")
    hord = K_u // 2

    have_h = inv.chi0.orders[inv.chi0.vars.index("h")] if "h" in inv.chi0.vars else 0
    if not pad_polynomial and have_h < hord:
        raise BudgetError(
            f"chi carries h-order {have_h} but state order {K_u} needs {hord}"
        )
    f1 = _budget_cast(sys.f[0], _CTX, ords, pad_polynomial=pad_polynomial, what="remainder")
    f2 = _budget_cast(sys.f[1], _CTX, ords, pad_polynomial=pad_polynomial, what="remainder")
    scale = max(1.0, f1.max_abs_coeff(), f2.max_abs_coeff())

    # precondition: the remainder is of second order in the state; tiny
    # numerical dust in the flat slots (from upstream gauge arithmetic) is
    # pruned after validation so the recursion stays exactly triangular.
    def strip_flat(f: TruncatedSeries) -> TruncatedSeries:
        iu1, iu2 = f.vars.index("u1"), f.vars.index("u2")
        bad = 0.0
        kept = {}
        for k, c in f.terms():
            if k[iu1] + k[iu2] <= 1:
                bad = max(bad, abs(c))
            else:
                kept[k] = c
        if bad > tol * scale:
            raise ValueError(
                f"remainder must be of second order in the state (flat residual {bad:.3e})"
            )
        return TruncatedSeries(f.vars, f.orders, kept)

    f1 = strip_flat(f1)
    f2 = strip_flat(f2)

    lam0c = np.array([inv.chi0.coeff({"h": 0, "eps": b}) for b in range(J + 1)])
    lam1c = np.array([inv.chi1.coeff({"h": 0, "eps": b}) for b in range(J + 1)])
    chi_hxe = _cast(inv.chi0, ("h", "x", "eps"), (hord, X, J)) + _cast(
        inv.chi1, ("h", "x", "eps"), (hord, X, J)
    ) * TruncatedSeries.variable("x", ("h", "x", "eps"), (hord, X, J))

    u1v = TruncatedSeries.variable("u1", _CTX, ords)
    u2v = TruncatedSeries.variable("u2", _CTX, ords)
    xxe = _xxe(_CTX, ords)
    phi = [u1v, u2v]

    def utab(s: TruncatedSeries, m1: int, m2: int) -> dict[tuple[int, int], complex]:
        iu1, iu2 = s.vars.index("u1"), s.vars.index("u2")
        ix, ie = s.vars.index("x"), s.vars.index("eps")
        out: dict[tuple[int, int], complex] = {}
        for k, c in s.terms():
            if k[iu1] == m1 and k[iu2] == m2:
                out[(k[ix], k[ie])] = c
        return out

    def alpha_from(chi_phi: TruncatedSeries) -> dict[int, dict[tuple[int, int], complex]]:
        return {n: utab(chi_phi, n, n) for n in range(hord + 1)}

    def alpha_series_ctx(alpha_tab) -> TruncatedSeries:
        coeffs: dict[tuple[int, ...], complex] = {}
        for n, tab in alpha_tab.items():
            for (a, b), c in tab.items():
                coeffs[(n, n, a, b)] = coeffs.get((n, n, a, b), 0.0) + c
        return TruncatedSeries(_CTX, ords, coeffs)

    def defect(phi1: TruncatedSeries, phi2: TruncatedSeries, alpha_v: TruncatedSeries, chi_phi: TruncatedSeries):
        fo1 = _cast(f1.subs({"u1": phi1, "u2": phi2}), _CTX, ords).truncate_total_degree(K_u, _U)
        fo2 = _cast(f2.subs({"u1": phi1, "u2": phi2}), _CTX, ords).truncate_total_degree(K_u, _U)
        e1 = u1v * _cast(phi1.derive("u1"), _CTX, ords) - u2v * _cast(phi1.derive("u2"), _CTX, ords)
        e2 = u1v * _cast(phi2.derive("u1"), _CTX, ords) - u2v * _cast(phi2.derive("u2"), _CTX, ords)
        d1 = (
            chi_phi * phi1
            + xxe * fo1
            - xxe * _cast(phi1.derive("x"), _CTX, ords)
            - alpha_v * e1
        ).truncate_total_degree(K_u, _U)
        d2 = (
            -1.0 * chi_phi * phi2
            + xxe * fo2
            - xxe * _cast(phi2.derive("x"), _CTX, ords)
            - alpha_v * e2
        ).truncate_total_degree(K_u, _U)
        return d1, d2

    def solve_resonant(rtab):
        g: dict[tuple[int, int], complex] = {}
        cons = max((abs(rtab.get((0, b), 0.0)) for b in range(J + 1)), default=0.0)
        for b in range(J + 1):
            for a in range(X - 1, 0, -1):
                val = rtab.get((a + 1, b), 0.0) + (a + 1) * g.get((a + 1, b - 1), 0.0)
                if val:
                    g[(a, b)] = val / a
        return g, cons

    def solve_nonresonant(rtab, k: int):
        g: dict[tuple[int, int], complex] = {}
        kl0 = k * lam0c[0]
        for b in range(J + 1):
            for a in range(X + 1):
                acc = rtab.get((a, b), 0.0)
                acc -= (a - 1) * g.get((a - 1, b), 0.0)
                acc += a * g.get((a, b - 1), 0.0)
                for q in range(1, b + 1):
                    acc -= k * lam0c[q] * g.get((a, b - q), 0.0)
                for q in range(0, b + 1):
                    acc -= k * lam1c[q] * g.get((a - 1, b - q), 0.0)
                if acc:
                    g[(a, b)] = acc / kl0
        return g

    consistency = 0.0
    for N in range(2, K_u + 1):
        hphi = (phi[0] * phi[1]).truncate_total_degree(K_u, _U)
        chi_phi = _cast(chi_hxe.subs({"h": hphi}), _CTX, ords).truncate_total_degree(K_u, _U)
        alpha_tab = alpha_from(chi_phi)
        alpha_v = alpha_series_ctx(alpha_tab)
        d1, d2 = defect(phi[0], phi[1], alpha_v, chi_phi)
        slots = [(m1, N - m1) for m1 in range(N + 1) if m1 <= K_u and N - m1 <= K_u]
        if stage_order_rng is not None:
            perm = stage_order_rng.permutation(len(slots))
            slots = [slots[i] for i in perm]
        defect_scale = max(1.0, d1.max_abs_coeff(), d2.max_abs_coeff())
        for (m1, m2) in slots:
            for j, dser in ((1, d1), (2, d2)):
                rtab = utab(dser, m1, m2)
                k = m1 - m2 + (-1 if j == 1 else +1)
                if k == 0:
                    gtab, cons = solve_resonant(rtab)
                    consistency = max(consistency, cons / defect_scale)
                else:
                    gtab = solve_nonresonant(rtab, k)
                if gtab:
                    add = TruncatedSeries(
                        _CTX, ords, {(m1, m2, a, b): c for (a, b), c in gtab.items()}
                    )
                    phi[j - 1] = phi[j - 1] + add

    # final model coefficient and conjugacy residual
    hphi = (phi[0] * phi[1]).truncate_total_degree(K_u, _U)
    chi_phi = _cast(chi_hxe.subs({"h": hphi}), _CTX, ords).truncate_total_degree(K_u, _U)
    alpha_tab = alpha_from(chi_phi)
    alpha_v = alpha_series_ctx(alpha_tab)
    d1, d2 = defect(phi[0], phi[1], alpha_v, chi_phi)
    box = (K_u, K_u, K_x, J)
    conj_res = max(
        _cast(d1, _CTX, box).max_abs_coeff(), _cast(d2, _CTX, box).max_abs_coeff()
    )

    alpha_coeffs: dict[tuple[int, int, int], complex] = {}
    for n, tab in alpha_tab.items():
        for (a, b), c in tab.items():
            alpha_coeffs[(n, a, b)] = c
    alpha = TruncatedSeries(
        ("h", "x", "eps"), (hord, X, J), {k: c for k, c in alpha_coeffs.items()}
    )

    # affine/x(x-eps) split of alpha per h power: the torus gauge exponent
    chi0_c: dict[tuple[int, int], complex] = {}
    chi1_c: dict[tuple[int, int], complex] = {}
    beta_c: dict[tuple[int, int, int], complex] = {}
    for n in range(hord + 1):
        tab = {(a, b): c for (nn, a, b), c in alpha_coeffs.items() if nn == n}
        s0, s1, rho = _affine_split_xe(_xe_series(tab, X, J))
        for b, c in s0.items():
            chi0_c[(n, b)] = c
        for b, c in s1.items():
            chi1_c[(n, b)] = c
        for (a, b), c in rho.items():
            beta_c[(n, a, b)] = c
    chi_tilde0 = TruncatedSeries(("h", "eps"), (hord, J), chi0_c)
    chi_tilde1 = TruncatedSeries(("h", "eps"), (hord, J), chi1_c)
    chi_tilde = FormalInvariant(chi_tilde0, chi_tilde1)
    beta = TruncatedSeries(("h", "x", "eps"), (hord, X - 2, J), beta_c)
    B = _cast(beta.integrate("x"), ("h", "x", "eps"), (hord, X - 1, J))

    hv = u1v * u2v
    ords_g = (K_u, K_u, X - 1, J)
    Bu = _cast(B.subs({"h": _cast(hv, _CTX, (K_u, K_u, X - 1, J))}), _CTX, ords_g)
    Ep = Bu.exp()
    Em = (-1.0 * Bu).exp()
    arg1 = (_cast(u1v, _CTX, ords_g) * Ep).truncate_total_degree(K_u, _U)
    arg2 = (_cast(u2v, _CTX, ords_g) * Em).truncate_total_degree(K_u, _U)
    full = tuple(
        _cast(p.subs({"u1": arg1, "u2": arg2}), _CTX, ords_g).truncate_total_degree(K_u, _U)
        for p in phi
    )

    def x_slice(s: TruncatedSeries, k: int) -> TruncatedSeries:
        ix = s.vars.index("x")
        out = {}
        for key, c in s.terms():
            if key[ix] == k:
                nk = key[:ix] + key[ix + 1 :]
                out[nk] = c
        vs = s.vars[:ix] + s.vars[ix + 1 :]
        os_ = s.orders[:ix] + s.orders[ix + 1 :]
        return TruncatedSeries(vs, os_, out)

    psi0 = tuple(x_slice(t, 0) for t in full)
    psi1 = tuple(x_slice(t, 1) for t in full)
    id_res = max(
        (psi0[0] - TruncatedSeries.variable("u1", psi0[0].vars, psi0[0].orders)).max_abs_coeff(),
        (psi0[1] - TruncatedSeries.variable("u2", psi0[1].vars, psi0[1].orders)).max_abs_coeff(),
    )

    xv_g = TruncatedSeries.variable("x", _CTX, ords_g)
    div_res = 0.0
    psi_tilde: dict[tuple[int, int], tuple[TruncatedSeries, TruncatedSeries]] = {}
    tilde_pair = []
    for j, t in enumerate(full):
        rest = t - _cast(psi0[j], _CTX, ords_g) - xv_g * _cast(psi1[j], _CTX, ords_g)
        aff, rho = _split_xxe_groups(rest)
        div_res = max(div_res, aff / max(1.0, rest.max_abs_coeff()))
        ords_t = (K_u, K_u, X - 3, J)
        tilde_pair.append(TruncatedSeries(_CTX, ords_t, rho))
    kmax_rel = K_x - 1
    for k in range(0, kmax_rel + 1):
        for l in range(J + 1):
            pair = []
            for j in range(2):
                iu1 = tilde_pair[j].vars.index("u1")
                iu2 = tilde_pair[j].vars.index("u2")
                ix = tilde_pair[j].vars.index("x")
                ie = tilde_pair[j].vars.index("eps")
                coeffs = {}
                for key, c in tilde_pair[j].terms():
                    if key[ix] == k and key[ie] == l:
                        coeffs[(key[iu1], key[iu2])] = c
                pair.append(TruncatedSeries(_U, (K_u, K_u), coeffs))
            if any(p.coeffs for p in pair):
                psi_tilde[(k, l)] = tuple(pair)

    norms_t: list[float] = [0.0] * (kmax_rel + J + 1)
    for (k, l), pair in psi_tilde.items():
        norms_t[k + l] = max(norms_t[k + l], max(p.max_abs_coeff() for p in pair))
    L, C, ratios = _gevrey_fit(norms_t)

    d11 = full[0].derive("u1")
    d12 = full[0].derive("u2")
    d21 = full[1].derive("u1")
    d22 = full[1].derive("u2")
    jac = d11 * d22 - d12 * d21 - 1.0
    jac = jac.truncate_total_degree(K_u - 1, _U)
    sympl = _cast(jac, _CTX, (K_u - 1, K_u - 1, K_x, J)).max_abs_coeff()

    chi_match = max(
        (chi_tilde0 - _cast(inv.chi0, ("h", "eps"), (hord, J))).max_abs_coeff(),
        (chi_tilde1 - _cast(inv.chi1, ("h", "eps"), (hord, J))).max_abs_coeff(),
    )

    return NormalizationSeries(
        transformation=full,
        model_transformation=tuple(phi),
        alpha=alpha,
        chi_tilde=chi_tilde,
        beta=beta,
        gauge_exponent=B,
        orders=(K_u, K_x, J),
        psi0=psi0,
        psi1=psi1,
        psi_tilde=psi_tilde,
        gevrey_L=L,
        gevrey_C=C,
        gevrey_ratios=ratios,
        conjugacy_residual=conj_res,
        resonant_consistency=consistency,
        sympl_residual=sympl,
        chi_match_residual=chi_match,
        identity_residual=id_res,
        division_residual=div_res,
        inv=inv,
    )


# ---------------------------------------------------------------------------
# directional (Borel-Laplace) sums


@dataclass(frozen=True)
class DirectionalSumValue:
    value: complex
    head: complex
    estimate: float
    theta: float
    poles: tuple[complex, ...]
    method: str
    nodes: int


_LAGUERRE_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _laguerre(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _LAGUERRE_CACHE:
        _LAGUERRE_CACHE[n] = np.polynomial.laguerre.laggauss(n)
    return _LAGUERRE_CACHE[n]


def _pade_rational(gamma: np.ndarray, rtol: float = 1e-11) -> tuple[np.ndarray, np.ndarray]:
    """Near-diagonal Pade approximant of a polynomial, ascending coefficients.

    Picks the largest denominator degree whose backward error (re-expanding
    num/den to the data length) stays below ``rtol`` relative to the data.
    Rational inputs of lower type are recovered exactly.
    """
    K = len(gamma) - 1
    gnorm = float(np.max(np.abs(gamma)))
    if gnorm == 0.0:
        return np.zeros(1, dtype=complex), np.ones(1, dtype=complex)
    for q in range(K // 2, 0, -1):
        p = K - q
        A = np.zeros((q, q), dtype=complex)
        rhs = np.zeros(q, dtype=complex)
        for i in range(q):
            for j in range(1, q + 1):
                idx = p + 1 + i - j
                A[i, j - 1] = gamma[idx] if 0 <= idx <= K else 0.0
            rhs[i] = -gamma[p + 1 + i]
        try:
            b_tail, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        except np.linalg.LinAlgError:
            continue
        den = np.concatenate(([1.0 + 0.0j], b_tail))
        num = np.zeros(p + 1, dtype=complex)
        for i in range(p + 1):
            num[i] = sum(den[j] * gamma[i - j] for j in range(0, min(i, q) + 1))
        # backward error: re-expand num/den and compare with the data
        recon = np.zeros(K + 1, dtype=complex)
        for i in range(K + 1):
            acc = num[i] if i <= p else 0.0
            acc -= sum(den[j] * recon[i - j] for j in range(1, min(i, q) + 1))
            recon[i] = acc / den[0]
        if np.max(np.abs(recon - gamma)) <= rtol * gnorm:
            return num, den
    return np.asarray(gamma, dtype=complex), np.ones(1, dtype=complex)


def _rational_poles(num: np.ndarray, den: np.ndarray) -> tuple[tuple[complex, float], ...]:
    """(pole, |residue|) pairs of num/den, spurious pole-zero doublets removed.

    A repeated denominator root reports an infinite residue magnitude (the
    simple-pole formula degenerates; the pole is certainly real).
    """
    if len(den) <= 1:
        return ()
    roots = np.roots(den[::-1])
    dden = np.polynomial.polynomial.polyder(den)
    keep = []
    scale = max(np.max(np.abs(num)), 1e-300)
    for r in roots:
        dval = np.polynomial.polynomial.polyval(r, dden)
        nval = np.polynomial.polynomial.polyval(r, num)
        if dval == 0:
            keep.append((complex(r), math.inf))
            continue
        residue = abs(nval / dval)
        if residue > 1e-12 * scale:
            keep.append((complex(r), float(residue)))
    return tuple(keep)


def directional_sum(
    coeffs: Sequence[complex],
    theta: float,
    x: complex,
    *,
    n_nodes: int = 64,
    method: str = "pade",
    tol: Optional[float] = None,
    margin: float = 0.08,
) -> DirectionalSumValue:
    """Borel sum of an x-power series along the ray of direction ``theta``.

    The series ``c0 + c1 x + c2 x^2 + ...`` is interpreted with two explicit
    head terms and a once-integrated tail:

        value = c0 + c1 x + x^2 * Int_0^{inf e^{i theta}}
                    (sum_k c_{k+2} (s x)^k / k!) e^{-s} ds.

    The Borel polynomial is continued by a near-diagonal Pade approximant
    (``method="pade"``, default) or used as is (``method="polynomial"``),
    and the Laplace integral is evaluated by Gauss-Laguerre quadrature on
    the rotated ray.  The ray must stay clear of the continued transform's
    poles; otherwise SingularDirectionError is raised.  The reported
    ``estimate`` is the conservative factorial-truncation bound
    ``C (L |x|)^{K+1} (K+1)! |x|^2`` from the fitted growth rate of the
    coefficients; when ``tol`` is given and the bound exceeds it,
    OrderTooLowError carries a suggested truncation order near 1/(L |x|).
    """
    c = np.asarray(list(coeffs), dtype=complex)
    x = complex(x)
    theta = float(theta)
    head = (c[0] if len(c) > 0 else 0.0) + (c[1] * x if len(c) > 1 else 0.0)
    if len(c) <= 2 or x == 0:
        return DirectionalSumValue(
            value=complex(head), head=complex(head), estimate=0.0,
            theta=theta, poles=(), method=method, nodes=0,
        )
    tail = c[2:]
    K = len(tail) - 1
    gamma = np.array(
        [tail[k] * (x ** k) / math.factorial(k) for k in range(K + 1)], dtype=complex
    )

    L, C, _ = _gevrey_fit(np.abs(c).tolist())
    if L > 0.0:
        est = C * (L * abs(x)) ** (len(c)) * math.factorial(len(c)) * abs(x) ** 2
        suggested = max(2, int(1.0 / (L * abs(x))) if L * abs(x) > 0 else 2)
    else:
        est = 0.0
        suggested = len(c)
    if tol is not None and est > tol:
        raise OrderTooLowError(
            f"truncation bound {est:.3e} exceeds tol {tol:.1e}; "
            f"about {suggested} orders would be optimal at |x| = {abs(x):.3g}",
            suggested_order=suggested,
        )

    if method == "polynomial":
        num, den = gamma, np.ones(1, dtype=complex)
    elif method == "pade":
        num, den = _pade_rational(gamma)
    else:
        raise ValueError(f"unknown method {method!r}")

    nodes, weights = _laguerre(n_nodes)
    s_reach = 2.0 * float(nodes[-1])
    gnorm = float(np.max(np.abs(gamma)))
    pole_data = _rational_poles(num, den)
    for p, res in pole_data:
        if abs(p) > s_reach:
            continue  # beyond the quadrature's reach; often a stray root
        if p == 0:
            raise SingularDirectionError("continued Borel transform has a pole at 0")
        prot = p * cmath.exp(-1j * theta)
        if prot.real > 0 and abs(prot.imag) < math.sin(margin) * abs(p):
            # weigh the pole by the Laplace damping it feels: a far-out
            # pole with a modest residue cannot move the integral
            impact = math.inf if math.isinf(res) else res * math.exp(-prot.real)
            if impact > 1e-11 * max(1.0, gnorm):
                raise SingularDirectionError(
                    f"summation ray theta = {theta:.3f} passes within the safety "
                    f"margin of a Borel-plane singularity at {p:.6g}"
                )
    poles = tuple(p for p, _ in pole_data)

    rot = cmath.exp(1j * theta)
    s_vals = nodes * rot
    numer = np.polynomial.polynomial.polyval(s_vals, num)
    denom = np.polynomial.polynomial.polyval(s_vals, den)
    integrand = numer / denom * np.exp(-nodes * (rot - 1.0))
    integral = rot * np.sum(weights * integrand)
    value = head + x * x * integral
    return DirectionalSumValue(
        value=complex(value), head=complex(head), estimate=float(est),
        theta=theta, poles=poles, method=method, nodes=n_nodes,
    )


@dataclass(frozen=True)
class BorelLaplaceValue:
    values: tuple[complex, complex]
    parts: tuple[DirectionalSumValue, DirectionalSumValue]
    theta: float
    x: complex
    u: tuple[complex, complex]


def borel_laplace(
    ns: NormalizationSeries,
    theta: float,
    u: Sequence[complex],
    x: complex,
    *,
    n_nodes: int = 64,
    method: str = "pade",
    tol: Optional[float] = None,
) -> BorelLaplaceValue:
    """Directional sum of a formal normalization at a point.

    Evaluates the confluent-limit member (eps = 0) of the transformation:
    the head slices psi0, psi1 at the given state values, then the
    Laplace integral of the Borel-transformed tail along the theta-ray.
    Requires x inside the disc where the fitted truncation bound is
    meaningful; the per-component bounds ride along in ``parts``.
    """
    u1, u2 = (complex(u[0]), complex(u[1]))
    kmax = max((k for (k, l) in ns.psi_tilde if l == 0), default=-1)
    parts = []
    for j in range(2):
        c0 = ns.psi0[j](u1=u1, u2=u2, eps=0.0)
        c1 = ns.psi1[j](u1=u1, u2=u2, eps=0.0)
        coeffs = [c0, c1]
        for k in range(kmax + 1):
            pair = ns.psi_tilde.get((k, 0))
            coeffs.append(pair[j](u1=u1, u2=u2) if pair is not None else 0.0)
        parts.append(
            directional_sum(coeffs, theta, x, n_nodes=n_nodes, method=method, tol=tol)
        )
    return BorelLaplaceValue(
        values=(parts[0].value, parts[1].value),
        parts=tuple(parts),
        theta=float(theta),
        x=complex(x),
        u=(u1, u2),
    )


@dataclass(frozen=True)
class SectoralFrame:
    """Numeric value of a diagonalizing gauge along one summation ray."""

    matrix: np.ndarray
    shift: np.ndarray
    theta: float
    x: complex


def gauge_sectoral_frame(
    gauge: DiagonalizingGauge,
    theta: float,
    x: complex,
    *,
    n_nodes: int = 64,
    method: str = "pade",
) -> SectoralFrame:
    """Directional sum of the affine gauge ``y = T w + phi0`` at eps = 0.

    Borel-sums the four scalar ingredients t1, t2, b1, b2 and the shift
    phi0 along the theta-ray and assembles the frame matrix
    ``[[e^B1, tau1 e^B2], [tau2 e^B1, e^B2]]``.  Summation commutes with
    products and exponentials, so summing the ingredients realizes the
    sectoral version of the whole gauge.
    """

    def eps0_coeffs(s: TruncatedSeries) -> list[complex]:
        ix = s.vars.index("x") if "x" in s.vars else None
        if ix is None:
            return [s.constant_term()]
        out = [0.0 + 0.0j] * (s.orders[ix] + 1)
        ie = s.vars.index("eps") if "eps" in s.vars else None
        for k, c in s.terms():
            if ie is None or k[ie] == 0:
                out[k[ix]] += c
        return out

    def dsum(s: TruncatedSeries) -> complex:
        return directional_sum(eps0_coeffs(s), theta, x, n_nodes=n_nodes, method=method).value

    tau1, tau2 = dsum(gauge.t1), dsum(gauge.t2)
    e1, e2 = cmath.exp(dsum(gauge.b1)), cmath.exp(dsum(gauge.b2))
    mat = np.array([[e1, tau1 * e2], [tau2 * e1, e2]], dtype=np.complex128)
    shift = np.array(
        [dsum(comp) for comp in gauge.phi0.components], dtype=np.complex128
    )
    return SectoralFrame(matrix=mat, shift=shift, theta=float(theta), x=complex(x))


# ---------------------------------------------------------------------------
# transition structure between two sectoral normalizations


@dataclass(frozen=True)
class IsotropyFit:
    """Polynomial fit of a sectoral transition in first-integral coordinates.

    ``table1``/``table2`` map monomial exponents (p, q) of (c1, c2) to the
    fitted coefficients of the two components of the transition.  The
    characteristic structure of such transitions leaves, beyond the
    identity, only corrections by powers of the conserved product and of
    the coordinate attached to the sector; ``forbidden_max`` is the largest
    coefficient found outside the allowed pattern.
    """

    sector: int
    fit_degree: int
    table1: dict
    table2: dict
    forbidden_max: float
    fit_residual: float
    sigma_ramification: complex
    linear_entry: complex
    identity_residual: float
    n_samples: int

    def coefficient(self, component: int, p: int, q: int) -> complex:
        tab = self.table1 if component == 1 else self.table2
        return tab.get((p, q), 0.0 + 0.0j)


def _allowed_mask(sector: int, degree: int) -> tuple[set, set]:
    allowed1: set[tuple[int, int]] = set()
    allowed2: set[tuple[int, int]] = set()
    for p in range(degree + 1):
        for q in range(degree + 1 - p):
            if sector == 1:
                if (p, q) == (1, 0) or p >= q + 2:
                    allowed1.add((p, q))
                if (p, q) == (0, 1) or p >= q:
                    allowed2.add((p, q))
            else:
                if (p, q) == (1, 0) or q >= p:
                    allowed1.add((p, q))
                if (p, q) == (0, 1) or q >= p + 2:
                    allowed2.add((p, q))
    return allowed1, allowed2


def _newton_invert(
    fun: Callable[[np.ndarray], np.ndarray],
    target: np.ndarray,
    guess: np.ndarray,
    tol: float,
    max_iter: int = 50,
) -> np.ndarray:
    u = np.asarray(guess, dtype=np.complex128).copy()
    for _ in range(max_iter):
        r = fun(u) - target
        if np.max(np.abs(r)) < tol:
            return u
        Jm = np.zeros((2, 2), dtype=np.complex128)
        for i in range(2):
            step = 1e-6 * max(1.0, abs(u[i]))
            e = np.zeros(2, dtype=np.complex128)
            e[i] = step
            Jm[:, i] = (fun(u + e) - fun(u - e)) / (2 * step)
        u = u - np.linalg.solve(Jm, r)
    raise RuntimeError("inversion of the sectoral sum did not converge")


def default_c_samples(
    radius: float = 0.08,
    n_angles: int = 5,
    radii: Sequence[float] = (0.0, 0.55, 1.0),
) -> list[tuple[complex, complex]]:
    """Deterministic sample grid on a small bi-disc (includes the axes)."""
    out: list[tuple[complex, complex]] = []
    for r1 in radii:
        angles1 = range(n_angles) if r1 else (0,)
        for r2 in radii:
            angles2 = range(n_angles) if r2 else (0,)
            for i in angles1:
                ph1 = 2 * math.pi * i / n_angles + 0.3
                c1 = radius * r1 * cmath.exp(1j * ph1)
                for k in angles2:
                    ph2 = 2 * math.pi * k / n_angles + 0.9
                    c2 = radius * r2 * cmath.exp(1j * ph2)
                    out.append((c1, c2))
    return out


def stokes_isotropy_structure(
    sum_a: Callable[[np.ndarray, complex], np.ndarray],
    sum_b: Callable[[np.ndarray, complex], np.ndarray],
    inv,
    x_star: complex,
    c_samples: Iterable[tuple[complex, complex]],
    *,
    sector: int = 1,
    fit_degree: int = 3,
    newton_tol: float = 1e-12,
    fit_tol: Optional[float] = None,
) -> IsotropyFit:
    """Fit the transition between two sectoral normalizations in the
    coordinates of the model's first integral.

    Both ``sum_a`` and ``sum_b`` map (state u, point x) to the target
    coordinates of the original system on a common overlap.  For each
    sample c the model solution u(c) = (c1 E, c2 / E) with
    E = exp(-chi0(h)/x + chi1(h) log x), h = c1 c2, is pushed through
    ``sum_b`` and pulled back through ``sum_a`` by Newton inversion; the
    resulting map c -> c' is fitted by least squares on monomials of total
    degree <= fit_degree.  The fit must reproduce the triangular structure
    of such transitions: beyond the identity, the component attached to the
    sector is corrected only at order c_i^2 and the opposite component only
    through powers of h and c_i.  ``sigma_ramification`` returns the
    constant term of the off-component correction -- the leading transition
    invariant.
    """
    samples = list(c_samples)
    if sector not in (1, 2):
        raise ValueError("sector must be 1 or 2")
    rows = []
    targets1 = []
    targets2 = []
    for (c1, c2) in samples:
        c1, c2 = complex(c1), complex(c2)
        h = c1 * c2
        E = e_chi(inv, h, 0.0, x_star)
        u = np.array([c1 * E, c2 / E], dtype=np.complex128)
        y = sum_b(u, x_star)
        up = _newton_invert(lambda v: sum_a(v, x_star), y, u, newton_tol)
        hp = up[0] * up[1]
        Ep = e_chi(inv, hp, 0.0, x_star)
        cp1, cp2 = up[0] / Ep, up[1] * Ep
        rows.append((c1, c2))
        targets1.append(cp1)
        targets2.append(cp2)

    monos = [(p, q) for p in range(fit_degree + 1) for q in range(fit_degree + 1 - p)]
    A = np.zeros((len(rows), len(monos)), dtype=np.complex128)
    for r, (c1, c2) in enumerate(rows):
        for m, (p, q) in enumerate(monos):
            A[r, m] = (c1 ** p) * (c2 ** q)
    col_scale = np.max(np.abs(A), axis=0)
    col_scale[col_scale == 0] = 1.0
    As = A / col_scale

    tables = []
    resid = 0.0
    for targ in (np.asarray(targets1), np.asarray(targets2)):
        sol, *_ = np.linalg.lstsq(As, targ, rcond=None)
        coefs = sol / col_scale
        pred = A @ coefs
        resid = max(resid, float(np.max(np.abs(pred - targ))))
        tables.append({m: complex(c) for m, c in zip(monos, coefs)})
    if fit_tol is not None and resid > fit_tol:
        raise ValueError(
            f"transition fit residual {resid:.3e} exceeds {fit_tol:.1e}; "
            "add samples or lower the fit degree"
        )

    allowed1, allowed2 = _allowed_mask(sector, fit_degree)
    forbidden = 0.0
    for (p, q), c in tables[0].items():
        if (p, q) not in allowed1:
            forbidden = max(forbidden, abs(c))
    for (p, q), c in tables[1].items():
        if (p, q) not in allowed2:
            forbidden = max(forbidden, abs(c))
    ident = max(abs(tables[0].get((1, 0), 0.0) - 1.0), abs(tables[1].get((0, 1), 0.0) - 1.0))
    if sector == 1:
        sigma00 = tables[1].get((0, 0), 0.0 + 0.0j)
        lin = tables[1].get((1, 0), 0.0 + 0.0j)
    else:
        sigma00 = tables[0].get((0, 0), 0.0 + 0.0j)
        lin = tables[0].get((0, 1), 0.0 + 0.0j)
    return IsotropyFit(
        sector=sector,
        fit_degree=fit_degree,
        table1=tables[0],
        table2=tables[1],
        forbidden_max=forbidden,
        fit_residual=resid,
        sigma_ramification=complex(sigma00),
        linear_entry=complex(lin),
        identity_residual=ident,
        n_samples=len(rows),
    )
