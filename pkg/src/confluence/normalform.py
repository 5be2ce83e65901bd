"""Symplectic normal forms of planar Hamiltonian germs.

Input: a Hamiltonian ``H(u1, u2)`` with a nondegenerate (Morse) critical
point near the origin, coefficients possibly depending on a parameter
``eps``.  The pipeline is

1. ``morse_normalize`` — locate the critical point by a series/numeric
   Newton iteration, recenter, subtract the critical value, and apply the
   unimodular linear map that turns the quadratic part into ``lam*u1*u2``
   (saddle normal form).  ``lam`` is the square root of minus the
   determinant of the linearized vector field, with a deterministic sign
   convention.
2. ``siegel_reduce`` — kill all non-resonant monomials ``u1^a u2^b``
   (``a != b``) degree by degree with time-1 flows of polynomial
   generators, leaving a function of the product ``h = u1*u2`` alone:
   ``H ∘ Phi = g(u1*u2)``.  The composed transformation ``Phi`` is
   symplectic (unit Jacobian determinant) by construction.

``period_map_oracle`` recomputes the same normal form by a completely
independent route: a contour integral over a loop on the complex level set
``H = h`` gives the derivative of the inverse of ``g``; sampling it on a
small circle of level values and taking a discrete Fourier transform gives
its jet, and series reversion recovers ``g``.  The two routes share no code
beyond the Morse pre-pass, which makes them good cross-checks.

``formal_invariant`` packages the two slice normal forms of a Hamiltonian
family ``H(u1, u2, x, eps)`` (slices ``x = 0`` and ``x = eps``) into the
pair ``chi = chi0(h, eps) + x * chi1(h, eps)`` that classifies the family
up to formal symplectic changes of coordinates.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .series import TruncatedSeries, ts_compose

# ---------------------------------------------------------------------------
# polynomial-exact calculus helpers
#
# TruncatedSeries.derive drops the truncation order by one (correct jet
# discipline for series with unknown tails).  Everything in this module is a
# polynomial known exactly within its declared orders, so we differentiate
# without shrinking the window.


def dpoly(s: TruncatedSeries, var: str) -> TruncatedSeries:
    """Derivative of an exactly-known polynomial; keeps the declared orders."""
    i = s.vars.index(var)
    out: dict = {}
    for k, c in s.coeffs.items():
        if k[i] > 0:
            key = k[:i] + (k[i] - 1,) + k[i + 1 :]
            out[key] = out.get(key, 0.0) + k[i] * c
    return TruncatedSeries(s.vars, s.orders, out)


def poisson_bracket(f: TruncatedSeries, g: TruncatedSeries, max_u_degree: int | None = None) -> TruncatedSeries:
    """{f, g} = df/du1 dg/du2 - df/du2 dg/du1, optionally truncated in total
    (u1, u2)-degree."""
    br = dpoly(f, "u1") * dpoly(g, "u2") - dpoly(f, "u2") * dpoly(g, "u1")
    if max_u_degree is not None:
        br = br.truncate_total_degree(max_u_degree, ("u1", "u2"))
    return br


def lie_transform(f: TruncatedSeries, gen: TruncatedSeries, max_u_degree: int) -> TruncatedSeries:
    """Pullback of ``f`` by the time-1 flow of the Hamiltonian field of ``gen``.

    exp(L_gen) f = f + {f, gen} + {{f, gen}, gen}/2 + ...  The sum is finite
    on a truncated jet because each bracket with a generator of u-degree >= 3
    raises the total u-degree.

    ``gen`` must be an exact polynomial; it is widened to the target's
    truncation window so the min-order merge cannot clip the target's jet.
    """
    uvars = tuple(dict.fromkeys(f.vars + gen.vars))
    uords = [
        f.orders[f.vars.index(v)] if v in f.vars else gen.orders[gen.vars.index(v)]
        for v in uvars
    ]
    gen = gen.widened(uvars, uords)
    acc = f
    term = f
    for k in range(1, 400):
        term = poisson_bracket(term, gen, max_u_degree) * (1.0 / k)
        if term.is_zero():
            break
        acc = acc + term
    else:  # pragma: no cover - loop guard
        raise RuntimeError("Lie series did not terminate; generator has a linear part?")
    return acc


def _strip_eps(s: TruncatedSeries):
    """Remove a vestigial eps variable (evaluate at eps = 0)."""
    if "eps" in s.vars:
        return s.subs({"eps": 0.0})
    return s


# ---------------------------------------------------------------------------
# Morse pre-pass


@dataclass(frozen=True)
class MorseData:
    """Result of the Morse pre-pass.

    ``hamiltonian`` is the recentered Hamiltonian with quadratic part
    ``lam * u1 * u2`` and zero critical value; ``transform`` holds the two
    components of the affine map (original coords as functions of the new
    ones), so ``H_original(transform) = hamiltonian + critical_value``.
    """

    hamiltonian: TruncatedSeries
    lam: object  # TruncatedSeries in eps, or complex when eps is absent
    critical_point: tuple
    critical_value: object
    linear_map: tuple  # ((T11, T12), (T21, T22))
    transform: tuple  # (P1, P2) series in (u1, u2[, eps])


def _pick_sign(lam0: complex, lam_ref: complex | None) -> int:
    if lam_ref is not None:
        return 1 if (lam0 * lam_ref.conjugate()).real >= 0 else -1
    if abs(lam0.real) > 1e-14:
        return 1 if lam0.real > 0 else -1
    return 1 if lam0.imag > 0 else -1


def morse_normalize(H: TruncatedSeries, lam_ref: complex | None = None, tol: float = 1e-9) -> MorseData:
    """Shift a Morse critical point to the origin and align the saddle axes.

    The critical point is found by Newton iteration: exactly (numeric mode)
    when ``eps`` is absent, order by order in ``eps`` otherwise (this
    requires the origin to be critical at eps = 0).  The linear map is the
    unimodular eigenbasis of the linearized Hamiltonian vector field; the
    eigenvalue sign convention is: positive real part, ties broken towards
    positive imaginary part, unless ``lam_ref`` is given, in which case the
    sign best aligned with ``lam_ref`` is chosen (used to keep a family of
    slices on one branch).
    """
    extra = [v for v in H.vars if v not in ("u1", "u2", "eps")]
    if extra:
        raise ValueError(f"morse_normalize expects variables (u1, u2[, eps]); got {H.vars}")
    had_eps = "eps" in H.vars
    if not had_eps:
        H = H.embedded(H.vars + ("eps",), H.orders + (0,))
    iu, ju = H.vars.index("u1"), H.vars.index("u2")
    N1, N2, J = H.orders[iu], H.orders[ju], H.orders[H.vars.index("eps")]

    h1, h2 = dpoly(H, "u1"), dpoly(H, "u2")
    h11, h12, h22 = dpoly(h1, "u1"), dpoly(h1, "u2"), dpoly(h2, "u2")

    at0 = {"u1": 0.0, "u2": 0.0, "eps": 0.0}
    det0 = complex(h11.subs(at0)) * complex(h22.subs(at0)) - complex(h12.subs(at0)) ** 2
    if abs(det0) < 1e-12:
        raise ValueError("degenerate quadratic part: the critical point is not Morse")

    eps_zero = TruncatedSeries.zero(("eps",), (J,))
    y1, y2 = eps_zero, eps_zero
    if J >= 1:
        g0 = abs(h1.subs({"u1": 0.0, "u2": 0.0}).subs({"eps": 0.0})) + abs(
            h2.subs({"u1": 0.0, "u2": 0.0}).subs({"eps": 0.0})
        )
        if g0 > tol:
            raise ValueError("origin is not critical at eps = 0; cannot expand the critical point in eps")
        iters = J + 2
    else:
        iters = 60
    for _ in range(iters):
        at = {"u1": y1, "u2": y2}
        g1, g2 = h1.subs(at), h2.subs(at)
        a11, a12, a22 = h11.subs(at), h12.subs(at), h22.subs(at)
        det = a11 * a22 - a12 * a12
        inv_det = det.inverse() if isinstance(det, TruncatedSeries) else 1.0 / det
        d1 = (a22 * g1 - a12 * g2) * inv_det
        d2 = (a11 * g2 - a12 * g1) * inv_det
        if not isinstance(d1, TruncatedSeries):
            d1 = TruncatedSeries.constant(d1, ("eps",), (J,))
            d2 = TruncatedSeries.constant(d2, ("eps",), (J,))
        y1, y2 = y1 - d1, y2 - d2
        if J == 0 and d1.max_abs_coeff() + d2.max_abs_coeff() < 1e-15:
            break
    res = abs(complex(h1.subs({"u1": y1, "u2": y2}).subs({"eps": 0.0}))) + abs(
        complex(h2.subs({"u1": y1, "u2": y2}).subs({"eps": 0.0}))
    )
    if res > 1e-8:
        raise ValueError(f"Newton iteration for the critical point did not converge (residual {res:.2e})")

    # recenter and subtract the critical value
    u1v = TruncatedSeries.variable("u1", ("u1", "u2", "eps"), (N1, N2, J))
    u2v = TruncatedSeries.variable("u2", ("u1", "u2", "eps"), (N1, N2, J))
    Hc = H.subs({"u1": u1v + y1, "u2": u2v + y2})
    crit = Hc.subs({"u1": 0.0, "u2": 0.0})
    if not isinstance(crit, TruncatedSeries):
        crit = TruncatedSeries.constant(crit, ("eps",), (J,))
    Hc = Hc - crit

    def ucoeff(a: int, b: int) -> TruncatedSeries:
        out = {}
        for k, c in Hc.coeffs.items():
            if k[iu] == a and k[ju] == b:
                out[(k[H.vars.index("eps")],)] = c
        return TruncatedSeries(("eps",), (J,), out)

    H20, H11, H02 = ucoeff(2, 0), ucoeff(1, 1), ucoeff(0, 2)
    disc = H11 * H11 - 4.0 * H20 * H02
    if abs(disc.constant_term()) < 1e-12:
        raise ValueError("degenerate quadratic part: the linearization has zero eigenvalues")
    lam = disc.sqrt()
    lam = lam * _pick_sign(lam.constant_term(), lam_ref)

    # eigenbasis of A = [[a, b], [c, -a]] with a=H11, b=2*H02, c=-2*H20
    a, b, c = H11, 2.0 * H02, -2.0 * H20

    def pick(cand1, cand2):
        s1 = abs(cand1[0].constant_term()) + abs(cand1[1].constant_term())
        s2 = abs(cand2[0].constant_term()) + abs(cand2[1].constant_term())
        return cand1 if s1 >= s2 else cand2

    vp = pick((b, lam - a), (lam + a, c))
    vm = pick((b, -lam - a), (-lam + a, c))
    detT = vp[0] * vm[1] - vm[0] * vp[1]
    if abs(detT.constant_term()) < 1e-12:
        raise ValueError("eigenvector selection degenerated; quadratic part too close to resonance")
    inv_detT = detT.inverse()
    vm = (vm[0] * inv_detT, vm[1] * inv_detT)
    T = ((vp[0], vm[0]), (vp[1], vm[1]))

    Hn = Hc.subs({"u1": T[0][0] * u1v + T[0][1] * u2v, "u2": T[1][0] * u1v + T[1][1] * u2v})

    scale = max(1.0, Hn.max_abs_coeff())
    for (aa, bb) in ((2, 0), (0, 2)):
        bad = max(
            (abs(cc) for kk, cc in Hn.coeffs.items() if kk[iu] == aa and kk[ju] == bb),
            default=0.0,
        )
        if bad > tol * scale:
            raise RuntimeError(f"quadratic part not normalized: residual {bad:.2e} at u1^{aa} u2^{bb}")

    P1 = T[0][0] * u1v + T[0][1] * u2v + y1
    P2 = T[1][0] * u1v + T[1][1] * u2v + y2

    if not had_eps:
        Hn = _strip_eps(Hn)
        return MorseData(
            hamiltonian=Hn,
            lam=lam.constant_term(),
            critical_point=(y1.constant_term(), y2.constant_term()),
            critical_value=crit.constant_term(),
            linear_map=tuple(tuple(_strip_eps(t) for t in row) for row in T),
            transform=(_strip_eps(P1), _strip_eps(P2)),
        )
    return MorseData(
        hamiltonian=Hn,
        lam=lam,
        critical_point=(y1, y2),
        critical_value=crit,
        linear_map=T,
        transform=(P1, P2),
    )


# ---------------------------------------------------------------------------
# degree-by-degree reduction to a function of u1*u2


@dataclass(frozen=True)
class BirkhoffData:
    """Full normal form: ``H_original(transform) = g(u1*u2) + critical value``.

    ``g`` is a univariate series in ``h`` (coefficients in eps when the input
    had an eps dependence); ``residual`` is the largest non-resonant
    coefficient left after the sweep (roundoff scale).
    """

    g: TruncatedSeries
    lam: object
    transform: tuple
    morse: MorseData
    residual: float


def siegel_reduce(
    H: TruncatedSeries,
    max_degree: int | None = None,
    lam_ref: complex | None = None,
    tol: float = 1e-8,
) -> BirkhoffData:
    """Reduce a Morse Hamiltonian to a function of the product u1*u2.

    ``max_degree`` is the total (u1, u2)-degree carried through the sweep;
    the returned ``g`` is a jet of order ``max_degree // 2`` in ``h``.
    Works coefficient-wise in eps when the input carries it.
    """
    morse = morse_normalize(H, lam_ref=lam_ref)
    had_eps = "eps" in H.vars
    Hm = morse.hamiltonian if had_eps else morse.hamiltonian.embedded(
        morse.hamiltonian.vars + ("eps",), morse.hamiltonian.orders + (0,)
    )
    iu, ju = Hm.vars.index("u1"), Hm.vars.index("u2")
    J = Hm.orders[Hm.vars.index("eps")]
    if max_degree is None:
        max_degree = Hm.orders[iu] + Hm.orders[ju]
    N = int(max_degree)
    Hm = Hm.widened(("u1", "u2", "eps"), (N, N, J)).truncate_total_degree(N, ("u1", "u2"))

    lam_s = morse.lam if had_eps else TruncatedSeries.constant(morse.lam, ("eps",), (0,))
    inv_lam = lam_s.inverse()

    P1, P2 = morse.transform
    if not had_eps:
        P1 = P1.embedded(P1.vars + ("eps",), P1.orders + (0,))
        P2 = P2.embedded(P2.vars + ("eps",), P2.orders + (0,))
    P1 = P1.widened(("u1", "u2", "eps"), (N, N, J))
    P2 = P2.widened(("u1", "u2", "eps"), (N, N, J))

    def eps_coeff_series(series, a, b):
        out = {}
        for k, cc in series.coeffs.items():
            if k[0] == a and k[1] == b:
                out[(k[2],)] = cc
        return TruncatedSeries(("eps",), (J,), out)

    for d in range(3, N + 1):
        gen = TruncatedSeries.zero(("u1", "u2", "eps"), (N, N, J))
        found = False
        for (a, b) in [(a, d - a) for a in range(d + 1)]:
            if a == b:
                continue
            c_ab = eps_coeff_series(Hm, a, b)
            if c_ab.is_zero():
                continue
            f_ab = c_ab * inv_lam * (1.0 / (a - b))
            mono = {
                (a, b, k[0]): cc for k, cc in f_ab.coeffs.items()
            }
            gen = gen + TruncatedSeries(("u1", "u2", "eps"), (N, N, J), mono)
            found = True
        if not found:
            continue
        Hm = lie_transform(Hm, gen, N)
        P1 = lie_transform(P1, gen, N)
        P2 = lie_transform(P2, gen, N)
        scale = max(1.0, Hm.max_abs_coeff())
        left = max(
            (abs(cc) for k, cc in Hm.coeffs.items() if k[0] + k[1] == d and k[0] != k[1]),
            default=0.0,
        )
        if left > tol * scale:
            raise RuntimeError(f"degree-{d} sweep left a non-resonant residual {left:.2e}")

    residual = max(
        (abs(cc) for k, cc in Hm.coeffs.items() if k[0] != k[1]),
        default=0.0,
    )

    g_coeffs: dict = {}
    for k, cc in Hm.coeffs.items():
        if k[0] == k[1]:
            g_coeffs[(k[0], k[2])] = g_coeffs.get((k[0], k[2]), 0.0) + cc
    g = TruncatedSeries(("h", "eps"), (N // 2, J), g_coeffs)

    if not had_eps:
        return BirkhoffData(
            g=_strip_eps(g),
            lam=morse.lam,
            transform=(_strip_eps(P1), _strip_eps(P2)),
            morse=morse,
            residual=residual,
        )
    return BirkhoffData(g=g, lam=morse.lam, transform=(P1, P2), morse=morse, residual=residual)


# ---------------------------------------------------------------------------
# contour-integral period oracle


@dataclass(frozen=True)
class PeriodData:
    """Jet of the level-set period and the normal form reconstructed from it.

    ``p`` is the jet of the period density (derivative of the inverse of the
    normal form), ``P`` its antiderivative vanishing at 0, and ``g`` the
    series reversion of ``P`` — an independent reconstruction of the
    ``siegel_reduce`` output.
    """

    p: TruncatedSeries
    P: TruncatedSeries
    g: TruncatedSeries
    lam: complex
    morse: MorseData


def period_map_oracle(
    H: TruncatedSeries,
    h_order: int = 4,
    r_h: float = 1e-2,
    nodes: int = 512,
    samples: int = 32,
    lam_ref: complex | None = None,
) -> PeriodData:
    """Normal form of a numeric Hamiltonian via contour integration.

    For each level value ``h`` on a small circle, integrate
    ``(1/2 pi i) \\oint (dw1/dphi) / (dH/dw2) dphi`` over the loop
    ``w1 = rho e^{i phi}`` on the complex level set ``H(w1, w2) = h``
    (``w2`` is tracked by a vectorized Newton iteration).  For
    ``H = g(u1 u2)`` this integral equals ``(g^{-1})'(h)``; a discrete
    Fourier transform over the circle of level values gives its jet, and
    series reversion of the antiderivative recovers ``g``.
    """
    if any(v not in ("u1", "u2") for v in H.vars):
        raise ValueError("period_map_oracle expects a numeric Hamiltonian in (u1, u2)")
    morse = morse_normalize(H, lam_ref=lam_ref)
    Hm = morse.hamiltonian
    lam = morse.lam

    iu, ju = Hm.vars.index("u1"), Hm.vars.index("u2")
    exps = np.array([(k[iu], k[ju]) for k in Hm.coeffs], dtype=np.int64)
    cofs = np.array([Hm.coeffs[k] for k in Hm.coeffs], dtype=np.complex128)
    amax, bmax = int(exps[:, 0].max()), int(exps[:, 1].max())

    def eval_H_and_dw2(w1: np.ndarray, w2: np.ndarray):
        p1 = np.empty((amax + 1,) + w1.shape, dtype=np.complex128)
        p2 = np.empty((bmax + 1,) + w2.shape, dtype=np.complex128)
        p1[0] = 1.0
        p2[0] = 1.0
        for k in range(1, amax + 1):
            p1[k] = p1[k - 1] * w1
        for k in range(1, bmax + 1):
            p2[k] = p2[k - 1] * w2
        val = np.zeros_like(w1)
        der = np.zeros_like(w1)
        for (a, b), c in zip(exps, cofs):
            val += c * p1[a] * p2[b]
            if b > 0:
                der += c * b * p1[a] * p2[b - 1]
        return val, der

    phi = 2.0 * np.pi * np.arange(nodes) / nodes
    circ = np.exp(1j * phi)

    def period_at(h: complex) -> complex:
        rho = abs(h / lam) ** 0.5
        w1 = rho * circ
        dw1 = 1j * rho * circ
        w2 = (0.25 * h / lam) / w1
        # short homotopy in the level value keeps Newton safely in basin
        for t in (0.25, 0.5, 0.75, 1.0):
            target = h * t
            for _ in range(50):
                val, der = eval_H_and_dw2(w1, w2)
                step = (val - target) / der
                w2 = w2 - step
                if np.max(np.abs(step)) < 1e-14:
                    break
            else:
                raise RuntimeError("level-set Newton tracking failed to converge")
        _, der = eval_H_and_dw2(w1, w2)
        integrand = dw1 / der
        return complex(integrand.mean() / (2j * np.pi) * 2.0 * np.pi)

    M = samples
    hs = r_h * np.exp(2j * np.pi * np.arange(M) / M)
    vals = np.array([period_at(h) for h in hs])
    jet = np.fft.fft(vals) / M  # fft uses e^{-2 pi i k m / M}, matching Taylor coefficients
    p_coeffs = {(k,): complex(jet[k]) / r_h**k for k in range(h_order + 1)}
    p = TruncatedSeries(("h",), (h_order,), p_coeffs, prune_tol=0.0)
    P = p.integrate("h", max_order=h_order + 1)
    g = P.reversion()
    return PeriodData(p=p, P=P, g=g, lam=lam, morse=morse)


# ---------------------------------------------------------------------------
# the formal invariant of a two-slice family


@dataclass(frozen=True)
class FormalInvariant:
    """``chi(h, x, eps) = chi0(h, eps) + x * chi1(h, eps)``.

    ``chi0``/``chi1`` are jets in (h, eps).  ``lam0``/``lam1`` are their
    values at h = 0 — the linear-level spectral data of the family.
    """

    chi0: TruncatedSeries
    chi1: TruncatedSeries

    def lam0(self):
        return self.chi0.subs({"h": 0.0})

    def lam1(self):
        return self.chi1.subs({"h": 0.0})

    def chi_at(self, h: complex, x: complex, eps: complex) -> complex:
        c0 = self.chi0(h=h, eps=eps)
        c1 = self.chi1(h=h, eps=eps)
        return c0 + x * c1

    def as_series(self) -> TruncatedSeries:
        hj = self.chi0.orders[self.chi0.vars.index("h")]
        je = min(
            self.chi0.orders[self.chi0.vars.index("eps")],
            self.chi1.orders[self.chi1.vars.index("eps")],
        )
        c0 = self.chi0.embedded(("h", "x", "eps"), (hj, 1, je))
        c1 = self.chi1.embedded(("h", "x", "eps"), (hj, 1, je))
        xv = TruncatedSeries.variable("x", ("h", "x", "eps"), (hj, 1, je))
        return c0 + xv * c1


def involute(inv: FormalInvariant) -> FormalInvariant:
    """The image of the invariant under the orientation involution h -> -h,
    chi -> -chi (the two choices of saddle axis ordering)."""

    def flip(s: TruncatedSeries) -> TruncatedSeries:
        ih = s.vars.index("h")
        out = {k: -((-1) ** k[ih]) * c for k, c in s.coeffs.items()}
        return TruncatedSeries(s.vars, s.orders, out)

    return FormalInvariant(chi0=flip(inv.chi0), chi1=flip(inv.chi1))


def involution_equivalent(a: FormalInvariant, b: FormalInvariant, tol: float = 1e-9) -> bool:
    """True when the invariants agree up to the orientation involution."""

    def close(x: FormalInvariant, y: FormalInvariant) -> bool:
        return (x.chi0 - y.chi0).max_abs_coeff() <= tol and (x.chi1 - y.chi1).max_abs_coeff() <= tol

    return close(a, b) or close(involute(a), b)


def formal_invariant(H: TruncatedSeries, h_order: int = 3, tol: float = 1e-8) -> FormalInvariant:
    """Formal invariant of a Hamiltonian family ``H(u1, u2, x, eps)``.

    Strategy: normal-form the two distinguished slices ``x = 0`` and
    ``x = eps`` symbolically in eps and assemble the affine-in-x invariant
    from them.  The eps-jet of ``chi1`` is one order shorter than the
    input's, because it is obtained by an exact division by eps.
    """
    if any(v not in ("u1", "u2", "x", "eps") for v in H.vars):
        raise ValueError(f"expected variables within (u1, u2, x, eps); got {H.vars}")
    if "x" not in H.vars or "eps" not in H.vars:
        raise ValueError("the family must depend on both x and eps")
    J = H.orders[H.vars.index("eps")]
    max_degree = 2 * (h_order + 1)

    H0 = H.subs({"x": 0.0})
    eps_v = TruncatedSeries.variable("eps", ("eps",), (J,))
    He = H.subs({"x": eps_v})

    nf0 = siegel_reduce(H0, max_degree=max_degree)
    lam_ref = complex(nf0.lam.subs({"eps": 0.0}))
    nfe = siegel_reduce(He, max_degree=max_degree, lam_ref=lam_ref)

    chi0 = TruncatedSeries(("h", "eps"), (h_order, J), dict(dpoly(nf0.g, "h").coeffs))
    chie = TruncatedSeries(("h", "eps"), (h_order, J), dict(dpoly(nfe.g, "h").coeffs))
    num = chie - chi0
    ie = num.vars.index("eps")
    scale = max(1.0, chi0.max_abs_coeff())
    bad = max((abs(c) for k, c in num.coeffs.items() if k[ie] == 0), default=0.0)
    if bad > tol * scale:
        raise RuntimeError(
            f"slice invariants disagree at eps = 0 (residual {bad:.2e}); cannot divide by eps"
        )
    shifted = {
        k[:ie] + (k[ie] - 1,) + k[ie + 1 :]: c for k, c in num.coeffs.items() if k[ie] >= 1
    }
    orders = list(num.orders)
    orders[ie] = max(0, orders[ie] - 1)
    chi1 = TruncatedSeries(num.vars, orders, shifted)
    return FormalInvariant(chi0=chi0, chi1=chi1)


def formal_invariant_sampled(
    H: TruncatedSeries,
    h_order: int = 3,
    eps_order: int | None = None,
    radius: float = 2e-2,
    samples: int = 16,
) -> FormalInvariant:
    """Same invariant by numeric eps-slice sampling and a Fourier jet fit.

    Independent route used to cross-check the symbolic one: for each eps on
    a small circle, normal-form the two numeric slices (with the eigenvalue
    branch pinned by the eps = 0 slice) and fit the eps-jet of each
    h-coefficient by a discrete Fourier transform.
    """
    if "x" not in H.vars or "eps" not in H.vars:
        raise ValueError("the family must depend on both x and eps")
    J = H.orders[H.vars.index("eps")] if eps_order is None else int(eps_order)
    max_degree = 2 * (h_order + 1)

    ref = siegel_reduce(H.subs({"x": 0.0, "eps": 0.0}), max_degree=max_degree)
    lam_ref = complex(ref.lam)

    M = samples
    eps_vals = radius * np.exp(2j * np.pi * np.arange(M) / M)
    chi0_rows = np.zeros((M, h_order + 1), dtype=np.complex128)
    chi1_rows = np.zeros((M, h_order + 1), dtype=np.complex128)
    for m, ev in enumerate(eps_vals):
        ev = complex(ev)
        g0 = siegel_reduce(H.subs({"x": 0.0, "eps": ev}), max_degree=max_degree, lam_ref=lam_ref).g
        ge = siegel_reduce(H.subs({"x": ev, "eps": ev}), max_degree=max_degree, lam_ref=lam_ref).g
        d0, de = dpoly(g0, "h"), dpoly(ge, "h")
        for k in range(h_order + 1):
            chi0_rows[m, k] = d0.coeff({"h": k})
            chi1_rows[m, k] = (de.coeff({"h": k}) - d0.coeff({"h": k})) / ev

    def jet_fit(rows: np.ndarray, order: int) -> TruncatedSeries:
        out = {}
        ft = np.fft.fft(rows, axis=0) / M
        for j in range(min(order, M - 1) + 1):
            for k in range(h_order + 1):
                c = complex(ft[j, k]) / radius**j
                if c != 0:
                    out[(k, j)] = c
        return TruncatedSeries(("h", "eps"), (h_order, order), out)

    return FormalInvariant(chi0=jet_fit(chi0_rows, J), chi1=jet_fit(chi1_rows, max(0, J - 1)))
