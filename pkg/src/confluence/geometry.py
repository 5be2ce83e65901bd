"""Spiraling sectoral domains for the merging singular pair {0, eps}.

Everything here is phrased in terms of the spectral data of the family at
a fixed parameter value: two complex numbers ``lam0`` (the leading
eigenvalue) and ``lam1`` (its x-slope), so that the time form is
``dt = (lam0 + lam1 x) / (x (x - eps)) dx``.

Key ingredients:

- an *admissible direction* omega: the rotated trajectory field
  ``V(x) = e^{-i omega} x (x - eps) / (lam0 + lam1 x)`` must be attracted
  to one singular point and repelled by the other.  The set of admissible
  omega is an interval determined by ``a = arg(sign * eps / lam0)``; it is
  nonempty iff |a| < pi - 2 eta, which (together with |eps| < delta_eps)
  is the membership test for the "+"/"-" parameter families.

- the rectifying coordinate ``t(x)`` (continued along explicit paths), in
  which trajectories are straight lines of direction ``e^{-i omega}``.
  The images of the exit region |x| >= delta_x form a 1-parameter family
  of "islands" of radius ``R_sh`` centered on the lattice k * Delta1,
  ``Delta1 = -2 pi i lam0 / eps``; a point belongs to the domain when some
  admissible line through it clears the islands.  At eps = 0 the lattice
  degenerates to the single island at the origin.

- sheet bookkeeping: the domain covers the annulus twice.  The two sheets
  are tracked by the continued argument of x along a standard upper/lower
  path from a base point on the lam0-ray, plus the level coordinate
  ``nu(t) = Re(t conj(Delta1)) / |Delta1|^2``, which increases by 1 for
  each counterclockwise turn of x around the origin and is half-integer
  on the cut between the singular points.  The two overlap regions are
  classified by a fixed angular window, a nu-band, and island clearance
  of the two neighbouring lifts:

      overlap 2 (contains the base point):  |arg x - arg lam0| < pi/2 - eta,
          nu in (-1/4, 1/4),  clearance at t and t - Delta1;
      overlap 1 (opposite side, lower-sheet canonical):
          |arg x - (arg lam0 - pi)| < pi/2 - eta,
          nu in (-5/4, -3/4),  clearance at t and t + Delta1.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import continue_logs, standard_path


@dataclass(frozen=True)
class GeometryParams:
    eta: float = 0.2
    delta_x: float = 0.5
    delta_eps: float = 0.05
    n_omega: int = 32
    omega_guard: float = 1e-2


DEFAULT_PARAMS = GeometryParams()


def _sign_value(sign: str | int) -> int:
    s = {"+": 1, "-": -1, 1: 1, -1: -1}.get(sign)
    if s is None:
        raise ValueError(f"sign must be '+'/'-' or +-1, got {sign!r}")
    return s


def admissible_interval(
    eps: complex, lam0: complex, sign: str | int = "+", params: GeometryParams = DEFAULT_PARAMS
) -> tuple[float, float] | None:
    """Open interval of admissible rotation angles, or None when empty.

    At eps = 0 the pair has merged; every direction in the full interval
    (-pi/2 + eta, pi/2 - eta) is admissible.
    """
    s = _sign_value(sign)
    eps = complex(eps)
    if eps == 0:
        a = 0.0
    else:
        a = cmath.phase(s * eps / lam0)
    lo = max(0.0, a) - math.pi / 2 + params.eta
    hi = min(0.0, a) + math.pi / 2 - params.eta
    if lo >= hi:
        return None
    return (lo, hi)


def family_member(
    eps: complex, lam0: complex, sign: str | int = "+", params: GeometryParams = DEFAULT_PARAMS
) -> bool:
    """Does (eps, lam0) belong to the chosen parameter family?"""
    s = _sign_value(sign)
    eps = complex(eps)
    if eps == 0:
        return True
    if abs(eps) >= params.delta_eps:
        return False
    a = cmath.phase(s * eps / lam0)
    return abs(a) < math.pi - 2 * params.eta


def shield_radius(lam0: complex, lam1: complex, params: GeometryParams = DEFAULT_PARAMS) -> float:
    """Conservative radius of the exit-region islands in the t-plane."""
    return 1.5 * abs(lam0) / params.delta_x + abs(lam1) * (abs(math.log(params.delta_x)) + math.pi)


def delta1(eps: complex, lam0: complex) -> complex:
    """t-plane period of one counterclockwise x-turn around the origin."""
    eps = complex(eps)
    if eps == 0:
        raise ValueError("the t-period is infinite at eps = 0")
    return -2j * math.pi * lam0 / eps


def t_of_x(path: Sequence[complex] | complex, eps: complex, lam0: complex, lam1: complex) -> complex:
    """Rectifying coordinate continued along a polyline path."""
    if isinstance(path, (complex, float, int)):
        path = [complex(path)]
    eps = complex(eps)
    x_end = complex(path[-1])
    if eps == 0:
        (w0,) = continue_logs([0.0], path)
        return -lam0 / x_end + lam1 * w0
    w0, we = continue_logs([0.0, eps], path)
    return -(lam0 / eps) * w0 + (lam0 / eps + lam1) * we


def nu_level(t: complex, d1: complex) -> float:
    """Component of t along the lattice direction, in units of |Delta1|."""
    return (t * d1.conjugate()).real / abs(d1) ** 2


def line_clearance(t: complex, omega: float, d1: complex | None, heights: int = 1) -> float:
    """Smallest perpendicular distance from the islands' centers to the
    straight line through ``t`` with direction ``e^{-i omega}``.

    The signed distance to island k is Im((k Delta1 - t) e^{i omega}),
    affine in k, so the minimum over the lattice sits at the rounded root
    (the neighbours are checked as a guard).  ``d1 = None`` means the
    single island at the origin (the eps = 0 case).
    """
    rot = cmath.exp(1j * omega)
    if d1 is None:
        return abs(((0.0 - t) * rot).imag)
    slope = (d1 * rot).imag
    intercept = ((0.0 - t) * rot).imag
    if abs(slope) < 1e-300:
        return abs(intercept)
    k_star = round(-intercept / slope)
    return min(abs(slope * k + intercept) for k in range(k_star - heights, k_star + heights + 1))


def _omega_grid(interval: tuple[float, float], params: GeometryParams) -> list[float]:
    lo, hi = interval[0] + params.omega_guard, interval[1] - params.omega_guard
    if lo > hi:
        return []
    n = max(2, params.n_omega)
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def t_member(
    t: complex,
    eps: complex,
    lam0: complex,
    lam1: complex,
    sign: str | int = "+",
    params: GeometryParams = DEFAULT_PARAMS,
) -> bool:
    """Is there an admissible line through t clearing every island?"""
    interval = admissible_interval(eps, lam0, sign, params)
    if interval is None:
        return False
    d1 = None if complex(eps) == 0 else delta1(eps, lam0)
    r_sh = shield_radius(lam0, lam1, params)
    return any(line_clearance(t, w, d1) > r_sh for w in _omega_grid(interval, params))


def default_base(lam0: complex, params: GeometryParams = DEFAULT_PARAMS) -> complex:
    """Canonical base point: halfway to the exit circle along the lam0-ray."""
    return (params.delta_x / 2) * lam0 / abs(lam0)


def _splice_detour(pts: list[complex], avoid: complex, side: str) -> list[complex]:
    """Replace sub-segments of a polyline passing near ``avoid`` by arcs.

    ``side`` is "left" or "right" relative to the direction of travel; the
    detour radius shrinks near the endpoints so the spliced path keeps the
    original endpoints.
    """
    out = [pts[0]]
    for z1, z2 in zip(pts, pts[1:]):
        seg = z2 - z1
        L = abs(seg)
        if L == 0:
            continue
        r_det = min(
            0.45 * abs(avoid) if avoid != 0 else math.inf,
            0.9 * abs(z1 - avoid),
            0.9 * abs(z2 - avoid),
        )
        tproj = ((avoid - z1) * seg.conjugate()).real / L**2
        tc = max(0.0, min(1.0, tproj))
        if r_det <= 0 or abs(z1 + tc * seg - avoid) >= r_det:
            out.append(z2)
            continue
        disc = math.sqrt(max(0.0, r_det**2 - abs(z1 + tproj * seg - avoid) ** 2)) / L
        tin = max(0.0, tproj - disc)
        tout = min(1.0, tproj + disc)
        zin, zout = z1 + tin * seg, z2 if tout >= 1.0 else z1 + tout * seg
        ain = cmath.phase(zin - avoid)
        aout = cmath.phase(zout - avoid)
        side_vec = seg / L * (1j if side == "left" else -1j)
        sweeps = [(aout - ain) % (2 * math.pi)]
        sweeps.append(sweeps[0] - 2 * math.pi)
        best = None
        for sweep in sweeps:
            mid = avoid + r_det * cmath.exp(1j * (ain + sweep / 2))
            score = ((mid - avoid) * side_vec.conjugate()).real
            if best is None or score > best[0]:
                best = (score, sweep)
        sweep = best[1]
        n = max(8, int(abs(sweep) / (math.pi / 16)))
        out.append(avoid + r_det * cmath.exp(1j * ain))
        out.extend(avoid + r_det * cmath.exp(1j * (ain + sweep * k / n)) for k in range(1, n + 1))
        out.append(z2)
    dedup = [out[0]]
    for z in out[1:]:
        if z != dedup[-1]:
            dedup.append(z)
    return dedup


def _sheet_path(base: complex, x: complex, sheet: str, eps: complex) -> list[complex]:
    """Standard-sheet polyline from base to x avoiding both singular points.

    The upper sheet approaches targets hiding behind ``eps`` from the left
    of the travel direction's mirror — concretely, the detour bulges into
    the upper half plane for the reference configuration (real positive
    eps, base on the positive ray), matching the upper path's continued
    argument; the lower sheet mirrors it.
    """
    pts = standard_path(base, x, sheet)
    eps = complex(eps)
    if eps != 0:
        pts = _splice_detour(pts, eps, "right" if sheet == "upper" else "left")
    return pts


_BANDS = {"overlap2": (-0.25, 0.25), "overlap1": (-1.25, -0.75)}
_SHEET_BANDS = {"upper": (-0.75, 0.25), "lower": (-1.25, -0.25)}


def _shift_into_band(t: complex, d1: complex, band: tuple[float, float], margin: float) -> complex | None:
    """Lift t by an integer multiple of Delta1 into the open nu-band."""
    lo, hi = band
    center = (lo + hi) / 2
    k = round(center - nu_level(t, d1))
    tk = t + k * d1
    nu = nu_level(tk, d1)
    if lo + margin < nu < hi - margin:
        return tk
    return None


def classify_point(
    x: complex,
    eps: complex,
    lam0: complex,
    lam1: complex,
    which: str,
    sign: str | int = "+",
    params: GeometryParams = DEFAULT_PARAMS,
    base: complex | None = None,
) -> bool:
    """Membership of x in one of the two self-overlap regions.

    ``which`` is "overlap2" (the component containing the base point,
    canonical on the upper sheet) or "overlap1" (the component on the
    opposite side, canonical on the lower sheet, continued argument of x
    centered at arg(lam0) - pi).
    """
    if which not in ("overlap1", "overlap2"):
        raise ValueError(f"which must be 'overlap1' or 'overlap2', got {which!r}")
    if base is None:
        base = default_base(lam0, params)
    x = complex(x)
    if x == 0 or abs(x) >= params.delta_x or (complex(eps) != 0 and abs(x - eps) < 1e-12):
        return False
    phl = cmath.phase(lam0)
    sheet = "upper" if which == "overlap2" else "lower"
    center = phl if which == "overlap2" else phl - math.pi
    path = _sheet_path(base, x, sheet, eps)
    (wx,) = continue_logs([0.0], path)
    theta = wx.imag
    if abs(theta - center) >= math.pi / 2 - params.eta:
        return False
    t = t_of_x(path, eps, lam0, lam1)
    if complex(eps) == 0:
        return t_member(t, eps, lam0, lam1, sign, params)
    d1 = delta1(eps, lam0)
    g = (params.eta + params.omega_guard) / (2 * math.pi)
    tk = _shift_into_band(t, d1, _BANDS[which], g)
    if tk is None:
        return False
    neighbour = tk - d1 if which == "overlap2" else tk + d1
    return t_member(tk, eps, lam0, lam1, sign, params) and t_member(
        neighbour, eps, lam0, lam1, sign, params
    )


def sheet_member(
    x: complex,
    eps: complex,
    lam0: complex,
    lam1: complex,
    sheet: str,
    sign: str | int = "+",
    params: GeometryParams = DEFAULT_PARAMS,
    base: complex | None = None,
) -> bool:
    """Membership of x in one sheet of the two-sheeted domain.

    The sheet is reached by the standard upper/lower path; its continued
    argument window has opening 2 pi - 2 eta, bisected by
    arg(lam0) +- pi/2.
    """
    if sheet not in ("upper", "lower"):
        raise ValueError(f"sheet must be 'upper' or 'lower', got {sheet!r}")
    if base is None:
        base = default_base(lam0, params)
    x = complex(x)
    if x == 0 or abs(x) >= params.delta_x or (complex(eps) != 0 and abs(x - eps) < 1e-12):
        return False
    phl = cmath.phase(lam0)
    center = phl + math.pi / 2 if sheet == "upper" else phl - math.pi / 2
    path = _sheet_path(base, x, sheet, eps)
    (wx,) = continue_logs([0.0], path)
    theta = wx.imag
    if abs(theta - center) >= math.pi - params.eta:
        return False
    t = t_of_x(path, eps, lam0, lam1)
    if complex(eps) == 0:
        return t_member(t, eps, lam0, lam1, sign, params)
    d1 = delta1(eps, lam0)
    g = (params.eta + params.omega_guard) / (2 * math.pi)
    tk = _shift_into_band(t, d1, _SHEET_BANDS[sheet], g)
    if tk is None:
        return False
    return t_member(tk, eps, lam0, lam1, sign, params)


def sector_eps0(
    x: complex, lam0: complex, which: str, params: GeometryParams = DEFAULT_PARAMS
) -> bool:
    """Asymptotic (small |x|) angular shape of an overlap at eps = 0.

    overlap2 is the sector of opening pi - 2 eta bisected by the lam0-ray;
    overlap1 is its opposite.  These are the |x| -> 0 limit shapes; the
    certified membership test (classify_point) is radius-dependent and
    more conservative.
    """
    if which not in ("overlap1", "overlap2"):
        raise ValueError(f"which must be 'overlap1' or 'overlap2', got {which!r}")
    x = complex(x)
    if x == 0 or abs(x) >= params.delta_x:
        return False
    center = cmath.phase(lam0) + (0.0 if which == "overlap2" else -math.pi)
    rel = (cmath.phase(x) - center + math.pi) % (2 * math.pi) - math.pi
    return abs(rel) < math.pi / 2 - params.eta


# ---------------------------------------------------------------------------
# trajectories of the rotated field


def trajectory_velocity(x: complex, eps: complex, lam0: complex, lam1: complex, omega: float) -> complex:
    return cmath.exp(-1j * omega) * x * (x - eps) / (lam0 + lam1 * x)


def integrate_trajectory(
    x0: complex,
    eps: complex,
    lam0: complex,
    lam1: complex,
    omega: float,
    params: GeometryParams = DEFAULT_PARAMS,
    max_steps: int = 40000,
    arrive_tol: float = 1e-8,
    backward: bool = False,
) -> tuple[list[complex], str]:
    """Classical RK4 with a step proportional to the distance to the
    singular points; returns the polyline and a fate label among
    "singular:0", "singular:eps", "exit", "timeout"."""
    eps = complex(eps)
    sgn = -1.0 if backward else 1.0

    def vel(z: complex) -> complex:
        return sgn * trajectory_velocity(z, eps, lam0, lam1, omega)

    pts = [complex(x0)]
    x = complex(x0)
    for _ in range(max_steps):
        if abs(x) < arrive_tol:
            return pts, "singular:0"
        if eps != 0 and abs(x - eps) < arrive_tol:
            return pts, "singular:eps"
        if abs(x) >= params.delta_x:
            return pts, "exit"
        v = vel(x)
        speed = abs(v)
        if speed == 0:
            return pts, "timeout"
        near = min(abs(x), abs(x - eps)) if eps != 0 else abs(x)
        dt = 0.01 * near / speed
        k1 = vel(x)
        k2 = vel(x + 0.5 * dt * k1)
        k3 = vel(x + 0.5 * dt * k2)
        k4 = vel(x + dt * k3)
        x = x + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        pts.append(x)
    return pts, "timeout"


def cut_polyline(
    eps: complex,
    lam0: complex,
    lam1: complex,
    sign: str | int = "+",
    params: GeometryParams = DEFAULT_PARAMS,
) -> list[complex]:
    """The cut between the singular points, realized as the trajectory of
    the canonical (interval-center) direction through the midpoint."""
    eps = complex(eps)
    if eps == 0:
        raise ValueError("the cut degenerates at eps = 0")
    interval = admissible_interval(eps, lam0, sign, params)
    if interval is None:
        raise ValueError("parameters outside the family: no admissible direction")
    omega = 0.5 * (interval[0] + interval[1])
    mid = eps / 2.0
    fwd, fate_f = integrate_trajectory(mid, eps, lam0, lam1, omega, params)
    bwd, fate_b = integrate_trajectory(mid, eps, lam0, lam1, omega, params, backward=True)
    if not (fate_f.startswith("singular") and fate_b.startswith("singular")):
        raise RuntimeError(f"cut trajectory did not connect the pair: {fate_f}, {fate_b}")
    return list(reversed(bwd)) + fwd[1:]


# ---------------------------------------------------------------------------
# loops and winding


def winding_numbers(path: Sequence[complex], anchors: Sequence[complex]) -> list[int]:
    """Integer winding of a closed polyline around each anchor."""
    pts = [complex(z) for z in path]
    if abs(pts[0] - pts[-1]) > 1e-12 * max(1.0, abs(pts[0])):
        raise ValueError("winding numbers need a closed path")
    out = []
    for a in anchors:
        total = 0.0
        for z1, z2 in zip(pts, pts[1:]):
            total += cmath.phase((z2 - a) / (z1 - a))
        w = total / (2 * math.pi)
        k = round(w)
        if abs(w - k) > 1e-9:
            raise ValueError(f"winding around {a} is not an integer: {w}")
        out.append(int(k))
    return out


def loop_path(
    base: complex,
    center: complex,
    other: complex,
    detour: str = "above",
    radius: float | None = None,
    segments: int = 64,
) -> list[complex]:
    """Closed polyline from ``base`` around ``center`` once, counterclockwise.

    The approach leg walks straight from ``base`` towards ``center``; if it
    passes near ``other``, a semicircular detour (above or below, by
    imaginary part) of radius half the pair distance is inserted.  The loop
    proper is a circle of the given radius (default: 0.4 of the pair
    distance) with at least ``segments`` segments, and the return leg
    retraces the approach.
    """
    base, center, other = complex(base), complex(center), complex(other)
    pair = abs(center - other)
    if pair == 0:
        raise ValueError("center and other must be distinct")
    if radius is None:
        radius = 0.4 * pair
    if radius <= 0 or radius >= pair:
        raise ValueError("loop radius must lie strictly between 0 and the pair distance")
    if detour not in ("above", "below"):
        raise ValueError(f"detour must be 'above' or 'below', got {detour!r}")

    entry = center + radius * (base - center) / abs(base - center)
    approach: list[complex] = [base]
    seg = entry - base
    r_det = pair / 2.0
    # does the straight approach pass within r_det of the other point?
    tproj = ((other - base) * seg.conjugate()).real / abs(seg) ** 2
    tproj = max(0.0, min(1.0, tproj))
    if abs(base + tproj * seg - other) < r_det:
        disc = math.sqrt(max(0.0, r_det**2 - abs(base + tproj * seg - other) ** 2))
        tin = max(0.0, tproj - disc / abs(seg))
        tout = min(1.0, tproj + disc / abs(seg))
        zin, zout = base + tin * seg, base + tout * seg
        ain, aout = cmath.phase(zin - other), cmath.phase(zout - other)
        dcc = (aout - ain) % (2 * math.pi)  # counterclockwise sweep
        arcs = []
        for sweep in (dcc, dcc - 2 * math.pi):
            n = max(8, int(abs(sweep) / (math.pi / 16)))
            arc = [
                other + r_det * cmath.exp(1j * (ain + sweep * k / n)) for k in range(n + 1)
            ]
            arcs.append(arc)
        mids = [arc[len(arc) // 2] for arc in arcs]
        pick = 0 if (mids[0].imag > other.imag) == (detour == "above") else 1
        approach += [other + r_det * (zin - other) / abs(zin - other)]
        approach += arcs[pick][1:]
        approach += [zout]
    approach.append(entry)

    a0 = cmath.phase(entry - center)
    n = max(int(segments), 64)
    circle = [center + radius * cmath.exp(1j * (a0 + 2 * math.pi * k / n)) for k in range(1, n + 1)]
    return approach + circle + list(reversed(approach))[1:]


# ---------------------------------------------------------------------------
# assembled domain data (for reports and drawings)


@dataclass(frozen=True)
class DomainData:
    eps: complex
    lam0: complex
    lam1: complex
    sign: str
    params: GeometryParams
    interval: tuple[float, float]
    trajectories: list = field(default_factory=list)  # dicts: omega, points, fate
    cut: list = field(default_factory=list)
    samples: list = field(default_factory=list)  # dicts: x, overlap1, overlap2, upper, lower


def build_domain(
    eps: complex,
    lam0: complex,
    lam1: complex,
    sign: str | int = "+",
    params: GeometryParams = DEFAULT_PARAMS,
    n_seeds: int = 8,
    n_samples: int = 60,
) -> DomainData:
    """Trajectory portrait + classified sample cloud for one parameter."""
    eps = complex(eps)
    if not family_member(eps, lam0, sign, params):
        raise ValueError("parameters outside the chosen family")
    interval = admissible_interval(eps, lam0, sign, params)
    assert interval is not None
    omegas = [interval[0] + (interval[1] - interval[0]) * f for f in (0.25, 0.5, 0.75)]
    trajectories = []
    rep = equilibrium_points(eps, sign)["repulsive"]
    att = equilibrium_points(eps, sign)["attractive"]
    seed_r = max(2.0 * abs(eps), 0.02)
    for w in omegas:
        for k in range(n_seeds):
            z0 = rep + seed_r * cmath.exp(2j * math.pi * k / n_seeds)
            if abs(z0 - att) < 1e-9:
                continue
            pts, fate = integrate_trajectory(z0, eps, lam0, lam1, w, params, max_steps=20000)
            trajectories.append({"omega": w, "points": pts, "fate": fate})
    cut = cut_polyline(eps, lam0, lam1, sign, params) if eps != 0 else []
    samples = []
    rng = np.random.default_rng(0)
    for _ in range(n_samples):
        r = 10 ** rng.uniform(math.log10(max(2 * abs(eps), 0.02)), math.log10(0.9 * params.delta_x))
        th = rng.uniform(-math.pi, math.pi)
        z = r * cmath.exp(1j * th)
        samples.append(
            {
                "x": z,
                "overlap1": classify_point(z, eps, lam0, lam1, "overlap1", sign, params),
                "overlap2": classify_point(z, eps, lam0, lam1, "overlap2", sign, params),
                "upper": sheet_member(z, eps, lam0, lam1, "upper", sign, params),
                "lower": sheet_member(z, eps, lam0, lam1, "lower", sign, params),
            }
        )
    return DomainData(
        eps=eps,
        lam0=lam0,
        lam1=lam1,
        sign="+" if _sign_value(sign) > 0 else "-",
        params=params,
        interval=interval,
        trajectories=trajectories,
        cut=cut,
        samples=samples,
    )


def equilibrium_points(eps: complex, sign: str | int) -> dict:
    """Attractive/repulsive points of the rotated trajectory field."""
    from .model import equilibria

    return equilibria(eps, "+" if _sign_value(sign) > 0 else "-")
