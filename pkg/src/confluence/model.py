"""The exactly solvable model family and its branch bookkeeping.

For a fixed level h and parameter eps, the scalar model equation

    x (x - eps) E'(x) = chi(h, x, eps) E(x),      chi = chi0 + x*chi1,

has the closed-form solution

    E(x) = x^(-chi0/eps) * (x - eps)^(chi0/eps + chi1)     (eps != 0)
    E(x) = exp(-chi0 / x) * x^chi1                         (eps  = 0)

multivalued through the two complex powers (one essential factor at
eps = 0).  A *value* of E therefore only makes sense together with a path
from a base point: this module evaluates E by continuing the logarithms of
x and x - eps along explicit polyline paths, with the principal branch at
the path start.  Two standard paths ("upper"/"lower" sheet) reach any
target from a base point on the right; they agree on the right of the
singular pair and differ by the total monodromy factor e^{2 pi i chi1} on
the left.

The diagonal matrix diag(E, 1/E) solves the 2x2 traceless model system,
and its formal monodromy around each singular point is the torus action
computed here.  The individual factors around x = 0 and x = eps merge into
a single essential singularity as eps -> 0; only their product survives
the limit, so requesting a single factor at eps = 0 raises
``UndefinedOperatorError``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class UndefinedOperatorError(ValueError):
    """Requested an operator that does not survive the confluent limit."""


# ---------------------------------------------------------------------------
# continuous logarithms along polylines


def continue_logs(anchors: Sequence[complex], path: Sequence[complex]) -> list[complex]:
    """Continued values of log(z - a) for each anchor at the end of a path.

    ``path`` is a polyline (sequence of waypoints); the branch is principal
    at ``path[0]``.  Straight segments subtend less than pi at any external
    point, so the per-segment increment is the principal log of the
    endpoint ratio; segments are subdivided further so each piece turns by
    less than pi/2 around every anchor.  Raises if the path runs into an
    anchor.
    """
    pts = [complex(z) for z in path]
    if not pts:
        raise ValueError("empty path")
    logs = []
    for a in anchors:
        a = complex(a)
        z0 = pts[0] - a
        if z0 == 0:
            raise ValueError("path starts at a singular point")
        w = cmath.log(z0)
        for z1, z2 in zip(pts, pts[1:]):
            d1, d2 = z1 - a, z2 - a
            seg = z2 - z1
            if abs(seg) > 0:
                t = max(0.0, min(1.0, ((a - z1) * seg.conjugate()).real / abs(seg) ** 2))
                dist = abs(z1 + t * seg - a)
            else:
                dist = abs(d1)
            if dist < 1e-12 * max(1.0, abs(a)):
                raise ValueError("path passes through a singular point")
            ratio = d2 / d1
            turn = abs(cmath.phase(ratio))
            nsub = max(1, int(math.ceil(turn / (0.45 * math.pi))))
            prev = d1
            for k in range(1, nsub + 1):
                cur = z1 + (z2 - z1) * (k / nsub) - a
                if abs(cur) < 1e-300 or abs(prev) < 1e-300:
                    raise ValueError("path passes through a singular point")
                w += cmath.log(cur / prev)
                prev = cur
        logs.append(w)
    return logs


def standard_path(base: complex, target: complex, sheet: str, step: float = math.pi / 16) -> list[complex]:
    """Arc-then-radial path from ``base`` to ``target`` on a chosen sheet.

    The path follows the circle of radius |base| from arg(base) to the
    target's angle, then moves radially.  The angle is wrapped so that,
    seen from a base on the right, the "upper" sheet covers target angles
    in (arg base - pi/2, arg base + 3 pi/2] (left targets reached through
    the upper half plane) and the "lower" sheet the mirror window.  On the
    shared right window the two sheets produce the identical path.
    """
    base, target = complex(base), complex(target)
    if base == 0 or target == 0:
        raise ValueError("base and target must be nonzero")
    r0 = abs(base)
    th0 = cmath.phase(base)
    th1 = cmath.phase(target)
    if sheet == "upper":
        delta = (th1 - th0 + math.pi / 2) % (2 * math.pi) - math.pi / 2
    elif sheet == "lower":
        delta = (th1 - th0 + 3 * math.pi / 2) % (2 * math.pi) - 3 * math.pi / 2
    else:
        raise ValueError(f"sheet must be 'upper' or 'lower', got {sheet!r}")
    n = max(1, int(math.ceil(abs(delta) / step)))
    pts = [base] + [r0 * cmath.exp(1j * (th0 + delta * k / n)) for k in range(1, n + 1)]
    if abs(pts[-1] - target) > 1e-15 * max(1.0, abs(target)):
        pts.append(target)
    return pts


@dataclass(frozen=True)
class BranchSpec:
    """A base point on the right plus the sheet used to reach the target."""

    base: complex
    sheet: str = "upper"


def _chi_values(inv, h: complex, eps: complex) -> tuple[complex, complex]:
    if hasattr(inv, "chi0") and hasattr(inv, "chi1"):
        c0, c1 = inv.chi0, inv.chi1
        c0 = c0(h=h, eps=eps) if not isinstance(c0, complex) else c0
        c1 = c1(h=h, eps=eps) if not isinstance(c1, complex) else c1
        return complex(c0), complex(c1)
    c0, c1 = inv
    return complex(c0), complex(c1)


def e_chi(inv, h: complex, eps: complex, path: Sequence[complex] | complex) -> complex:
    """Value of the model solution E at the end of ``path``.

    ``inv`` is a formal invariant (anything with chi0/chi1 series) or a
    plain pair of complex values (chi0, chi1).  A bare complex ``path``
    means the one-point path (principal branches at that point).
    """
    if isinstance(path, (complex, float, int)):
        path = [complex(path)]
    c0, c1 = _chi_values(inv, h, eps)
    eps = complex(eps)
    if eps == 0:
        (w0,) = continue_logs([0.0], path)
        x_end = complex(path[-1])
        return cmath.exp(-c0 / x_end + c1 * w0)
    w0, we = continue_logs([0.0, eps], path)
    return cmath.exp(-(c0 / eps) * w0 + (c0 / eps + c1) * we)


def branch_value(inv, h: complex, eps: complex, x: complex, branch: BranchSpec) -> complex:
    """E at ``x`` along the standard path of the given branch."""
    return e_chi(inv, h, eps, standard_path(branch.base, x, branch.sheet))


def model_fundamental_matrix(inv, h: complex, eps: complex, path: Sequence[complex] | complex) -> np.ndarray:
    """diag(E, 1/E) — fundamental solution of the 2x2 traceless model."""
    val = e_chi(inv, h, eps, path)
    return np.array([[val, 0.0], [0.0, 1.0 / val]], dtype=np.complex128)


# ---------------------------------------------------------------------------
# equilibria of the model flow


def equilibria(eps: complex, sign: str | int) -> dict:
    """Attractive/repulsive singular points of the model flow family.

    For the "+" family the attractive point is x = 0 and the repulsive one
    x = eps; the "-" family swaps them.
    """
    s = {"+": 1, "-": -1, 1: 1, -1: -1}.get(sign)
    if s is None:
        raise ValueError(f"sign must be '+'/'-' or +-1, got {sign!r}")
    if s > 0:
        return {"attractive": 0.0 + 0.0j, "repulsive": complex(eps)}
    return {"attractive": complex(eps), "repulsive": 0.0 + 0.0j}


# ---------------------------------------------------------------------------
# formal monodromy


def torus_action(a: complex) -> np.ndarray:
    """diag(e^a, e^{-a}) — preserves the product of the two components."""
    ea = cmath.exp(a)
    return np.array([[ea, 0.0], [0.0, 1.0 / ea]], dtype=np.complex128)


def formal_monodromy(inv, h: complex, eps: complex, which: str) -> np.ndarray:
    """Formal monodromy of the model around one or both singular points.

    ``which`` is "zero" (loop around x = 0), "eps" (around x = eps) or
    "total" (around both).  At eps = 0 the two points have merged and only
    the total monodromy is defined; the individual factors raise
    ``UndefinedOperatorError``.
    """
    c0, c1 = _chi_values(inv, h, eps)
    eps = complex(eps)
    if which == "total":
        return torus_action(2j * math.pi * c1)
    if eps == 0:
        raise UndefinedOperatorError(
            "individual monodromy factors are undefined at eps = 0; only 'total' survives"
        )
    if which == "zero":
        return torus_action(-2j * math.pi * c0 / eps)
    if which == "eps":
        return torus_action(2j * math.pi * (c0 / eps + c1))
    raise ValueError(f"which must be 'zero', 'eps' or 'total', got {which!r}")
