"""Truncated multivariate complex power series.

Every formal object in this package (Hamiltonian germs, normal forms, the
invariant chi, normalizing transformations) is carried by a single type:
a complex power-series jet in a subset of the variables ``u1, u2, h, x, eps``
with an explicit truncation order per variable.  Coefficients beyond the
truncation orders are *unknown* (not zero): arithmetic keeps only the part of
the result that is determined by the retained jets, which is why operations
on series with different orders truncate to the minimum shared order.

Values are immutable after construction; all operations are pure functions,
so series can be shared freely between threads.

Serialization: ``to_json``/``from_json`` use the schema
``{"vars": [...], "orders": [...], "coeffs": [[[i, j, ...], [re, im]], ...]}``
with coefficients listed in graded lexicographic order of the exponent tuple.
"""

from __future__ import annotations

import json
import math
from typing import Callable, Iterable, Mapping, Sequence, Union

Scalar = Union[int, float, complex]

#: The fixed variable universe and its canonical ordering.
VAR_UNIVERSE = ("u1", "u2", "h", "x", "eps")
_VAR_RANK = {v: i for i, v in enumerate(VAR_UNIVERSE)}


def _canon_vars(variables: Sequence[str]) -> tuple[str, ...]:
    vs = tuple(variables)
    for v in vs:
        if v not in _VAR_RANK:
            raise ValueError(f"unknown variable {v!r}; universe is {VAR_UNIVERSE}")
    if len(set(vs)) != len(vs):
        raise ValueError(f"duplicate variable in {vs}")
    return tuple(sorted(vs, key=_VAR_RANK.__getitem__))


class TruncatedSeries:
    """A complex power-series jet with per-variable truncation orders."""

    __slots__ = ("vars", "orders", "coeffs")

    def __init__(
        self,
        variables: Sequence[str],
        orders: Sequence[int],
        coeffs: Mapping[tuple[int, ...], Scalar] | None = None,
        prune_tol: float = 0.0,
    ):
        vs = tuple(variables)
        canon = _canon_vars(vs)
        if canon != vs:
            # re-order the incoming exponents to canonical variable order
            perm = [vs.index(v) for v in canon]
            orders = [orders[p] for p in perm]
            if coeffs:
                coeffs = {tuple(k[p] for p in perm): c for k, c in coeffs.items()}
            vs = canon
        od = tuple(int(o) for o in orders)
        if len(od) != len(vs):
            raise ValueError("orders must match variables")
        if any(o < 0 for o in od):
            raise ValueError("orders must be non-negative")
        cf: dict[tuple[int, ...], complex] = {}
        if coeffs:
            for k, c in coeffs.items():
                k = tuple(int(e) for e in k)
                if len(k) != len(vs):
                    raise ValueError(f"exponent {k} has wrong length for {vs}")
                if any(e < 0 for e in k):
                    raise ValueError(f"negative exponent in {k}")
                if all(e <= o for e, o in zip(k, od)):
                    c = complex(c)
                    if abs(c) > prune_tol or (prune_tol == 0.0 and c != 0):
                        cf[k] = c
        object.__setattr__(self, "vars", vs)
        object.__setattr__(self, "orders", od)
        object.__setattr__(self, "coeffs", cf)

    # -- immutability -----------------------------------------------------
    def __setattr__(self, name, value):
        raise AttributeError("TruncatedSeries is immutable")

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, variables: Sequence[str], orders: Sequence[int]) -> "TruncatedSeries":
        return cls(variables, orders, {})

    @classmethod
    def constant(cls, value: Scalar, variables: Sequence[str], orders: Sequence[int]) -> "TruncatedSeries":
        z = (0,) * len(tuple(variables))
        return cls(variables, orders, {z: value})

    @classmethod
    def variable(cls, name: str, variables: Sequence[str], orders: Sequence[int]) -> "TruncatedSeries":
        vs = _canon_vars(variables)
        if name not in vs:
            raise ValueError(f"{name!r} not among {vs}")
        idx = vs.index(name)
        ords = [orders[tuple(variables).index(v)] for v in vs]
        if ords[idx] < 1:
            raise ValueError(f"order of {name!r} must be >= 1 to represent it")
        key = tuple(1 if i == idx else 0 for i in range(len(vs)))
        return cls(vs, ords, {key: 1.0})

    # -- basic accessors ----------------------------------------------------
    def coeff(self, exponents: Mapping[str, int] | Sequence[int]) -> complex:
        """Coefficient of a monomial, given as {var: exp} or a full tuple."""
        if isinstance(exponents, Mapping):
            for v in exponents:
                if v not in self.vars and exponents[v] != 0:
                    return 0.0 + 0.0j
            key = tuple(int(exponents.get(v, 0)) for v in self.vars)
        else:
            key = tuple(int(e) for e in exponents)
        return self.coeffs.get(key, 0.0 + 0.0j)

    def constant_term(self) -> complex:
        return self.coeffs.get((0,) * len(self.vars), 0.0 + 0.0j)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.coeffs.values()), default=0.0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.max_abs_coeff() <= tol

    def degree(self, var: str | None = None) -> int:
        """Largest retained exponent of ``var`` (total degree if None)."""
        if not self.coeffs:
            return 0
        if var is None:
            return max(sum(k) for k in self.coeffs)
        i = self.vars.index(var)
        return max(k[i] for k in self.coeffs)

    def terms(self) -> Iterable[tuple[tuple[int, ...], complex]]:
        return self.coeffs.items()

    def __repr__(self):
        n = len(self.coeffs)
        return f"TruncatedSeries(vars={self.vars}, orders={self.orders}, {n} terms)"

    # -- context merging ----------------------------------------------------
    def embedded(self, variables: Sequence[str], orders: Sequence[int]) -> "TruncatedSeries":
        """Re-express this series in a superset variable context.

        New variables get the given order; orders of existing variables are
        clipped to the minimum of old and new (jet information discipline).
        """
        vs = _canon_vars(variables)
        ords = list(orders[tuple(variables).index(v)] for v in vs)
        for v in self.vars:
            if v not in vs:
                raise ValueError(f"cannot drop variable {v!r} by embedding")
        pos = [vs.index(v) for v in self.vars]
        for i, v in enumerate(self.vars):
            ords[pos[i]] = min(ords[pos[i]], self.orders[i])
        out: dict[tuple[int, ...], complex] = {}
        for k, c in self.coeffs.items():
            key = [0] * len(vs)
            ok = True
            for i, e in enumerate(k):
                if e > ords[pos[i]]:
                    ok = False
                    break
                key[pos[i]] = e
            if ok:
                out[tuple(key)] = c
        return TruncatedSeries(vs, ords, out)

    def widened(self, variables: Sequence[str], orders: Sequence[int]) -> "TruncatedSeries":
        """Re-express with explicitly chosen orders, raising them if asked.

        Unlike :meth:`embedded`, this does not clip to the minimum of old and
        new orders.  It is only sound when the caller knows the series is an
        exact polynomial within its declared orders (no unknown tail), which
        is the standing situation in the normal-form pipeline.
        """
        vs = _canon_vars(variables)
        ords = [orders[tuple(variables).index(v)] for v in vs]
        for v in self.vars:
            if v not in vs:
                raise ValueError(f"cannot drop variable {v!r} by widening")
        pos = {v: vs.index(v) for v in self.vars}
        out: dict[tuple[int, ...], complex] = {}
        for k, c in self.coeffs.items():
            key = [0] * len(vs)
            for v, e in zip(self.vars, k):
                key[pos[v]] = e
            out[tuple(key)] = c
        return TruncatedSeries(vs, ords, out)

    @staticmethod
    def _merged_context(a: "TruncatedSeries", b: "TruncatedSeries"):
        vs = _canon_vars(tuple(set(a.vars) | set(b.vars)))
        ords = []
        for v in vs:
            if v in a.vars and v in b.vars:
                ords.append(min(a.orders[a.vars.index(v)], b.orders[b.vars.index(v)]))
            elif v in a.vars:
                ords.append(a.orders[a.vars.index(v)])
            else:
                ords.append(b.orders[b.vars.index(v)])
        return vs, tuple(ords)

    def _coerce(self, other: Scalar | "TruncatedSeries"):
        if isinstance(other, TruncatedSeries):
            if other.vars == self.vars and other.orders == self.orders:
                return self, other
            vs, ords = TruncatedSeries._merged_context(self, other)
            return self.embedded(vs, ords), other.embedded(vs, ords)
        return self, TruncatedSeries.constant(other, self.vars, self.orders)

    # -- ring arithmetic ----------------------------------------------------
    def __add__(self, other: Scalar | "TruncatedSeries") -> "TruncatedSeries":
        a, b = self._coerce(other)
        out = dict(a.coeffs)
        for k, c in b.coeffs.items():
            out[k] = out.get(k, 0.0) + c
        return TruncatedSeries(a.vars, a.orders, out)

    __radd__ = __add__

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries(self.vars, self.orders, {k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        a, b = self._coerce(other)
        out = dict(a.coeffs)
        for k, c in b.coeffs.items():
            out[k] = out.get(k, 0.0) - c
        return TruncatedSeries(a.vars, a.orders, out)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other: Scalar | "TruncatedSeries") -> "TruncatedSeries":
        if not isinstance(other, TruncatedSeries):
            c = complex(other)
            return TruncatedSeries(self.vars, self.orders, {k: v * c for k, v in self.coeffs.items()})
        a, b = self._coerce(other)
        ords = a.orders
        out: dict[tuple[int, ...], complex] = {}
        bi = list(b.coeffs.items())
        for ka, ca in a.coeffs.items():
            for kb, cb in bi:
                key = tuple(ea + eb for ea, eb in zip(ka, kb))
                ok = True
                for e, o in zip(key, ords):
                    if e > o:
                        ok = False
                        break
                if ok:
                    out[key] = out.get(key, 0.0) + ca * cb
        return TruncatedSeries(a.vars, a.orders, out)

    __rmul__ = __mul__

    def __truediv__(self, other: Scalar | "TruncatedSeries") -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            return self * other.inverse()
        return self * (1.0 / complex(other))

    def __rtruediv__(self, other: Scalar) -> "TruncatedSeries":
        return self.inverse() * complex(other)

    def __pow__(self, n: int) -> "TruncatedSeries":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        result = TruncatedSeries.constant(1.0, self.vars, self.orders)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return self.vars == other.vars and self.orders == other.orders and self.coeffs == other.coeffs

    # -- calculus -------------------------------------------------------------
    def derive(self, var: str) -> "TruncatedSeries":
        """Partial derivative.  The jet order in ``var`` drops by one."""
        if var not in self.vars:
            raise ValueError(f"unknown variable {var!r} in {self.vars}")
        i = self.vars.index(var)
        out: dict[tuple[int, ...], complex] = {}
        for k, c in self.coeffs.items():
            if k[i] > 0:
                key = k[:i] + (k[i] - 1,) + k[i + 1:]
                out[key] = out.get(key, 0.0) + k[i] * c
        ords = list(self.orders)
        ords[i] = max(0, ords[i] - 1)
        return TruncatedSeries(self.vars, ords, out)

    def integrate(self, var: str, max_order: int | None = None) -> "TruncatedSeries":
        """Antiderivative with value 0 at var = 0; order grows by one (capped)."""
        if var not in self.vars:
            raise ValueError(f"unknown variable {var!r} in {self.vars}")
        i = self.vars.index(var)
        cap = self.orders[i] + 1 if max_order is None else int(max_order)
        out: dict[tuple[int, ...], complex] = {}
        for k, c in self.coeffs.items():
            if k[i] + 1 <= cap:
                key = k[:i] + (k[i] + 1,) + k[i + 1:]
                out[key] = c / (k[i] + 1)
        ords = list(self.orders)
        ords[i] = cap
        return TruncatedSeries(self.vars, ords, out)

    def borel(self, var: str) -> "TruncatedSeries":
        """Formal Borel transform in ``var``: c_k -> c_k / k!."""
        if var not in self.vars:
            raise ValueError(f"unknown variable {var!r} in {self.vars}")
        i = self.vars.index(var)
        out = {k: c / math.factorial(k[i]) for k, c in self.coeffs.items()}
        return TruncatedSeries(self.vars, self.orders, out)

    def truncate_total_degree(self, n: int, variables: Sequence[str] | None = None) -> "TruncatedSeries":
        """Drop terms of total degree > n (in the given variables, default all)."""
        if variables is None:
            idx = range(len(self.vars))
        else:
            idx = [self.vars.index(v) for v in variables]
        out = {k: c for k, c in self.coeffs.items() if sum(k[i] for i in idx) <= n}
        return TruncatedSeries(self.vars, self.orders, out)

    # -- substitution / evaluation ---------------------------------------------
    def subs(self, assignment: Mapping[str, Union[Scalar, "TruncatedSeries"]]) -> Union[complex, "TruncatedSeries"]:
        """Substitute series or numbers for a subset of the variables.

        Remaining variables keep their orders.  Substituted series are embedded
        into the joint context of the remaining variables and their own.
        Returns a plain complex number if nothing symbolic remains.
        """
        for v in assignment:
            if v not in self.vars:
                raise ValueError(f"cannot substitute absent variable {v!r}")
        keep = [v for v in self.vars if v not in assignment]
        # target context: union of kept vars and vars of substituted series
        ctx_vars: set[str] = set(keep)
        for v, s in assignment.items():
            if isinstance(s, TruncatedSeries):
                ctx_vars |= set(s.vars)
        if not ctx_vars:
            # fully numeric evaluation
            vals = [complex(assignment[v]) for v in self.vars]
            total = 0.0 + 0.0j
            for k, c in self.coeffs.items():
                term = c
                for e, val in zip(k, vals):
                    if e:
                        term *= val ** e
                total += term
            return total
        vs = _canon_vars(tuple(ctx_vars))
        ords = []
        for v in vs:
            cands = []
            if v in self.vars:
                cands.append(self.orders[self.vars.index(v)])
            for w, s in assignment.items():
                if isinstance(s, TruncatedSeries) and v in s.vars:
                    cands.append(s.orders[s.vars.index(v)])
            ords.append(min(cands))
        one = TruncatedSeries.constant(1.0, vs, ords)
        # embed substituted series; keep numeric substitutions as scalars
        sub_series: dict[str, TruncatedSeries | complex] = {}
        for v, s in assignment.items():
            sub_series[v] = s.embedded(vs, ords) if isinstance(s, TruncatedSeries) else complex(s)
        # powers cache per variable
        pow_cache: dict[tuple[str, int], TruncatedSeries | complex] = {}

        def power(v: str, e: int):
            if e == 0:
                return 1.0
            key = (v, e)
            if key in pow_cache:
                return pow_cache[key]
            base = sub_series[v]
            if isinstance(base, complex):
                val: TruncatedSeries | complex = base ** e
            else:
                val = power(v, e - 1) * base if e > 1 else base
            pow_cache[key] = val
            return val

        acc = TruncatedSeries.zero(vs, ords)
        for k, c in self.coeffs.items():
            term: TruncatedSeries | complex = complex(c)
            dead = False
            for v, e in zip(self.vars, k):
                if e == 0:
                    continue
                if v in assignment:
                    p = power(v, e)
                    if isinstance(p, complex):
                        term = term * p if isinstance(term, TruncatedSeries) else term * p
                    else:
                        term = p * term
                else:
                    mono = TruncatedSeries(vs, ords, {tuple(e if w == v else 0 for w in vs): 1.0})
                    if mono.is_zero():
                        dead = True
                        break
                    term = mono * term
            if dead:
                continue
            if isinstance(term, complex):
                term = TruncatedSeries.constant(term, vs, ords)
            acc = acc + term
        return acc

    def __call__(self, **kwargs: Scalar) -> complex:
        """Numeric evaluation; every variable must receive a value."""
        missing = [v for v in self.vars if v not in kwargs]
        if missing:
            raise ValueError(f"missing values for {missing}")
        out = self.subs({v: complex(kwargs[v]) for v in self.vars})
        assert isinstance(out, complex)
        return out

    # -- series algebra: inverse, sqrt, exp, reversion -----------------------
    def _nilpotency_bound(self) -> int:
        return sum(self.orders) + 1

    def inverse(self) -> "TruncatedSeries":
        """Multiplicative inverse; requires an invertible constant term."""
        c0 = self.constant_term()
        if c0 == 0:
            raise ZeroDivisionError("series with zero constant term has no inverse")
        r = TruncatedSeries.constant(1.0 / c0, self.vars, self.orders)
        # Newton iteration r <- r(2 - s r); correct order doubles each pass
        steps = max(1, math.ceil(math.log2(self._nilpotency_bound())) + 1)
        for _ in range(steps):
            r = r * (2.0 - self * r)
        return r

    def sqrt(self) -> "TruncatedSeries":
        """Principal square root; requires a nonzero constant term."""
        c0 = self.constant_term()
        if c0 == 0:
            raise ZeroDivisionError("series with zero constant term has no sqrt branch")
        import cmath

        r = TruncatedSeries.constant(cmath.sqrt(c0), self.vars, self.orders)
        steps = max(1, math.ceil(math.log2(self._nilpotency_bound())) + 1)
        for _ in range(steps):
            r = (r + self * r.inverse()) * 0.5
        return r

    def exp(self) -> "TruncatedSeries":
        """exp of a series with zero constant term (finite sum on the jet)."""
        if self.constant_term() != 0:
            raise ValueError("exp requires zero constant term")
        acc = TruncatedSeries.constant(1.0, self.vars, self.orders)
        term = TruncatedSeries.constant(1.0, self.vars, self.orders)
        for k in range(1, self._nilpotency_bound() + 1):
            term = term * self * (1.0 / k)
            if term.is_zero():
                break
            acc = acc + term
        return acc

    def reversion(self, var: str | None = None) -> "TruncatedSeries":
        """Compositional inverse of a univariate series c1*v + c2*v^2 + ...

        Requires zero constant term and invertible linear coefficient.
        Returns g with self(g(v)) = v up to the truncation order.
        """
        if var is None:
            if len(self.vars) != 1:
                raise ValueError("reversion requires a univariate series")
            var = self.vars[0]
        if len(self.vars) != 1 or self.vars[0] != var:
            raise ValueError("reversion requires a univariate series in the given variable")
        n = self.orders[0]
        c = [self.coeffs.get((k,), 0.0 + 0.0j) for k in range(n + 1)]
        if c[0] != 0:
            raise ValueError("reversion requires zero constant term")
        if c[1] == 0:
            raise ZeroDivisionError("reversion requires invertible linear coefficient")
        # Solve c1 g + c2 g^2 + ... = v order by order for g.
        g = [0.0 + 0.0j] * (n + 1)
        g[1] = 1.0 / c[1]
        for m in range(2, n + 1):
            # coefficient of v^m in sum_k c_k g(v)^k must vanish
            gm = TruncatedSeries(
                (var,), (m,), {(k,): g[k] for k in range(m) if g[k] != 0}
            )
            acc = TruncatedSeries.zero((var,), (m,))
            p = TruncatedSeries.constant(1.0, (var,), (m,))
            for k in range(1, m + 1):
                p = p * gm
                if c[k] != 0:
                    acc = acc + p * c[k]
            g[m] = -acc.coeffs.get((m,), 0.0) / c[1]
        return TruncatedSeries((var,), (n,), {(k,): g[k] for k in range(n + 1) if g[k] != 0})

    # -- serialization --------------------------------------------------------
    def to_json(self) -> str:
        items = sorted(self.coeffs.items(), key=lambda kv: (sum(kv[0]), kv[0]))
        doc = {
            "vars": list(self.vars),
            "orders": list(self.orders),
            "coeffs": [[list(k), [c.real, c.imag]] for k, c in items],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "TruncatedSeries":
        doc = json.loads(text)
        coeffs = {tuple(k): complex(re, im) for k, (re, im) in doc["coeffs"]}
        return cls(doc["vars"], doc["orders"], coeffs)


# -- functional interface ------------------------------------------------------

def ts_arith(a: TruncatedSeries, b: TruncatedSeries, op: str) -> TruncatedSeries:
    """Ring arithmetic dispatch: op in {'add', 'sub', 'mul'}."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def ts_compose(outer: TruncatedSeries, inner: TruncatedSeries) -> TruncatedSeries:
    """Compose a univariate outer series with an inner series.

    ``outer`` must be univariate; ``inner`` must have zero constant term
    (otherwise the composition is not determined by finite jets).  The result
    is evaluated by Horner's rule in the inner series.
    """
    if len(outer.vars) != 1:
        raise ValueError("outer series must be univariate")
    if inner.constant_term() != 0:
        raise ValueError("inner series must have zero constant term")
    n = outer.orders[0]
    c = [outer.coeffs.get((k,), 0.0 + 0.0j) for k in range(n + 1)]
    acc = TruncatedSeries.constant(c[n], inner.vars, inner.orders)
    for k in range(n - 1, -1, -1):
        acc = acc * inner + c[k]
    return acc


def ts_calculus(s: TruncatedSeries, var: str, op: str) -> TruncatedSeries:
    """Calculus dispatch: op in {'derive', 'integrate_from_zero'}."""
    if op == "derive":
        return s.derive(var)
    if op == "integrate_from_zero":
        return s.integrate(var)
    raise ValueError(f"unknown op {op!r}")


def ts_borel(s: TruncatedSeries, var: str) -> TruncatedSeries:
    """Formal Borel transform in ``var`` (divide the k-th coefficient by k!)."""
    return s.borel(var)


def allclose(a: TruncatedSeries, b: TruncatedSeries, tol: float = 1e-12) -> bool:
    """Coefficient-wise comparison on the shared jet."""
    diff = a - b
    return diff.max_abs_coeff() <= tol
