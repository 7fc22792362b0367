"""Scalar fields on R^4 and the differential operators built on them.

A :class:`ScalarField` is a lazily composed expression graph.  Evaluating it
at a batch of points walks the graph once, caching every node, so shared
subexpressions (u inside F, T, dF, ...) are computed a single time per batch.

Partial derivatives are graph nodes too.  They are realised either by
forward-mode duals (exact to rounding) or by central differences; both are
available for every field so one can serve as an oracle for the other.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dual
from .exterior import DIM, Form, Tensor11, Vector, dx, hodge, interior, is_zero, wedge


@dataclass(frozen=True)
class DualProvider:
    name: str = "dual"


@dataclass(frozen=True)
class FiniteDifference:
    h: float = 1e-5
    name: str = "fd"


DUAL = DualProvider()


def provider_from_name(name: str, h: float = 1e-5):
    if name == "dual":
        return DUAL
    if name == "fd":
        return FiniteDifference(h)
    raise ValueError(f"unknown derivative provider {name!r}")


class ScalarField:
    """A real function of (x, y, z, xi).

    Calling ``f(x, y, z, xi)`` accepts floats, arrays or duals.  Arithmetic
    with numbers and other fields builds new fields.
    """

    is_zero = False

    def __init__(self):
        self._partials = {}

    def _compute(self, c, cache):
        raise NotImplementedError

    def _eval(self, c, cache):
        key = id(self)
        if key in cache:
            return cache[key]
        v = self._compute(c, cache)
        cache[key] = v
        return v

    def __call__(self, x, y, z, xi):
        return self._eval((x, y, z, xi), {})

    def partial(self, mu: int, provider=None) -> "ScalarField":
        provider = provider or DUAL
        key = (mu, provider)
        node = self._partials.get(key)
        if node is None:
            node = self._make_partial(mu, provider)
            self._partials[key] = node
        return node

    def _make_partial(self, mu, provider):
        return Partial(self, mu, provider)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        if isinstance(n, ScalarField):
            raise TypeError("field exponents are not supported")
        if n == 1:
            return self
        if n == 2:
            return mul(self, self)
        return Apply(lambda v: v**n, self)


class Constant(ScalarField):
    def __init__(self, value: float):
        super().__init__()
        self.value = float(value)
        self.is_zero = self.value == 0.0

    def _compute(self, c, cache):
        return np.float64(self.value)  # IEEE semantics for 0/0

    def _make_partial(self, mu, provider):
        return ZERO

    def __repr__(self) -> str:
        return f"Constant({self.value!r})"


ZERO = Constant(0.0)
ONE = Constant(1.0)


class Coordinate(ScalarField):
    def __init__(self, mu: int):
        super().__init__()
        self.mu = mu

    def _compute(self, c, cache):
        return c[self.mu]

    def _make_partial(self, mu, provider):
        return ONE if mu == self.mu else ZERO

    def __repr__(self) -> str:
        return ("X", "Y", "Z", "XI")[self.mu]


X, Y, Z, XI = (Coordinate(i) for i in range(DIM))
COORDINATES = (X, Y, Z, XI)


class Apply(ScalarField):
    """``fn(*args)`` where ``fn`` is written against :mod:`phlo.dual` functions."""

    def __init__(self, fn, *args):
        super().__init__()
        self.fn = fn
        self.args = args

    def _compute(self, c, cache):
        return self.fn(*(a._eval(c, cache) for a in self.args))


class Sum(ScalarField):
    def __init__(self, a, b):
        super().__init__()
        self.a, self.b = a, b

    def _compute(self, c, cache):
        return self.a._eval(c, cache) + self.b._eval(c, cache)


class Product(ScalarField):
    def __init__(self, a, b):
        super().__init__()
        self.a, self.b = a, b

    def _compute(self, c, cache):
        return self.a._eval(c, cache) * self.b._eval(c, cache)


class Quotient(ScalarField):
    def __init__(self, a, b):
        super().__init__()
        self.a, self.b = a, b

    def _compute(self, c, cache):
        return self.a._eval(c, cache) / self.b._eval(c, cache)


class Negation(ScalarField):
    def __init__(self, a):
        super().__init__()
        self.a = a

    def _compute(self, c, cache):
        return -self.a._eval(c, cache)


class Partial(ScalarField):
    def __init__(self, base: ScalarField, mu: int, provider):
        super().__init__()
        self.base = base
        self.mu = mu
        self.provider = provider

    def _compute(self, c, cache):
        # every partial along the same axis in this batch shares one shifted/seeded context
        key = ("seed", self.mu, self.provider)
        ctx = cache.get(key)
        if ctx is None:
            ctx = _seed(c, self.mu, self.provider)
            cache[key] = ctx
        if isinstance(self.provider, FiniteDifference):
            plus, cplus, minus, cminus = ctx
            return (self.base._eval(plus, cplus) - self.base._eval(minus, cminus)) / (
                2.0 * self.provider.h
            )
        tag, seeded, inner = ctx
        return dual.tangent(self.base._eval(seeded, inner), tag)


def _seed(c, mu, provider):
    if isinstance(provider, FiniteDifference):
        h = provider.h
        plus = tuple(v + h if i == mu else v for i, v in enumerate(c))
        minus = tuple(v - h if i == mu else v for i, v in enumerate(c))
        return plus, {}, minus, {}
    tag = dual.new_tag()
    return tag, tuple(dual.Dual(tag, v, 1.0) if i == mu else v for i, v in enumerate(c)), {}


def as_field(v) -> ScalarField:
    if isinstance(v, ScalarField):
        return v
    return Constant(v)


def _const(v):
    if isinstance(v, ScalarField):
        return v.value if isinstance(v, Constant) else None
    return float(v)


def add(a, b) -> ScalarField:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return Constant(ca + cb)
    if ca == 0.0:
        return as_field(b)
    if cb == 0.0:
        return as_field(a)
    return Sum(as_field(a), as_field(b))


def mul(a, b) -> ScalarField:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return Constant(ca * cb)
    if ca == 0.0 or cb == 0.0:
        return ZERO
    if ca == 1.0:
        return as_field(b)
    if cb == 1.0:
        return as_field(a)
    if ca == -1.0:
        return neg(b)
    if cb == -1.0:
        return neg(a)
    return Product(as_field(a), as_field(b))


def div(a, b) -> ScalarField:
    ca, cb = _const(a), _const(b)
    if cb == 0.0:
        # no folding: evaluate pointwise so 0/0 gives NaN like any other field
        return Quotient(as_field(a), as_field(b))
    if ca is not None and cb is not None:
        return Constant(ca / cb)
    if ca == 0.0:
        return ZERO
    if cb == 1.0:
        return as_field(a)
    return Quotient(as_field(a), as_field(b))


def neg(a) -> ScalarField:
    ca = _const(a)
    if ca is not None:
        return Constant(-ca)
    if isinstance(a, Negation):
        return a.a
    return Negation(a)


def _lift(fn):
    def wrapped(*args):
        if all(not isinstance(a, ScalarField) or isinstance(a, Constant) for a in args):
            return Constant(float(fn(*(_const(a) for a in args))))
        return Apply(fn, *(as_field(a) for a in args))

    wrapped.__name__ = fn.__name__
    return wrapped


sin = _lift(dual.sin)
cos = _lift(dual.cos)
exp = _lift(dual.exp)
sqrt = _lift(dual.sqrt)
atan2 = _lift(dual.atan2)
bump = _lift(dual.bump)
radial_bump = _lift(dual.radial_bump)


def function_field(fn) -> ScalarField:
    """Wrap ``fn(x, y, z, xi)`` (written with :mod:`phlo.dual` math) as a field."""
    return Apply(fn, *COORDINATES)


# ---------------------------------------------------------------- evaluation


def as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != DIM:
        raise ValueError("points must have shape (n, 4)")
    return pts


def _eval_obj(obj, c, n, cache):
    if isinstance(obj, ScalarField):
        v = obj._eval(c, cache)
        return np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
    if isinstance(obj, (int, float)):
        return np.full(n, float(obj))
    if isinstance(obj, Form):
        return obj.map(lambda f: _eval_obj(f, c, n, cache))
    if isinstance(obj, Vector):
        return obj.map(lambda f: _eval_obj(f, c, n, cache))
    if isinstance(obj, Tensor11):
        return obj.map(lambda f: _eval_obj(f, c, n, cache))
    if isinstance(obj, dict):
        return {k: _eval_obj(v, c, n, cache) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return type(obj)(_eval_obj(v, c, n, cache) for v in obj)
    if hasattr(obj, "evaluate_fields"):
        return obj.evaluate_fields(lambda f: _eval_obj(f, c, n, cache))
    raise TypeError(f"cannot evaluate {type(obj).__name__}")


def evaluate(obj, points):
    """Evaluate a field, form, vector, tensor (or containers of them) at points.

    All fields inside ``obj`` share one cache for the batch.
    """
    pts = as_points(points)
    c = tuple(pts[:, i] for i in range(DIM))
    return _eval_obj(obj, c, len(pts), {})


def default_threads() -> int:
    env = os.environ.get("PHLO_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parallel_map(fn, items, threads=None):
    """Ordered map over ``items``; results come back in input order."""
    items = list(items)
    threads = threads or default_threads()
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def evaluate_chunked(obj, points, chunk=4096, threads=None):
    """Like :func:`evaluate`, splitting the batch into chunks (possibly threaded)."""
    pts = as_points(points)
    pieces = [pts[i : i + chunk] for i in range(0, len(pts), chunk)] or [pts]
    results = parallel_map(lambda p: evaluate(obj, p), pieces, threads)
    return _concat(results)


def _concat(results):
    first = results[0]
    if isinstance(first, np.ndarray):
        return np.concatenate(results)
    if isinstance(first, Form):
        keys = set().union(*(r.comps.keys() for r in results))
        return Form(first.degree, {k: np.concatenate([r.comps[k] for r in results]) for k in keys})
    if isinstance(first, Vector):
        return Vector(np.concatenate([r[i] for r in results]) for i in range(DIM))
    if isinstance(first, Tensor11):
        return Tensor11(
            [[np.concatenate([r.m[i][j] for r in results]) for j in range(DIM)] for i in range(DIM)]
        )
    if isinstance(first, dict):
        return {k: _concat([r[k] for r in results]) for k in first}
    if isinstance(first, (list, tuple)):
        return type(first)(_concat([r[i] for r in results]) for i in range(len(first)))
    if hasattr(first, "concat"):
        return type(first).concat(results)
    raise TypeError(f"cannot concatenate {type(first).__name__}")


def max_abs(obj) -> float:
    """Largest absolute entry over every component of an evaluated object (NaN-aware)."""
    if isinstance(obj, (Form,)):
        vals = list(obj.comps.values())
    elif isinstance(obj, Vector):
        vals = list(obj.comps)
    elif isinstance(obj, Tensor11):
        vals = [v for row in obj.m for v in row]
    elif isinstance(obj, dict):
        vals = list(obj.values())
    elif isinstance(obj, (list, tuple)):
        vals = list(obj)
    elif isinstance(getattr(obj, "values", None), dict):
        vals = list(obj.values.values())
    else:
        a = np.asarray(obj, dtype=float)
        if a.size == 0:
            return 0.0
        if np.isnan(a).any():
            return float("nan")
        return float(np.max(np.abs(a)))
    out = 0.0
    for v in vals:
        m = max_abs(v)
        if np.isnan(m):
            return float("nan")
        out = max(out, m)
    return out


# ---------------------------------------------------------------- operators


def _partial(f, mu, provider):
    if is_zero(f) or isinstance(f, (int, float)):
        return ZERO
    return f.partial(mu, provider)


def gradient(f, provider=None) -> Vector:
    return Vector(_partial(f, mu, provider) for mu in range(DIM))


def directional(Xv: Vector, f, provider=None) -> ScalarField:
    """X^m d_m f."""
    acc = ZERO
    for mu in range(DIM):
        if is_zero(Xv[mu]):
            continue
        acc = acc + Xv[mu] * _partial(f, mu, provider)
    return acc


def exterior_derivative(w: Form, provider=None) -> Form:
    if w.degree >= DIM:
        raise ValueError("exterior derivative of a 4-form")
    out = Form(w.degree + 1)
    for mu in range(DIM):
        dw_mu = w.map(lambda f: _partial(f, mu, provider))
        if dw_mu.comps:
            out = out + wedge(dx(mu), dw_mu)
    return out


def coderivative(w: Form, provider=None) -> Form:
    """The composition * d * (taken literally, no degree-dependent sign)."""
    if w.degree == 0:
        raise ValueError("coderivative of a 0-form")
    return hodge(exterior_derivative(hodge(w), provider))


def lie_bracket(Xv: Vector, Yv: Vector, provider=None) -> Vector:
    """[X, Y]^m = X(Y^m) - Y(X^m)."""
    return Vector(
        directional(Xv, Yv[mu], provider) - directional(Yv, Xv[mu], provider) for mu in range(DIM)
    )


def lie_derivative_form(Xv: Vector, w: Form, provider=None) -> Form:
    """Cartan: L_X w = i(X) dw + d(i(X) w)."""
    if w.degree == 0:
        return interior(Xv, exterior_derivative(w, provider))
    inner = exterior_derivative(interior(Xv, w), provider)
    if w.degree == DIM:
        return inner
    return interior(Xv, exterior_derivative(w, provider)) + inner


def is_constant_vector(Xv: Vector) -> bool:
    return all(isinstance(c, (int, float, Constant)) for c in Xv)


def lie_derivative_form_constant(Xv: Vector, w: Form, provider=None) -> Form:
    """Componentwise X^s d_s w_I; valid only for constant-component X."""
    if not is_constant_vector(Xv):
        raise ValueError("componentwise Lie derivative needs a constant vector field")
    return w.map(lambda f: directional(Xv, f, provider))


def lie_derivative_tensor11(Xv: Vector, P: Tensor11, provider=None) -> Tensor11:
    """(L_X P)(Y) = [X, P Y] - P [X, Y], in components.

    (L_X P)^n_m = X(P^n_m) - P^s_m d_s X^n + P^n_s d_m X^s
    """
    dX = [[_partial(Xv[n], s, provider) for s in range(DIM)] for n in range(DIM)]
    rows = []
    for n in range(DIM):
        row = []
        for m in range(DIM):
            acc = directional(Xv, P.m[n][m], provider)
            for s in range(DIM):
                if not (is_zero(P.m[s][m]) or is_zero(dX[n][s])):
                    acc = acc - P.m[s][m] * dX[n][s]
                if not (is_zero(P.m[n][s]) or is_zero(dX[s][m])):
                    acc = acc + P.m[n][s] * dX[s][m]
            row.append(acc)
        rows.append(row)
    return Tensor11(rows)


def vector_field(*comps) -> Vector:
    return Vector(as_field(c) if not isinstance(c, (int, float)) else float(c) for c in comps)
