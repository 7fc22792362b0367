"""Pointwise multilinear algebra on R^4 with the metric diag(-1, -1, -1, +1).

Coordinates are ordered (x, y, z, xi) with xi = c*t and indexed 0..3.
Forms keep components only on strictly increasing index tuples; anything that
needs the full antisymmetric sum expands it explicitly.

Component values are deliberately untyped: floats, numpy arrays (a batch of
points), duals, or scalar fields from :mod:`phlo.calculus` all work, as long
as they support ``+``, ``-`` and ``*``.  The same code therefore serves the
pointwise algebra and the field-level algebra.
"""

from __future__ import annotations

import itertools
from math import comb

import numpy as np

DIM = 4
ETA = (-1, -1, -1, 1)
AXES = ("x", "y", "z", "xi")


class DegreeError(ValueError):
    pass


def is_zero(v) -> bool:
    """True only for values that are structurally zero (not merely numerically small)."""
    if isinstance(v, (int, float)):
        return v == 0
    return bool(getattr(v, "is_zero", False))


def _sum(a, b):
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    return a + b


def _scale(s, v):
    if s == 1:
        return v
    if s == -1:
        return -v
    if s == 0 or is_zero(v):
        return 0.0
    return s * v


def perm_sign(seq) -> int:
    """Sign of the permutation sorting ``seq``; 0 if an index repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def levi_civita(*idx) -> int:
    """epsilon_{i j k l} with epsilon_{0123} = +1."""
    return perm_sign(idx)


def increasing(p: int):
    return list(itertools.combinations(range(DIM), p))


def metric_sign(idx) -> int:
    """Product of eta^{ii} over an index tuple (the metric is diagonal and +-1)."""
    s = 1
    for i in idx:
        s *= ETA[i]
    return s


class Form:
    """A p-form; ``comps`` maps increasing index tuples to coefficients."""

    __slots__ = ("degree", "comps")

    def __init__(self, degree: int, comps=None):
        if not 0 <= degree <= DIM:
            raise DegreeError("degree exceeds 4" if degree > DIM else "negative degree")
        self.degree = degree
        clean = {}
        for key, v in (comps or {}).items():
            key = tuple(key)
            if len(key) != degree:
                raise DegreeError(f"index {key} does not match degree {degree}")
            s = perm_sign(key)
            if s == 0 or is_zero(v):
                continue
            key_sorted = tuple(sorted(key))
            clean[key_sorted] = _sum(clean.get(key_sorted, 0.0), _scale(s, v))
        self.comps = clean

    @classmethod
    def scalar(cls, v) -> "Form":
        return cls(0, {(): v})

    def __getitem__(self, idx):
        idx = tuple(idx)
        s = perm_sign(idx)
        if s == 0:
            return 0.0
        v = self.comps.get(tuple(sorted(idx)), 0.0)
        return _scale(s, v)

    def __repr__(self) -> str:
        terms = ", ".join(
            f"{'^'.join('d' + AXES[i] for i in k) or '1'}: {v!r}" for k, v in self.comps.items()
        )
        return f"Form({self.degree}, {{{terms}}})"

    def _combine(self, other, sign):
        if other.degree != self.degree:
            raise DegreeError("cannot add forms of different degree")
        out = dict(self.comps)
        for k, v in other.comps.items():
            out[k] = _sum(out.get(k, 0.0), _scale(sign, v))
        return Form(self.degree, out)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return Form(self.degree, {k: -v for k, v in self.comps.items()})

    def __mul__(self, s):
        return Form(self.degree, {k: s * v for k, v in self.comps.items()})

    __rmul__ = __mul__

    def map(self, fn) -> "Form":
        return Form(self.degree, {k: fn(v) for k, v in self.comps.items()})

    def full(self, n_points=None) -> np.ndarray:
        """Dense antisymmetric array of shape (4,)*p (+ batch axis)."""
        shape = (DIM,) * self.degree
        if n_points is not None:
            shape = shape + (n_points,)
        arr = np.zeros(shape)
        for k, v in self.comps.items():
            for perm in itertools.permutations(range(self.degree)):
                arr[tuple(k[i] for i in perm)] = perm_sign(perm) * np.asarray(v, dtype=float)
        return arr


def dx(mu: int) -> Form:
    return Form(1, {(mu,): 1.0})


def basis_form(*idx) -> Form:
    """dx^{i1} ^ ... ^ dx^{ip} (indices in any order)."""
    return Form(len(idx), {tuple(idx): 1.0})


VOLUME = basis_form(0, 1, 2, 3)


def wedge(a: Form, b: Form) -> Form:
    p, q = a.degree, b.degree
    if p + q > DIM:
        raise DegreeError("degree exceeds 4")
    out = {}
    for ka, va in a.comps.items():
        for kb, vb in b.comps.items():
            s = perm_sign(ka + kb)
            if s == 0:
                continue
            key = tuple(sorted(ka + kb))
            out[key] = _sum(out.get(key, 0.0), _scale(s, va * vb))
    return Form(p + q, out)


def raise_indices(a: Form) -> Form:
    """Components a^{I} = eta^{ii}... a_{I}; same storage layout."""
    return Form(a.degree, {k: _scale(metric_sign(k), v) for k, v in a.comps.items()})


lower_indices = raise_indices


def hodge(a: Form) -> Form:
    """Hodge star fixed by ``alpha ^ beta = <*alpha, beta> vol``.

    Here ``<.,.>`` is the metric pairing of forms summed over increasing index
    tuples and ``vol = dx ^ dy ^ dz ^ dxi``.  Solving for the components
    gives ``(*a)^J = sum_I a_I eps_{IJ}``; lowering J yields ``(*a)_J``.
    On 2-forms this is ``(*F)_{mn} = -1/2 eps_{mn}^{sr} F_{sr}``.
    """
    p = a.degree
    out = {}
    for kI, v in a.comps.items():
        kJ = tuple(i for i in range(DIM) if i not in kI)
        s = levi_civita(*(kI + kJ)) * metric_sign(kJ)
        out[kJ] = _sum(out.get(kJ, 0.0), _scale(s, v))
    return Form(DIM - p, out)


def interior(v, a: Form) -> Form:
    """Contraction of a vector into the first slot: (i(v)a)_J = v^m a_{mJ}."""
    if a.degree == 0:
        raise DegreeError("interior product of a 0-form")
    out = {}
    for k, val in a.comps.items():
        for pos, mu in enumerate(k):
            if is_zero(v[mu]):
                continue
            rest = k[:pos] + k[pos + 1 :]
            term = _scale(-1 if pos % 2 else 1, v[mu] * val)
            out[rest] = _sum(out.get(rest, 0.0), term)
    return Form(a.degree - 1, out)


def evaluate_on(a: Form, *vectors):
    """a(v1, ..., vp) with the determinant convention for wedge products."""
    if len(vectors) != a.degree:
        raise DegreeError("wrong number of arguments")
    out = a
    for vec in vectors:
        out = interior(vec, out)
    return out.comps.get((), 0.0)


class Vector:
    """Four contravariant components."""

    __slots__ = ("comps",)

    def __init__(self, comps):
        comps = tuple(comps)
        if len(comps) != DIM:
            raise ValueError("a vector needs four components")
        self.comps = comps

    def __getitem__(self, i):
        return self.comps[i]

    def __iter__(self):
        return iter(self.comps)

    def __repr__(self) -> str:
        return f"Vector{self.comps!r}"

    def __add__(self, other):
        return Vector(_sum(a, b) for a, b in zip(self.comps, other.comps))

    def __sub__(self, other):
        return Vector(_sum(a, _scale(-1, b)) for a, b in zip(self.comps, other.comps))

    def __neg__(self):
        return Vector(_scale(-1, a) for a in self.comps)

    def __mul__(self, s):
        return Vector(0.0 if is_zero(a) else s * a for a in self.comps)

    __rmul__ = __mul__

    def map(self, fn) -> "Vector":
        return Vector(fn(a) for a in self.comps)


def coordinate_vector(mu: int) -> Vector:
    return Vector(1.0 if i == mu else 0.0 for i in range(DIM))


def sharp(a: Form) -> Vector:
    """Raise the index of a 1-form with eta."""
    if a.degree != 1:
        raise DegreeError("sharp needs a 1-form")
    return Vector(_scale(ETA[i], a[(i,)]) for i in range(DIM))


def flat(v: Vector) -> Form:
    return Form(1, {(i,): _scale(ETA[i], v[i]) for i in range(DIM)})


def pairing(a: Form, v: Vector):
    """<a, v> for a 1-form."""
    if a.degree != 1:
        raise DegreeError("pairing needs a 1-form")
    total = 0.0
    for (i,), val in a.comps.items():
        if not is_zero(v[i]):
            total = _sum(total, val * v[i])
    return total


def inner(a: Form, b: Form):
    """Metric pairing summed over increasing tuples: sum_I a_I b^I."""
    if a.degree != b.degree:
        raise DegreeError("inner product needs equal degrees")
    total = 0.0
    for k, va in a.comps.items():
        vb = b.comps.get(k)
        if vb is None:
            continue
        total = _sum(total, _scale(metric_sign(k), va * vb))
    return total


def invariant_contraction(F: Form, G: Form):
    """F_{mn} G^{mn} over all ordered index pairs (twice the increasing sum)."""
    if F.degree != 2 or G.degree != 2:
        raise DegreeError("invariant contraction needs two 2-forms")
    return _scale(2, inner(F, G))


def flux_contraction(F: Form, H: Form) -> Form:
    """1-form with components F^{ab} H_{abm}, a and b running over all values."""
    if F.degree != 2 or H.degree != 3:
        raise DegreeError("flux contraction needs a 2-form and a 3-form")
    out = {}
    Fu = raise_indices(F)
    for (a, b), f in Fu.comps.items():
        for m in range(DIM):
            h = H[(a, b, m)]
            if is_zero(h):
                continue
            # the (a,b) and (b,a) terms are equal
            term = _scale(2, f * h)
            out[(m,)] = _sum(out.get((m,), 0.0), term)
    return Form(1, out)


class Tensor11:
    """Linear map on tangent vectors: ``m[row][col]`` is the coefficient of dx^col (x) d_row.

    Acting on a vector: ``(P v)^row = m[row][col] v^col``.  The same matrix
    pulls 1-forms back as ``(P^T a)_col = m[row][col] a_row``.
    """

    __slots__ = ("m",)

    def __init__(self, m):
        rows = tuple(tuple(r) for r in m)
        if len(rows) != DIM or any(len(r) != DIM for r in rows):
            raise ValueError("a (1,1)-tensor needs a 4x4 matrix")
        self.m = rows

    @classmethod
    def identity(cls) -> "Tensor11":
        return cls([[1.0 if i == j else 0.0 for j in range(DIM)] for i in range(DIM)])

    @classmethod
    def zero(cls) -> "Tensor11":
        return cls([[0.0] * DIM for _ in range(DIM)])

    def __getitem__(self, ij):
        i, j = ij
        return self.m[i][j]

    def __repr__(self) -> str:
        return f"Tensor11({self.m!r})"

    def __add__(self, other):
        return Tensor11([[_sum(a, b) for a, b in zip(r, s)] for r, s in zip(self.m, other.m)])

    def __sub__(self, other):
        return Tensor11(
            [[_sum(a, _scale(-1, b)) for a, b in zip(r, s)] for r, s in zip(self.m, other.m)]
        )

    def __neg__(self):
        return Tensor11([[_scale(-1, a) for a in r] for r in self.m])

    def __mul__(self, s):
        return Tensor11([[0.0 if is_zero(a) else s * a for a in r] for r in self.m])

    __rmul__ = __mul__

    def map(self, fn) -> "Tensor11":
        return Tensor11([[fn(a) for a in r] for r in self.m])

    def transpose(self) -> "Tensor11":
        return Tensor11([[self.m[j][i] for j in range(DIM)] for i in range(DIM)])

    def compose(self, other: "Tensor11") -> "Tensor11":
        """Matrix product self @ other, i.e. the map ``self o other``."""
        out = []
        for i in range(DIM):
            row = []
            for j in range(DIM):
                acc = 0.0
                for k in range(DIM):
                    a, b = self.m[i][k], other.m[k][j]
                    if not (is_zero(a) or is_zero(b)):
                        acc = _sum(acc, a * b)
                row.append(acc)
            out.append(row)
        return Tensor11(out)

    def trace(self):
        acc = 0.0
        for i in range(DIM):
            acc = _sum(acc, self.m[i][i])
        return acc

    def apply(self, v: Vector) -> Vector:
        out = []
        for i in range(DIM):
            acc = 0.0
            for j in range(DIM):
                a = self.m[i][j]
                if not (is_zero(a) or is_zero(v[j])):
                    acc = _sum(acc, a * v[j])
            out.append(acc)
        return Vector(out)

    def column(self, j: int) -> Vector:
        """Image of the j-th coordinate vector."""
        return Vector(self.m[i][j] for i in range(DIM))

    def pullback(self, a: Form) -> Form:
        """(P* a)(v1, ..., vp) = a(P v1, ..., P vp)."""
        p = a.degree
        out = {}
        for cols in increasing(p):
            acc = 0.0
            for k, val in a.comps.items():
                # determinant of the p x p minor m[k][cols]
                for perm in itertools.permutations(range(p)):
                    s = perm_sign(perm)
                    term = val
                    skip = False
                    for r in range(p):
                        e = self.m[k[r]][cols[perm[r]]]
                        if is_zero(e):
                            skip = True
                            break
                        term = term * e
                    if not skip:
                        acc = _sum(acc, _scale(s, term))
            out[cols] = acc
        return Form(p, out)


def n_components(p: int) -> int:
    return comb(DIM, p)
