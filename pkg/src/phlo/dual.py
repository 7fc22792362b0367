"""Tagged forward-mode dual numbers.

Every differentiation draws a fresh tag.  When two duals with different tags
meet, the one with the newer tag is treated as the outer number and the other
one rides along as a constant inside its components.  This is the usual fix
for perturbation confusion and lets derivatives nest to any depth.

The module-level functions (``sin``, ``exp``, ``where`` ...) accept floats,
numpy arrays and duals alike, so field code written against them can be
differentiated without change.
"""

from __future__ import annotations

import itertools

import numpy as np

_tags = itertools.count(1)


def new_tag() -> int:
    return next(_tags)


class Dual:
    """``re + du * e`` with ``e**2 == 0``; ``re`` and ``du`` may be duals themselves."""

    __slots__ = ("tag", "re", "du")
    # make numpy hand mixed arithmetic back to the reflected dunder methods
    __array_ufunc__ = None

    def __init__(self, tag: int, re, du):
        self.tag = tag
        self.re = re
        self.du = du

    def __repr__(self) -> str:
        return f"Dual(tag={self.tag}, re={self.re!r}, du={self.du!r})"

    def __add__(self, other):
        t = _top(self, other)
        ar, ad = _split(self, t)
        br, bd = _split(other, t)
        return Dual(t, ar + br, ad + bd)

    __radd__ = __add__

    def __sub__(self, other):
        t = _top(self, other)
        ar, ad = _split(self, t)
        br, bd = _split(other, t)
        return Dual(t, ar - br, ad - bd)

    def __rsub__(self, other):
        t = _top(self, other)
        ar, ad = _split(other, t)
        br, bd = _split(self, t)
        return Dual(t, ar - br, ad - bd)

    def __mul__(self, other):
        t = _top(self, other)
        ar, ad = _split(self, t)
        br, bd = _split(other, t)
        return Dual(t, ar * br, ad * br + ar * bd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _div(self, other)

    def __rtruediv__(self, other):
        return _div(other, self)

    def __neg__(self):
        return Dual(self.tag, -self.re, -self.du)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if isinstance(n, Dual):
            raise TypeError("dual exponents are not supported")
        if n == 0:
            return Dual(self.tag, self.re ** 0, self.du * 0.0)
        return Dual(self.tag, self.re**n, n * self.re ** (n - 1) * self.du)


def _top(a, b) -> int:
    ta = a.tag if isinstance(a, Dual) else 0
    tb = b.tag if isinstance(b, Dual) else 0
    return ta if ta > tb else tb


def _split(v, tag):
    if isinstance(v, Dual) and v.tag == tag:
        return v.re, v.du
    return v, 0.0


def _div(a, b):
    t = _top(a, b)
    ar, ad = _split(a, t)
    br, bd = _split(b, t)
    q = ar / br
    return Dual(t, q, (ad - q * bd) / br)


def primal(v):
    """Innermost real value of a (possibly nested) dual."""
    while isinstance(v, Dual):
        v = v.re
    return v


def tangent(v, tag: int):
    """Coefficient of the infinitesimal carrying ``tag``."""
    if not isinstance(v, Dual) or v.tag < tag:
        return 0.0
    if v.tag == tag:
        return v.du
    return Dual(v.tag, tangent(v.re, tag), tangent(v.du, tag))


def sin(v):
    if isinstance(v, Dual):
        return Dual(v.tag, sin(v.re), cos(v.re) * v.du)
    return np.sin(v)


def cos(v):
    if isinstance(v, Dual):
        return Dual(v.tag, cos(v.re), -sin(v.re) * v.du)
    return np.cos(v)


def exp(v):
    if isinstance(v, Dual):
        e = exp(v.re)
        return Dual(v.tag, e, e * v.du)
    return np.exp(v)


def log(v):
    if isinstance(v, Dual):
        return Dual(v.tag, log(v.re), v.du / v.re)
    return np.log(v)


def sqrt(v):
    if isinstance(v, Dual):
        s = sqrt(v.re)
        return Dual(v.tag, s, v.du / (2.0 * s))
    return np.sqrt(v)


def atan2(y, x):
    t = _top(y, x)
    if t == 0:
        return np.arctan2(y, x)
    yr, yd = _split(y, t)
    xr, xd = _split(x, t)
    return Dual(t, atan2(yr, xr), (xr * yd - yr * xd) / (xr * xr + yr * yr))


def where(mask, a, b):
    """Select between ``a`` and ``b`` with a mask computed from primal values."""
    t = _top(a, b)
    if t == 0:
        return np.where(mask, a, b)
    ar, ad = _split(a, t)
    br, bd = _split(b, t)
    return Dual(t, where(mask, ar, br), where(mask, ad, bd))


def bump(t):
    """Standard mollifier ``exp(-1/(1-t^2))`` on ``|t| < 1``, zero elsewhere."""
    inside = np.abs(primal(t)) < 1.0
    safe = where(inside, t, 0.0)
    return where(inside, exp(-1.0 / (1.0 - safe * safe)), 0.0)


def radial_bump(q):
    """``bump(sqrt(q))`` written in ``q`` so derivatives stay finite at ``q = 0``."""
    inside = primal(q) < 1.0
    safe = where(inside, q, 0.0)
    return where(inside, exp(-1.0 / (1.0 - safe)), 0.0)
