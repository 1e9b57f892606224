"""Truncated Taylor series (jets) in one variable.

A jet of order K at base point s0 stores a_j = f^(j)(s0) / j! for j = 0..K.
Arithmetic and the elementary functions below propagate all K+1 coefficients
exactly (up to rounding), so differential operators built from them carry no
discretization error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class JetDomainError(ValueError):
    """An elementary function was applied outside its domain."""


def _check_order(order):
    if int(order) != order or order < 0:
        raise ValueError(f"jet order must be a non-negative integer, got {order!r}")
    return int(order)


@dataclass(frozen=True, eq=False)
class Jet:
    base_point: float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("jet coefficients must be a non-empty 1-D sequence")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "base_point", float(self.base_point))

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def __repr__(self):
        return f"Jet(base_point={self.base_point!r}, coeffs={self.coeffs.tolist()!r})"

    # -- structure ---------------------------------------------------------

    def truncate(self, order: int) -> "Jet":
        order = _check_order(order)
        if order > self.order:
            raise ValueError(f"cannot raise jet order from {self.order} to {order}")
        return Jet(self.base_point, self.coeffs[: order + 1])

    def derivative(self) -> "Jet":
        """Jet of f' (order drops by one)."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        j = np.arange(1, self.order + 1)
        return Jet(self.base_point, j * self.coeffs[1:])

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.base_point != self.base_point:
                raise ValueError(
                    f"jets at different base points ({self.base_point} vs {other.base_point})"
                )
            return other
        c = np.zeros(self.order + 1)
        c[0] = float(other)
        return Jet(self.base_point, c)

    def _common(self, other):
        other = self._coerce(other)
        k = min(self.order, other.order)
        return self.coeffs[: k + 1], other.coeffs[: k + 1]

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        a, b = self._common(other)
        return Jet(self.base_point, a + b)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._common(other)
        return Jet(self.base_point, a - b)

    def __rsub__(self, other):
        a, b = self._common(other)
        return Jet(self.base_point, b - a)

    def __neg__(self):
        return Jet(self.base_point, -self.coeffs)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.base_point, self.coeffs * float(other))
        a, b = self._common(other)
        k = a.size
        return Jet(self.base_point, np.convolve(a, b)[:k])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.base_point, self.coeffs / float(other))
        a, b = self._common(other)
        if b[0] == 0.0:
            raise ZeroDivisionError("jet division by a jet with zero constant term")
        q = np.zeros_like(a)
        for k in range(a.size):
            q[k] = (a[k] - np.dot(b[1 : k + 1], q[k - 1 :: -1][:k])) / b[0]
        return Jet(self.base_point, q)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, p):
        return jet_power(self, p)

    # -- evaluation --------------------------------------------------------

    def derivative_at_base(self, k: int) -> float:
        return jet_extract_derivative(self, k)


def jet_variable(base_point: float, order: int) -> Jet:
    """Jet of the identity map s -> s."""
    order = _check_order(order)
    c = np.zeros(order + 1)
    c[0] = base_point
    if order >= 1:
        c[1] = 1.0
    return Jet(base_point, c)


def jet_constant(value: float, base_point: float, order: int) -> Jet:
    c = np.zeros(_check_order(order) + 1)
    c[0] = value
    return Jet(base_point, c)


def jet_monomial(base_point: float, order: int, i: int) -> Jet:
    """Jet of (s - s0)^i / i!, whose i-th derivative at s0 is 1 and all others 0."""
    c = np.zeros(_check_order(order) + 1)
    if i <= order:
        c[i] = 1.0 / math.factorial(i)
    return Jet(base_point, c)


def jet_extract_derivative(x: Jet, k: int) -> float:
    if int(k) != k or k < 0 or k > x.order:
        raise ValueError(f"derivative index {k} outside 0..{x.order}")
    return float(math.factorial(int(k)) * x.coeffs[int(k)])


# -- elementary functions ----------------------------------------------------
# Recurrences come from y' = g(x, y) x' written coefficient-wise; k*y_k collects
# the convolution sum_j j x_j (...)_{k-j}.


def _paired(x: Jet, first, second, sign):
    """(u, v) with u' = v x', v' = sign * u x' (sin/cos, sinh/cosh)."""
    a = x.coeffs
    u = np.zeros_like(a)
    v = np.zeros_like(a)
    u[0], v[0] = first(a[0]), second(a[0])
    ja = np.arange(a.size) * a
    for k in range(1, a.size):
        jk = ja[1 : k + 1]
        u[k] = np.dot(jk, v[k - 1 :: -1][:k]) / k
        v[k] = sign * np.dot(jk, u[k - 1 :: -1][:k]) / k
    return Jet(x.base_point, u), Jet(x.base_point, v)


def jet_sin_cos(x: Jet):
    return _paired(x, math.sin, math.cos, -1.0)


def jet_sinh_cosh(x: Jet):
    return _paired(x, math.sinh, math.cosh, 1.0)


def jet_exp(x: Jet) -> Jet:
    a = x.coeffs
    y = np.zeros_like(a)
    y[0] = math.exp(a[0])
    ja = np.arange(a.size) * a
    for k in range(1, a.size):
        y[k] = np.dot(ja[1 : k + 1], y[k - 1 :: -1][:k]) / k
    return Jet(x.base_point, y)


def jet_log(x: Jet) -> Jet:
    a = x.coeffs
    if a[0] <= 0.0:
        raise JetDomainError(f"log requires a positive value, got {a[0]!r} at s={x.base_point!r}")
    y = np.zeros_like(a)
    y[0] = math.log(a[0])
    for k in range(1, a.size):
        j = np.arange(1, k)
        y[k] = (a[k] - np.dot(j * y[1:k], a[k - 1 : 0 : -1]) / k) / a[0]
    return Jet(x.base_point, y)


def jet_power(x: Jet, p: float) -> Jet:
    a = x.coeffs
    p = float(p)
    if a[0] == 0.0:
        if p == int(p) and p >= 0:
            out = jet_constant(1.0, x.base_point, x.order)
            for _ in range(int(p)):
                out = out * x
            return out
        raise JetDomainError(f"power {p} requires a nonzero value at s={x.base_point!r}")
    if a[0] < 0.0 and p != int(p):
        raise JetDomainError(f"non-integer power {p} of a negative value at s={x.base_point!r}")
    y = np.zeros_like(a)
    y[0] = a[0] ** p
    for k in range(1, a.size):
        j = np.arange(1, k + 1)
        y[k] = np.dot((p * j - (k - j)) * a[1 : k + 1], y[k - 1 :: -1][:k]) / (k * a[0])
    return Jet(x.base_point, y)


def _require_nonzero(value, name, x):
    if value == 0.0:
        raise JetDomainError(f"{name} is singular at s={x.base_point!r} (value {x.coeffs[0]!r})")


def jet_apply_elementary(name: str, x: Jet, p: float | None = None) -> Jet:
    """Apply sinh, cosh, tanh, coth, sin, cos, cot, exp, log or power (with `p`)."""
    if name == "sinh":
        return jet_sinh_cosh(x)[0]
    if name == "cosh":
        return jet_sinh_cosh(x)[1]
    if name == "tanh":
        s, c = jet_sinh_cosh(x)
        return s / c
    if name == "coth":
        s, c = jet_sinh_cosh(x)
        _require_nonzero(s.coeffs[0], "coth", x)
        return c / s
    if name == "sin":
        return jet_sin_cos(x)[0]
    if name == "cos":
        return jet_sin_cos(x)[1]
    if name == "cot":
        s, c = jet_sin_cos(x)
        _require_nonzero(s.coeffs[0], "cot", x)
        return c / s
    if name == "exp":
        return jet_exp(x)
    if name == "log":
        return jet_log(x)
    if name == "power":
        if p is None:
            raise ValueError("power requires an exponent p")
        return jet_power(x, p)
    raise ValueError(f"unknown elementary function {name!r}")
