"""Closed catalogue of perturbation functions ``b(t, x, s)``.

A perturbation is a finite sum of terms ``c_k(t, x) * g_k(s)`` where each
``g_k`` is drawn from a fixed list (integer powers, signed powers, sin, cos,
tanh).  Every such ``b`` is continuous in ``s`` and measurable in ``(t, x)``
by construction.  Each preset carries hand-derived growth and sign
constants:

    |b(t,x,s)| <= C1(t,x) + C2(t,x) (1 + |s|)^(r-1)
    b(t,x,s) s >= -c1(t,x) |s|^2 - c2(t,x)

Note the sign convention for ``c1``: it is stored as the magnitude of the
admissible negative quadratic part.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

Coefficient = Union[float, Callable[[float, np.ndarray], np.ndarray]]

TERM_KINDS = ("power", "signed_power", "sin", "cos", "tanh")


class PerturbationError(ValueError):
    """``b`` produced a non-finite value at some quadrature node."""


def eval_coefficient(c: Coefficient, t: float, x: np.ndarray) -> np.ndarray:
    if callable(c):
        return np.broadcast_to(np.asarray(c(t, x), dtype=float), x.shape[:1])
    return np.full(x.shape[0], float(c))


@dataclass(frozen=True)
class Term:
    kind: str
    coefficient: Coefficient = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise ValueError(f"unknown term kind {self.kind!r}; choose from {TERM_KINDS}")
        if self.kind == "power" and (self.exponent < 0 or self.exponent != int(self.exponent)):
            raise ValueError("power terms need a non-negative integer exponent")
        if self.kind == "signed_power" and self.exponent < 1:
            raise ValueError("signed_power terms need exponent q >= 1 (s|s|^(q-2))")

    def g(self, s):
        k, e = self.kind, self.exponent
        if k == "power":
            return s ** int(e)
        if k == "signed_power":
            return np.sign(s) * np.abs(s) ** (e - 1.0)
        if k == "sin":
            return np.sin(e * s)
        if k == "cos":
            return np.cos(e * s)
        return np.tanh(e * s)

    def dg(self, s):
        k, e = self.kind, self.exponent
        if k == "power":
            return e * s ** int(e - 1) if e >= 1 else np.zeros_like(s)
        if k == "signed_power":
            with np.errstate(divide="ignore"):
                return (e - 1.0) * np.abs(s) ** (e - 2.0)
        if k == "sin":
            return e * np.cos(e * s)
        if k == "cos":
            return -e * np.sin(e * s)
        return e / np.cosh(e * s) ** 2


@dataclass(frozen=True)
class PerturbationSpec:
    """``b(t, x, s) = sum_k c_k(t, x) g_k(s)`` with declared constants."""

    name: str
    terms: tuple[Term, ...] = ()
    C1: Coefficient = 0.0
    C2: Coefficient = 0.0
    r: float = 1.0
    c1: Coefficient = 0.0
    c2: Coefficient = 0.0
    params: dict = field(default_factory=dict)

    def __call__(self, t: float, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        with np.errstate(all="ignore"):
            for term in self.terms:
                out = out + eval_coefficient(term.coefficient, t, x) * term.g(s)
        self._check_finite(out, x)
        return out

    def ds(self, t: float, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Partial derivative of ``b`` in ``s``."""
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        with np.errstate(all="ignore"):
            for term in self.terms:
                out = out + eval_coefficient(term.coefficient, t, x) * term.dg(s)
        # signed powers with q < 2 have an infinite slope at s = 0
        return np.where(np.isfinite(out), out, 0.0)

    def _check_finite(self, values, x):
        bad = ~np.isfinite(values)
        if bad.any():
            q = int(np.argmax(bad))
            raise PerturbationError(
                f"perturbation {self.name!r} is not finite at node {q} (x = {x[q].tolist()})")

    @property
    def rho(self) -> float:
        """Lebesgue exponent ``max(1, 2(r-1))`` of the superposition operator."""
        return max(1.0, 2.0 * (self.r - 1.0))

    def validate(self, p: float, d: int) -> None:
        upper = max(2.0, p * (d + 2) / d)
        if not 1.0 <= self.r < upper:
            raise ValueError(
                f"declared growth exponent r={self.r} outside [1, {upper:g}) for p={p:g}, d={d}")


# ------------------------------------------------------------ catalogue

def zero() -> PerturbationSpec:
    return PerturbationSpec("zero")


def identity() -> PerturbationSpec:
    """``b = s``: |s| <= (1 + |s|), s^2 >= 0."""
    return PerturbationSpec("identity", (Term("power", 1.0, 1),), C2=1.0, r=2.0)


def linear(lam: float = 1.0) -> PerturbationSpec:
    """``b = -lam s``: anti-damping of strength ``lam``."""
    lam = float(lam)
    return PerturbationSpec("linear", (Term("power", -lam, 1),), C2=abs(lam), r=2.0,
                            c1=max(lam, 0.0), params={"lambda": lam})


def sine() -> PerturbationSpec:
    """``b = sin(s)``: bounded, and s sin(s) >= -s^2."""
    return PerturbationSpec("sine", (Term("sin", 1.0, 1.0),), C1=1.0, r=1.0, c1=1.0)


def linear_plus_sine(lam: float = 1.0) -> PerturbationSpec:
    """``b = -lam s + sin(s)``; |b| <= (lam + 1)(1 + |s|), b s >= -(lam + 1) s^2."""
    lam = float(lam)
    return PerturbationSpec("linear_plus_sine", (Term("power", -lam, 1), Term("sin", 1.0, 1.0)),
                            C2=abs(lam) + 1.0, r=2.0, c1=max(lam, 0.0) + 1.0,
                            params={"lambda": lam})


def linear_plus_power(lam: float = 1.0, mu: float = 1.0, q: float = 1.5) -> PerturbationSpec:
    """``b = -lam s + mu s|s|^(q-2)`` with ``1 <= q <= 2``.

    ``|s|^(q-1) <= 1 + |s|`` gives ``C2 = |lam| + |mu|`` with ``r = 2``;
    for ``mu >= 0`` the power term only adds to ``b s``.
    """
    lam, mu, q = float(lam), float(mu), float(q)
    if not 1.0 <= q <= 2.0:
        raise ValueError("linear_plus_power needs 1 <= q <= 2")
    c1 = max(lam, 0.0) + (abs(mu) if mu < 0 else 0.0)
    c2 = 0.0
    if mu < 0:
        # |s|^q <= s^2 + 1 for q in [1, 2]
        c2 = abs(mu)
    return PerturbationSpec("linear_plus_power",
                            (Term("power", -lam, 1), Term("signed_power", mu, q)),
                            C2=abs(lam) + abs(mu), r=2.0, c1=c1, c2=c2,
                            params={"lambda": lam, "mu": mu, "q": q})


def power(k: int, C2: float | None = None, r: float | None = None) -> PerturbationSpec:
    """``b = s^k``.  Without overrides the declared constants are valid:
    ``|s|^k <= (1 + |s|)^k`` so ``C2 = 1, r = k + 1``.  Even ``k`` admits
    no sign constants (``s^(k+1)`` is unbounded below), so ``c1`` is left
    undeclared."""
    k = int(k)
    return PerturbationSpec(f"power{k}", (Term("power", 1.0, k),),
                            C2=1.0 if C2 is None else C2,
                            r=float(k + 1) if r is None else float(r),
                            c1=0.0 if k % 2 == 1 else None,
                            params={"k": k})


CATALOGUE: dict[str, Callable[..., PerturbationSpec]] = {
    "zero": zero,
    "identity": identity,
    "linear": linear,
    "sine": sine,
    "linear_plus_sine": linear_plus_sine,
    "linear_plus_power": linear_plus_power,
    "power": power,
}


def from_catalogue(name: str, **params) -> PerturbationSpec:
    try:
        builder = CATALOGUE[name]
    except KeyError:
        raise ValueError(f"unknown perturbation {name!r}; choose from {sorted(CATALOGUE)}") from None
    return builder(**params)
