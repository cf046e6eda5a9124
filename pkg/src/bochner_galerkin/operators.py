"""Time-dependent operator families ``A(t)`` on a Galerkin space.

Every operator is bound to a :class:`GalerkinBasis` and exposes the
Galerkin load vector ``load(t, alpha)_i = <A(t) v, v_i>`` for
``v = sum_k alpha_k v_k``.  The duality pairing with a test function ``w``
is ``load(t, v) . w`` and is therefore exactly linear in ``w``.

Declared constants follow the growth and coercivity conditions

    ||A(t) v||_*   <= B(||jv||_H) (alpha(t) + beta(t) ||v||_V^(p-1)) + gamma(t)
    <A(t) v, v>    >= c0 ||v||_V^p - c1(t) ||jv||_H^2 - c2(t)
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, fields, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .function_space import GRAD_FLOOR, GalerkinBasis, check_exponent, conjugate
from .perturbation import PerturbationSpec, eval_coefficient

TimeCoef = Union[float, Callable[[float], float]]


def _at(c: TimeCoef, t: float) -> float:
    return float(c(t)) if callable(c) else float(c)


def _describe(c) -> str:
    if c is None:
        return "undeclared"
    if callable(c):
        return getattr(c, "label", getattr(c, "__name__", "function"))
    return "%.17g" % c


class _Labelled:
    """Callable with a printable label, for manifests."""

    def __init__(self, fn, label):
        self.fn = fn
        self.label = label

    def __call__(self, *args):
        return self.fn(*args)


def _sum_coef(coefs: Sequence[TimeCoef]) -> Optional[TimeCoef]:
    if any(c is None for c in coefs):
        return None
    if not any(callable(c) for c in coefs):
        return float(sum(coefs))
    label = " + ".join(_describe(c) for c in coefs)
    return _Labelled(lambda t: sum(_at(c, t) for c in coefs), label)


@dataclass(frozen=True)
class DeclaredConstants:
    """Constants of the growth and coercivity conditions; ``None`` = unknown."""

    c0: Optional[float] = None
    c1: Optional[TimeCoef] = None
    c2: Optional[TimeCoef] = None
    alpha: Optional[TimeCoef] = None
    beta: Optional[TimeCoef] = None
    gamma: Optional[TimeCoef] = None
    growth: Optional[Callable[[float], float]] = None

    def at(self, name: str, t: float) -> float:
        value = getattr(self, name)
        if value is None:
            raise ValueError(f"constant {name!r} is not declared")
        return _at(value, t)

    @property
    def has_coercivity(self) -> bool:
        return None not in (self.c0, self.c1, self.c2)

    @property
    def has_growth(self) -> bool:
        return None not in (self.alpha, self.beta, self.gamma, self.growth)

    def describe(self) -> dict[str, str]:
        return {f.name: _describe(getattr(self, f.name)) for f in fields(self)}


def combine_constants(parts: Sequence[DeclaredConstants]) -> DeclaredConstants:
    """Conservative constants of a sum.

    ``c0`` and the additive terms are summed.  The growth function becomes
    the pointwise maximum, which bounds ``sum_k B_k(s) alpha_k`` by
    ``max_k B_k(s) sum_k alpha_k``.
    """
    c0s = [c.c0 for c in parts]
    growths = [c.growth for c in parts]
    if any(g is None for g in growths):
        growth = None
    else:
        label = "max(" + ", ".join(_describe(g) for g in growths) + ")"
        growth = _Labelled(lambda s: max(float(g(s)) for g in growths), label)
    return DeclaredConstants(
        c0=None if None in c0s else float(sum(c0s)),
        c1=_sum_coef([c.c1 for c in parts]),
        c2=_sum_coef([c.c2 for c in parts]),
        alpha=_sum_coef([c.alpha for c in parts]),
        beta=_sum_coef([c.beta for c in parts]),
        gamma=_sum_coef([c.gamma for c in parts]),
        growth=growth,
    )


class OperatorFamily:
    """Base class.  Subclasses implement :meth:`load` and may provide
    :meth:`jacobian`; returning ``None`` there selects finite differences."""

    name = "operator"
    vector_valued: Optional[bool] = None
    p: Optional[float] = None

    def __init__(self, basis: GalerkinBasis):
        if self.vector_valued is not None and basis.is_vector != self.vector_valued:
            kind = "vector" if self.vector_valued else "scalar"
            raise ValueError(f"{type(self).__name__} needs a {kind}-valued basis, got {basis.kind.value}")
        self.basis = basis
        self._overrides: dict = {}

    def load(self, t: float, alpha) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, t: float, alpha) -> Optional[np.ndarray]:
        return None

    def pairing(self, t: float, v, w) -> float:
        w = self.basis.check_coefficients(w)
        return float(np.dot(self.load(t, v), w))

    def parts(self) -> list[tuple[str, "OperatorFamily"]]:
        return [(self.name, self)]

    def _declared(self) -> DeclaredConstants:
        return DeclaredConstants()

    @property
    def constants(self) -> DeclaredConstants:
        base = self._declared()
        return replace(base, **self._overrides) if self._overrides else base

    def with_constants(self, **overrides) -> "OperatorFamily":
        """Copy of this operator with some declared constants replaced."""
        valid = {f.name for f in fields(DeclaredConstants)}
        unknown = set(overrides) - valid
        if unknown:
            raise ValueError(f"unknown constants {sorted(unknown)}")
        other = copy.copy(self)
        other._overrides = {**self._overrides, **overrides}
        return other

    def metadata(self) -> dict[str, str]:
        meta = {"operator": self.name}
        meta.update({f"constant.{k}": v for k, v in self.constants.describe().items()})
        return meta


def finite_difference_jacobian(op: OperatorFamily, t: float, alpha) -> np.ndarray:
    """Forward differences with step ``1e-7 (1 + |alpha_i|)``."""
    alpha = np.asarray(alpha, dtype=float)
    base = op.load(t, alpha)
    jac = np.empty((base.size, alpha.size))
    for i in range(alpha.size):
        h = 1e-7 * (1.0 + abs(alpha[i]))
        shifted = alpha.copy()
        shifted[i] += h
        jac[:, i] = (op.load(t, shifted) - base) / h
    return jac


# -------------------------------------------------------- power-law flux

def _flux(g: np.ndarray, p: float, delta: float) -> np.ndarray:
    mag = np.maximum(np.sqrt(np.sum(g * g, axis=-1)), GRAD_FLOOR)
    return ((delta + mag) ** (p - 2.0))[:, None] * g


def _flux_load(basis: GalerkinBasis, alpha, p: float, delta: float) -> np.ndarray:
    g = basis.norm_gradient_samples(alpha)
    flux = _flux(g, p, delta) * basis.weights[:, None]
    n = basis.n
    return basis.grad_flat.reshape(n, -1) @ flux.ravel()


def _flux_jacobian(basis: GalerkinBasis, alpha, p: float, delta: float) -> np.ndarray:
    g = basis.norm_gradient_samples(alpha)
    mag = np.maximum(np.sqrt(np.sum(g * g, axis=-1)), GRAD_FLOOR)
    a = (delta + mag) ** (p - 2.0)
    b = (p - 2.0) * (delta + mag) ** (p - 3.0) / mag
    n, q, m = basis.grad_flat.shape
    flat = basis.grad_flat.reshape(n, q * m)
    jac = (flat * np.repeat(basis.weights * a, m)) @ flat.T
    proj = np.einsum("iqm,qm->iq", basis.grad_flat, g)
    jac += (proj * (basis.weights * b)) @ proj.T
    return jac


class PLaplaceOperator(OperatorFamily):
    """``<A0 v, w> = int |grad v|^(p-2) grad v . grad w``."""

    name = "p_laplace"
    vector_valued = False

    def __init__(self, basis: GalerkinBasis, p: float):
        super().__init__(basis)
        self.p = check_exponent(p)

    def load(self, t, alpha):
        return _flux_load(self.basis, self.basis.check_coefficients(alpha), self.p, 0.0)

    def jacobian(self, t, alpha):
        return _flux_jacobian(self.basis, self.basis.check_coefficients(alpha), self.p, 0.0)

    def _declared(self):
        # Hoelder: ||A0 v||_* <= ||v||_V^(p-1);  <A0 v, v> = ||v||_V^p
        return DeclaredConstants(c0=1.0, c1=0.0, c2=0.0, alpha=0.0, beta=1.0, gamma=0.0,
                                 growth=_Labelled(lambda s: 1.0, "1"))


@dataclass(frozen=True)
class StressParams:
    p: float
    delta: float = 0.0

    def __post_init__(self):
        check_exponent(self.p)
        if self.delta < 0:
            raise ValueError("delta must be non-negative")


class StressOperator(OperatorFamily):
    """``<S u, w> = int (delta + |Du|)^(p-2) Du : Dw``."""

    name = "stress"
    vector_valued = True

    def __init__(self, basis: GalerkinBasis, params: StressParams):
        super().__init__(basis)
        self.params = params
        self.p = params.p

    def load(self, t, alpha):
        return _flux_load(self.basis, self.basis.check_coefficients(alpha),
                          self.params.p, self.params.delta)

    def jacobian(self, t, alpha):
        return _flux_jacobian(self.basis, self.basis.check_coefficients(alpha),
                              self.params.p, self.params.delta)

    def _declared(self):
        p, delta = self.params.p, self.params.delta
        vol = self.basis.domain.volume
        one = _Labelled(lambda s: 1.0, "1")
        if p >= 2.0:
            # (delta + a)^(p-2) a^2 >= a^p and (delta + a)^(p-1) <= 2^(p-2)(delta^(p-1) + a^(p-1))
            if delta == 0.0:
                return DeclaredConstants(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, one)
            k = 2.0 ** (p - 2.0)
            return DeclaredConstants(1.0, 0.0, 0.0, k * delta ** (p - 1.0) * vol ** (1.0 / conjugate(p)),
                                     k, 0.0, one)
        # p < 2: (delta + a)^(p-2) a^2 >= 2^(p-2)(a^p - delta^p) and |S| <= a^(p-1)
        k = 2.0 ** (p - 2.0)
        return DeclaredConstants(k, 0.0, k * delta ** p * vol, 0.0, 1.0, 0.0, one)


class ConvectiveOperator(OperatorFamily):
    """``<B u, w> = - int u (x) u : Dw``, skew on divergence-free fields.

    The declared growth function uses ``L = sqrt(sum_i max |v_i|^2)`` over the
    basis, so it grows with ``n``: a bound on the span, not a Sobolev constant.
    """

    name = "convective"
    vector_valued = True

    def __init__(self, basis: GalerkinBasis, p: float):
        super().__init__(basis)
        self.p = check_exponent(p)

    def load(self, t, alpha):
        u = self.basis.evaluate(alpha)
        tensor = (u[:, :, None] * u[:, None, :]).reshape(self.basis.n_nodes, -1)
        tensor *= self.basis.weights[:, None]
        return -(self.basis.grad_flat.reshape(self.basis.n, -1) @ tensor.ravel())

    def jacobian(self, t, alpha):
        u = self.basis.evaluate(alpha)
        d = self.basis.dim
        sym = self.basis.grad_flat.reshape(self.basis.n, self.basis.n_nodes, d, d)
        # d/d alpha_j of u (x) u : Dv_i is 2 (v_j (x) u) : Dv_i since Dv_i is symmetric
        contracted = np.einsum("iqab,qb,q->iqa", sym, u, self.basis.weights)
        return -2.0 * np.einsum("iqa,jqa->ij", contracted, self.basis.values)

    def _declared(self):
        # |<Bv,w>| <= ||v||_{2p'}^2 ||w||_V and ||v||_inf <= L |alpha| on the span,
        # hence ||v||_{2p'}^2 <= L^(2/p) ||jv||_H^2.
        sup = np.sqrt(np.sum(self.basis.values ** 2, axis=-1)).max(axis=1)
        lip = float(np.sqrt(np.sum(sup ** 2)))
        k = lip ** (2.0 / self.p)
        return DeclaredConstants(0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
                                 _Labelled(lambda s: k * s * s, "%.17g*s^2" % k))


class NemyckiiOperator(OperatorFamily):
    """``<B(t) v, w> = int b(t, x, v) w``."""

    name = "nemyckii"
    vector_valued = False

    def __init__(self, basis: GalerkinBasis, spec: PerturbationSpec, p: Optional[float] = None):
        super().__init__(basis)
        self.spec = spec
        self.p = None if p is None else check_exponent(p)
        if p is not None:
            spec.validate(p, basis.dim)

    def load(self, t, alpha):
        v = self.basis.evaluate(alpha)
        b = self.spec(t, self.basis.nodes, v)
        return self.basis.values @ (self.basis.weights * b)

    def jacobian(self, t, alpha):
        v = self.basis.evaluate(alpha)
        bs = self.spec.ds(t, self.basis.nodes, v)
        return (self.basis.values * (self.basis.weights * bs)) @ self.basis.values.T

    def _sup(self, c, t):
        return float(np.max(np.abs(eval_coefficient(c, t, self.basis.nodes))))

    def _l2(self, c, t):
        vals = eval_coefficient(c, t, self.basis.nodes)
        return float(np.sqrt(np.dot(self.basis.weights, vals ** 2)))

    def _l1(self, c, t):
        vals = eval_coefficient(c, t, self.basis.nodes)
        return float(np.dot(self.basis.weights, np.abs(vals)))

    def _declared(self):
        spec = self.spec
        vol = self.basis.domain.volume

        def time_fn(fn, c, label):
            if c is None:
                return None
            if callable(c):
                return _Labelled(lambda t: fn(c, t), label)
            return fn(c, 0.0)

        c1 = time_fn(self._sup, spec.c1, "sup|c1(t,.)|")
        c2 = time_fn(self._l1, spec.c2, "||c2(t,.)||_L1")
        rho = spec.rho
        if rho > 2.0:
            return DeclaredConstants(c0=0.0, c1=c1, c2=c2)
        # ||F_t v||_2 <= ||C1||_2 + ||C2||_inf (|Omega|^(1/2) + ||v||_rho^(rho/2)),
        # ||v||_rho <= |Omega|^(1/rho - 1/2) ||v||_2 for rho <= 2
        k = vol ** (0.5 - rho / 4.0)
        growth = _Labelled(lambda s: k * s ** (rho / 2.0), "%.17g*s^%g" % (k, rho / 2.0))
        alpha = time_fn(self._sup, spec.C2, "sup|C2(t,.)|")
        if callable(spec.C1) or callable(spec.C2):
            gamma = _Labelled(lambda t: self._l2(spec.C1, t) + np.sqrt(vol) * self._sup(spec.C2, t),
                              "||C1||_2 + |Omega|^(1/2) sup|C2|")
        else:
            gamma = self._l2(spec.C1, 0.0) + np.sqrt(vol) * self._sup(spec.C2, 0.0)
        return DeclaredConstants(0.0, c1, c2, alpha, 0.0, gamma, growth)

    def metadata(self):
        meta = super().metadata()
        meta["perturbation"] = self.spec.name
        meta.update({f"perturbation.{k}": "%.17g" % v for k, v in self.spec.params.items()})
        return meta


class SumOperator(OperatorFamily):
    name = "sum"

    def __init__(self, parts: Sequence[OperatorFamily]):
        parts = list(parts)
        if not parts:
            raise ValueError("sum of no operators")
        basis = parts[0].basis
        for op in parts[1:]:
            if op.basis is not basis:
                if op.basis.kind != basis.kind:
                    raise ValueError(
                        f"cannot add operators on {basis.kind.value} and {op.basis.kind.value} bases")
                raise ValueError("operators in a sum must share one basis instance")
        super().__init__(basis)
        self.terms = parts
        self.name = "+".join(op.name for op in parts)
        exponents = [op.p for op in parts if op.p is not None]
        self.p = exponents[0] if exponents else None

    def load(self, t, alpha):
        return sum(op.load(t, alpha) for op in self.terms)

    def jacobian(self, t, alpha):
        jacs = [op.jacobian(t, alpha) for op in self.terms]
        if any(j is None for j in jacs):
            return None
        return sum(jacs)

    def parts(self):
        out = []
        for op in self.terms:
            out.extend(op.parts())
        return out

    def _declared(self):
        return combine_constants([op.constants for op in self.terms])

    def metadata(self):
        meta = super().metadata()
        for op in self.terms:
            for k, v in op.metadata().items():
                meta[f"{op.name}.{k}"] = v
        return meta


def sum_operator(parts: Sequence[OperatorFamily]) -> OperatorFamily:
    parts = list(parts)
    if len(parts) == 1:
        return parts[0]
    return SumOperator(parts)


def assemble_load(t: float, v, A: OperatorFamily, basis: GalerkinBasis) -> np.ndarray:
    """``(<A(t) v, v_i>)_i`` for ``v`` in coefficient form."""
    if A.basis is not basis:
        raise ValueError("operator is bound to a different basis")
    return A.load(t, basis.check_coefficients(v))


# ----------------------------------------------- one-shot pairing helpers

def p_laplace_pairing(v, w, basis: GalerkinBasis, p: float) -> float:
    return PLaplaceOperator(basis, p).pairing(0.0, v, w)


def stress_pairing(u, w, basis: GalerkinBasis, params: StressParams) -> float:
    return StressOperator(basis, params).pairing(0.0, u, w)


def convective_pairing(u, w, basis: GalerkinBasis) -> float:
    if not basis.is_vector:
        raise ValueError("convective_pairing needs a vector-valued basis")
    u = basis.check_coefficients(u)
    w = basis.check_coefficients(w)
    uu = basis.evaluate(u)
    dw = np.tensordot(w, basis.grad_flat, axes=1).reshape(basis.n_nodes, basis.dim, basis.dim)
    return -float(np.einsum("q,qa,qb,qab->", basis.weights, uu, uu, dw))


def nemyckii_pairing(t: float, v, w, basis: GalerkinBasis, spec: PerturbationSpec) -> float:
    return NemyckiiOperator(basis, spec).pairing(t, v, w)


# --------------------------------------------------------------- forcing

class Forcing:
    """Right-hand side ``f``; ``load(t)_i = <f(t), v_i>``."""

    name = "forcing"

    def __init__(self, basis: GalerkinBasis):
        self.basis = basis

    def load(self, t: float) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False


class ZeroForcing(Forcing):
    name = "zero"

    def load(self, t):
        return np.zeros(self.basis.n)

    @property
    def is_zero(self):
        return True


class FieldForcing(Forcing):
    """``f(t)`` given by samples ``func(t, nodes)``; loaded by quadrature."""

    name = "field"

    def __init__(self, basis, func, name="field"):
        super().__init__(basis)
        self.func = func
        self.name = name

    def load(self, t):
        samples = np.asarray(self.func(t, self.basis.nodes), dtype=float)
        samples = np.broadcast_to(samples, self.basis.values.shape[1:])
        v = self.basis.values.reshape(self.basis.n, self.basis.n_nodes, -1)
        return np.einsum("iqa,q,qa->i", v, self.basis.weights,
                         samples.reshape(self.basis.n_nodes, -1))


class LoadForcing(Forcing):
    """``f(t)`` given directly by its load vector."""

    def __init__(self, basis, func, name="load"):
        super().__init__(basis)
        self.func = func
        self.name = name

    def load(self, t):
        out = np.asarray(self.func(t), dtype=float)
        if out.shape != (self.basis.n,):
            raise ValueError("forcing load has the wrong length")
        return out
