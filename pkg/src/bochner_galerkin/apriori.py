"""A-priori bounds from coercivity constants and trajectory audits.

If ``<A(t) v, v> >= c0 ||v||_V^p - c1(t) ||v||_H^2 - c2(t)``, any function
obeying the energy inequality satisfies

    ||x||_{L^inf(I,H)}^2     <= K0 = (|x0|^2 + 2 |c2|_1) exp(2 |c1|_1)
    c0 ||x||_{L^p(I,V)}^p    <= K1 = |x0|^2 / 2 + |c2|_1 + K0 |c1|_1

and ``||x|| <= M = (K1/c0)^(1/p) + sqrt(K0)`` in the intersection norm.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .function_space import GalerkinBasis, bochner_norms, check_exponent


@dataclass(frozen=True)
class AprioriBounds:
    K0: float
    K1: float
    M: float
    x0_norm: float
    c0: float
    c1_l1: float
    c2_l1: float
    p: float
    grouping: str = "conservative"

    @property
    def lp_bound(self) -> float:
        return (self.K1 / self.c0) ** (1.0 / self.p)

    @property
    def linf_bound(self) -> float:
        return float(np.sqrt(self.K0))

    def as_dict(self) -> dict[str, float | str]:
        return {"K0": self.K0, "K1": self.K1, "M": self.M, "x0_norm": self.x0_norm,
                "c0": self.c0, "c1_l1": self.c1_l1, "c2_l1": self.c2_l1, "p": self.p,
                "grouping": self.grouping}


def gronwall_bounds(x0_norm: float, c0: float, c1_l1: float, c2_l1: float,
                    p: float) -> AprioriBounds:
    """Gronwall constants.  The data term and ``2|c2|_1`` are both inside the
    exponential factor, which dominates the alternative grouping."""
    p = check_exponent(p)
    if not c0 > 0:
        raise ValueError(f"coercivity constant c0 must be positive, got {c0}")
    for name, val in (("x0_norm", x0_norm), ("c1_l1", c1_l1), ("c2_l1", c2_l1)):
        if not val >= 0:
            raise ValueError(f"{name} must be non-negative, got {val}")
    K0 = (x0_norm ** 2 + 2.0 * c2_l1) * np.exp(2.0 * c1_l1)
    K1 = 0.5 * x0_norm ** 2 + c2_l1 + K0 * c1_l1
    M = (K1 / c0) ** (1.0 / p) + np.sqrt(K0)
    return AprioriBounds(float(K0), float(K1), float(M), float(x0_norm), float(c0),
                         float(c1_l1), float(c2_l1), p)


def time_l1(coef, times) -> float:
    """Right-endpoint sum ``sum_k dt_k |c(t_k)|`` on the solver grid."""
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        return 0.0
    dt = np.diff(times)
    if callable(coef):
        vals = np.array([abs(float(coef(t))) for t in times[1:]])
    else:
        vals = np.full(dt.size, abs(float(coef)))
    return float(np.dot(dt, vals))


def operator_bounds(A, forcing, x0_norm: float, times, p: Optional[float] = None) -> AprioriBounds:
    """Bounds for ``A`` with forcing folded into the coercivity constants.

    ``|<f, v>| <= |f|^2/2 + |v|^2/2`` shifts ``c1`` by 1/2 and ``c2`` by
    ``|f(t)|^2/2`` whenever the forcing is nonzero.
    """
    const = A.constants
    if not const.has_coercivity:
        raise ValueError(f"operator {A.name!r} declares no coercivity constants")
    p = A.p if p is None else p
    if p is None:
        raise ValueError("exponent p unknown for this operator")
    c1_l1 = time_l1(lambda t: const.at("c1", t), times)
    c2_l1 = time_l1(lambda t: const.at("c2", t), times)
    if forcing is not None and not forcing.is_zero:
        c1_l1 += 0.5 * (times[-1] - times[0])
        c2_l1 += time_l1(lambda t: 0.5 * float(np.sum(forcing.load(t) ** 2)), times)
    return gronwall_bounds(x0_norm, const.c0, c1_l1, c2_l1, p)


@dataclass(frozen=True)
class AuditReport:
    lp_V: float
    linf_H: float
    lp_bound: float
    linf_bound: float
    rtol: float

    @property
    def lp_ok(self) -> bool:
        return self.lp_V <= self.lp_bound * (1.0 + self.rtol)

    @property
    def linf_ok(self) -> bool:
        return self.linf_H <= self.linf_bound * (1.0 + self.rtol)

    @property
    def passed(self) -> bool:
        return self.lp_ok and self.linf_ok

    def summary(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (f"audit {verdict}: L^p(V) {self.lp_V:.6g} <= {self.lp_bound:.6g}, "
                f"L^inf(H) {self.linf_H:.6g} <= {self.linf_bound:.6g}")


def audit_trajectory(traj, bounds: AprioriBounds, basis: GalerkinBasis, p: float,
                     rtol: float = 1e-6) -> AuditReport:
    lp, linf = bochner_norms(traj, basis, p)
    return AuditReport(lp, linf, bounds.lp_bound, bounds.linf_bound, rtol)
