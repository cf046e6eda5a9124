"""Sampling probes of growth, coercivity and interpolation inequalities.

Every probe evaluates a margin ``rhs - lhs`` per sample.  The verdict uses
the normalized margin ``(rhs - lhs) / (1 + |rhs| + |lhs|)`` so one tolerance
works across amplitude decades; the raw margin of the worst sample is
reported alongside.  Samples are generated up front from the seed, so the
result does not depend on the worker count.

The dual norm ``||A(t) v||_*`` is maximized over the Galerkin span only.
That is a lower bound on the true dual norm: a failing growth probe is
conclusive, a passing one is evidence.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .function_space import (GalerkinBasis, check_exponent, intersection_norm, lebesgue_norm,
                             v_norm, v_norm_and_gradient)
from .operators import ConvectiveOperator, OperatorFamily, convective_pairing
from .perturbation import PerturbationSpec, eval_coefficient

AMPLITUDES = (0.1, 1.0, 10.0)


class ProbeRefused(ValueError):
    """The operator lacks the constants a probe needs."""


class DegenerateDemo(ValueError):
    pass


@dataclass
class ProbeReport:
    condition: str
    n_samples: int
    margin: float
    abs_margin: float
    witness_t: float
    witness: np.ndarray
    witness_index: int
    tolerance: float
    seed: Optional[int]
    implied_constant: Optional[float] = None
    note: str = ""

    @property
    def verdict(self) -> str:
        return "pass" if self.margin >= -self.tolerance else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def witness_norm(self) -> float:
        return float(np.linalg.norm(self.witness))

    def summary(self) -> str:
        s = (f"{self.condition}: {self.verdict} over {self.n_samples} samples, "
             f"margin {self.margin:.3e} (raw {self.abs_margin:.3e}), witness |alpha| = {self.witness_norm:.4g}")
        if self.implied_constant is not None:
            s += f", implied constant {self.implied_constant:.6g}"
        if self.note:
            s += f" [{self.note}]"
        return s


def sample_coefficients(n: int, samples: int, seed: int = 0,
                        amplitudes: Sequence[float] = AMPLITUDES) -> np.ndarray:
    """Standard normal coefficient vectors, row ``i`` scaled by ``amplitudes[i % 3]``."""
    rng = np.random.default_rng(seed)
    amp = np.array([amplitudes[i % len(amplitudes)] for i in range(samples)])
    return rng.standard_normal((samples, n)) * amp[:, None]


def sample_times(samples: int, seed: int = 0, t_range=(0.0, 1.0)) -> np.ndarray:
    rng = np.random.default_rng([seed, 1])
    return rng.uniform(t_range[0], t_range[1], samples)


def _run_probe(condition, margin_fn, times, coeffs, tol, seed, jobs=1, absolute=False,
               implied=None, note=""):
    """``margin_fn(t, alpha) -> (rhs, lhs)``; reduce by minimum margin."""
    idx = range(len(coeffs))

    def one(i):
        return margin_fn(times[i], coeffs[i])

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            pairs = list(pool.map(one, idx))
    else:
        pairs = [one(i) for i in idx]
    rhs = np.array([pr[0] for pr in pairs])
    lhs = np.array([pr[1] for pr in pairs])
    raw = rhs - lhs
    norm = raw if absolute else raw / (1.0 + np.abs(rhs) + np.abs(lhs))
    k = int(np.argmin(norm)) if len(norm) else 0
    constant = implied(rhs, lhs) if implied is not None and len(norm) else None
    return ProbeReport(condition, len(coeffs), float(norm[k]) if len(norm) else 0.0,
                       float(raw[k]) if len(norm) else 0.0, float(times[k]) if len(norm) else 0.0,
                       np.array(coeffs[k]) if len(norm) else np.zeros(0), k, tol, seed,
                       constant, note)


def replay_margin(report: ProbeReport, margin_fn, absolute=False) -> float:
    """Re-evaluate the normalized margin at the stored witness."""
    rhs, lhs = margin_fn(report.witness_t, report.witness)
    raw = rhs - lhs
    return raw if absolute else raw / (1.0 + abs(rhs) + abs(lhs))


# ------------------------------------------------------------ dual norm

def dual_norm(load, basis: GalerkinBasis, p: float, v=None, seed: int = 0,
              n_random: int = 8) -> float:
    """Lower bound on ``sup_w l.w / ||w||_{V cap H}`` over the basis span."""
    load = np.asarray(load, dtype=float)
    if not np.any(load):
        return 0.0

    def ratio(w):
        nrm = intersection_norm(w, basis, p)
        return float(load @ w) / nrm if nrm > 0 else 0.0

    rng = np.random.default_rng([seed, 2])
    cands = [load] + ([np.asarray(v, dtype=float)] if v is not None and np.any(v) else [])
    cands += list(np.eye(basis.n)) + list(rng.standard_normal((n_random, basis.n)))
    vals = [abs(ratio(c)) for c in cands]
    best = int(np.argmax(vals))
    start = cands[best] * np.sign(ratio(cands[best]) or 1.0)

    def objective(w):
        hn = np.linalg.norm(w)
        if hn == 0.0:
            return 0.0, np.zeros_like(w)
        vn, dvn = v_norm_and_gradient(w, basis, p)
        nrm = vn + hn
        lw = float(load @ w)
        grad_n = dvn + w / hn
        return -lw / nrm, -(load * nrm - lw * grad_n) / nrm ** 2

    # the ratio is scale invariant, so line searches can stall; any iterate is still a valid lower bound
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="The line search algorithm")
        res = minimize(objective, start / np.linalg.norm(start), jac=True, method="BFGS",
                       options={"maxiter": 100, "gtol": 1e-9})
    return max(vals[best], float(-res.fun) if np.isfinite(res.fun) else 0.0)


# --------------------------------------------------------------- probes

def _exponent(A: OperatorFamily, p):
    p = A.p if p is None else p
    if p is None:
        raise ProbeRefused("the probe needs the V exponent p")
    return check_exponent(p)


def c3_margin(A: OperatorFamily, basis: GalerkinBasis, p: Optional[float] = None, seed: int = 0):
    """Per-sample ``(rhs, lhs)`` of the growth condition."""
    const = A.constants
    if not const.has_growth:
        raise ProbeRefused(f"operator {A.name!r} does not declare (growth, alpha, beta, gamma)")
    p = _exponent(A, p)

    def fn(t, alpha):
        lhs = dual_norm(A.load(t, alpha), basis, p, v=alpha, seed=seed)
        rhs = (const.growth(float(np.linalg.norm(alpha)))
               * (const.at("alpha", t) + const.at("beta", t) * v_norm(alpha, basis, p) ** (p - 1.0))
               + const.at("gamma", t))
        return rhs, lhs
    return fn


def check_growth_C3(A: OperatorFamily, basis: GalerkinBasis, samples: int = 200, seed: int = 0,
                    tol: float = 1e-8, jobs: int = 1, t_range=(0.0, 1.0),
                    p: Optional[float] = None, coeffs=None) -> ProbeReport:
    fn = c3_margin(A, basis, p, seed)
    coeffs = sample_coefficients(basis.n, samples, seed) if coeffs is None else np.asarray(coeffs)
    times = sample_times(len(coeffs), seed, t_range)

    def implied(rhs, lhs):
        ok = rhs > 0
        return float(np.max(lhs[ok] / rhs[ok])) if ok.any() else None

    return _run_probe("C3_growth", fn, times, coeffs, tol, seed, jobs, implied=implied,
                      note="dual norm over the Galerkin span (lower bound)")


def c5_margin(A: OperatorFamily, basis: GalerkinBasis, p: Optional[float] = None):
    const = A.constants
    if not const.has_coercivity:
        raise ProbeRefused(f"operator {A.name!r} does not declare (c0, c1, c2)")
    p = _exponent(A, p)

    def fn(t, alpha):
        pair = A.pairing(t, alpha, alpha)
        h2 = float(alpha @ alpha)
        vp = v_norm(alpha, basis, p) ** p
        c1, c2 = const.at("c1", t), const.at("c2", t)
        # compare pair + c1 |v|^2 + c2 against c0 ||v||^p
        return pair + c1 * h2 + c2, const.c0 * vp
    return fn


def check_coercivity_C5(A: OperatorFamily, basis: GalerkinBasis, samples: int = 200, seed: int = 0,
                        tol: float = 1e-8, jobs: int = 1, t_range=(0.0, 1.0),
                        p: Optional[float] = None, coeffs=None) -> ProbeReport:
    fn = c5_margin(A, basis, p)
    pexp = _exponent(A, p)
    coeffs = sample_coefficients(basis.n, samples, seed) if coeffs is None else np.asarray(coeffs)
    times = sample_times(len(coeffs), seed, t_range)
    const = A.constants

    def implied(rhs, lhs):
        # largest c0 the samples support
        vp = lhs / const.c0 if const.c0 else np.array(
            [v_norm(a, basis, pexp) ** pexp for a in coeffs])
        ok = vp > 0
        return float(np.min(rhs[ok] / vp[ok])) if ok.any() else None

    return _run_probe("C5_coercivity", fn, times, coeffs, tol, seed, jobs, implied=implied)


def nemyckii_margin(spec: PerturbationSpec, basis: GalerkinBasis):
    if spec.r < 1:
        raise ValueError(f"growth exponent r={spec.r} must be at least 1")
    if basis.is_vector:
        raise ValueError("superposition operators need a scalar basis")
    rho = spec.rho
    factor = 2.0 ** max(0.0, rho / 2.0 - 1.0)
    c_omega = np.sqrt(basis.domain.volume)
    w = basis.weights

    def fn(t, alpha):
        v = basis.evaluate(alpha)
        lhs = float(np.sqrt(np.dot(w, spec(t, basis.nodes, v) ** 2)))
        c1 = eval_coefficient(spec.C1, t, basis.nodes)
        c2 = eval_coefficient(spec.C2, t, basis.nodes)
        rhs = (float(np.sqrt(np.dot(w, c1 ** 2)))
               + factor * float(np.max(np.abs(c2))) * (c_omega + lebesgue_norm(v, w, rho) ** (rho / 2.0)))
        return rhs, lhs
    return fn


def check_nemyckii_growth(spec: PerturbationSpec, basis: GalerkinBasis, samples: int = 200,
                          seed: int = 0, tol: float = 1e-8, jobs: int = 1,
                          t_range=(0.0, 1.0), coeffs=None) -> ProbeReport:
    fn = nemyckii_margin(spec, basis)
    coeffs = sample_coefficients(basis.n, samples, seed) if coeffs is None else np.asarray(coeffs)
    times = sample_times(len(coeffs), seed, t_range)

    def implied(rhs, lhs):
        ok = rhs > 0
        return float(np.max(lhs[ok] / rhs[ok])) if ok.any() else None

    return _run_probe("B2_nemyckii_growth", fn, times, coeffs, tol, seed, jobs, implied=implied)


def skew_margin(basis: GalerkinBasis):
    def fn(t, alpha):
        return 0.0, abs(convective_pairing(alpha, alpha, basis))
    return fn


def check_skew(basis: GalerkinBasis, samples: int = 100, seed: int = 0, tol: float = 1e-10,
               jobs: int = 1) -> ProbeReport:
    """``|<B u, u>|`` against an absolute tolerance."""
    coeffs = sample_coefficients(basis.n, samples, seed)
    times = np.zeros(samples)
    return _run_probe("convective_skew", skew_margin(basis), times, coeffs, tol, seed, jobs,
                      absolute=True)


def check_monotonicity(A: OperatorFamily, basis: GalerkinBasis, samples: int = 100, seed: int = 0,
                       tol: float = 1e-10, jobs: int = 1) -> ProbeReport:
    """``<A u - A w, u - w> >= 0`` on random pairs."""
    pairs = sample_coefficients(2 * basis.n, samples, seed)
    times = np.zeros(samples)

    def fn(t, uw):
        u, w = uw[:basis.n], uw[basis.n:]
        d = u - w
        return A.pairing(t, u, d), A.pairing(t, w, d)

    return _run_probe("monotonicity", fn, times, pairs, tol, seed, jobs)


# -------------------------------------------------- interpolation on T^3

def torus3_grid(resolution: int = 12, length: float = 2 * np.pi):
    x = np.arange(resolution) * length / resolution
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    w = np.full(X.shape[0], (length / resolution) ** 3)
    return X, w


def trig_wavevectors(kmax: int = 2) -> np.ndarray:
    r = range(-kmax, kmax + 1)
    return np.array([(a, b, c) for a in r for b in r for c in r])


def trig_field(coeffs, cos_table, sin_table) -> np.ndarray:
    """Three-component field ``sum_k a_k cos(k.x) + b_k sin(k.x)``; ``coeffs``
    holds ``a`` then ``b``, each ``(K, 3)`` flattened."""
    K = cos_table.shape[1]
    c = np.asarray(coeffs, dtype=float).reshape(2, K, 3)
    return cos_table @ c[0] + sin_table @ c[1]


def interpolation_exponents(p: float):
    """``rho = 5p/3`` and ``p* = 3p/(3-p)``."""
    return 5.0 * p / 3.0, 3.0 * p / (3.0 - p)


def interpolation_margin(field, weights, p: float):
    """``(rhs, lhs)`` of ``||v||_rho^2 <= ||v||_2^(4/5) ||v||_p*^(6/5)``."""
    rho, pstar = interpolation_exponents(p)
    lhs = lebesgue_norm(field, weights, rho) ** 2
    rhs = lebesgue_norm(field, weights, 2.0) ** 0.8 * lebesgue_norm(field, weights, pstar) ** 1.2
    return rhs, lhs


def interpolation_probe(samples: int = 100, p: float = 11 / 5, seed: int = 0, resolution: int = 12,
                        tol: float = 1e-8, kmax: int = 2, jobs: int = 1) -> ProbeReport:
    """Random trigonometric fields on a ``resolution^3`` torus grid; the witness
    is the coefficient vector of :func:`trig_field`."""
    if not 11 / 5 <= p < 3:
        raise ValueError(f"interpolation probe needs p in [11/5, 3), got {p}")
    nodes, w = torus3_grid(resolution)
    phase = nodes @ trig_wavevectors(kmax).T
    cos_table, sin_table = np.cos(phase), np.sin(phase)
    coeffs = sample_coefficients(6 * phase.shape[1], samples, seed)

    def fn(t, c):
        return interpolation_margin(trig_field(c, cos_table, sin_table), w, p)

    return _run_probe("interpolation_T3", fn, np.zeros(samples), coeffs, tol, seed, jobs,
                      note=f"p={p:g}, grid {resolution}^3")


# ----------------------------------------------------------------- demos

@dataclass
class Comp2Result:
    n: np.ndarray
    q: np.ndarray
    bvw: float
    bvv: float
    sin3_terms: np.ndarray
    n_time: int

    @property
    def limit(self) -> float:
        return float(np.pi * abs(self.bvw))

    @property
    def observed_sign(self) -> int:
        return int(np.sign(self.q[-1])) if self.q.size else 0

    @property
    def relative_errors(self) -> np.ndarray:
        return np.abs(self.q - np.sign(self.q) * self.limit) / self.limit

    @property
    def skew_ok(self) -> bool:
        return bool(np.all(self.sin3_terms < 1e-10))

    @property
    def plateau_ok(self) -> bool:
        tail = self.n >= 5
        return bool(np.all(self.relative_errors[tail] < 0.01))


def default_comp2_pair(basis: GalerkinBasis):
    """``v`` mixes two wavevectors of different length; ``w`` is the basis
    element maximizing ``|<B v, w>|``.  Two modes of equal ``|k|`` interact
    only through a gradient, which every divergence-free ``w`` annihilates."""
    if not basis.is_vector:
        raise ValueError("comp2 demo needs a divergence-free basis")
    modes = basis.modes
    k0 = modes[0][:2]
    j = next((i for i in range(1, basis.n)
              if k0[0] * modes[i][1] - k0[1] * modes[i][0] != 0
              and k0[0] ** 2 + k0[1] ** 2 != modes[i][0] ** 2 + modes[i][1] ** 2), None)
    if j is None:
        raise DegenerateDemo("basis has no suitable second wavevector")
    v = np.zeros(basis.n)
    v[0] = v[j] = 1.0
    load = ConvectiveOperator(basis, 2.0).load(0.0, v)
    w = np.zeros(basis.n)
    w[int(np.argmax(np.abs(load)))] = 1.0
    return v, w


def comp2_demo(v, w, basis: GalerkinBasis, n_max: int = 20, n_time: Optional[int] = None) -> Comp2Result:
    """``q_n = int_0^{2 pi} <B(sin(nt) v), sin(nt) v - w> dt`` by periodic trapezoid in time."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    v = basis.check_coefficients(v)
    w = basis.check_coefficients(w)
    bvw = convective_pairing(v, w, basis)
    bvv = convective_pairing(v, v, basis)
    if abs(bvw) < 1e-12:
        raise DegenerateDemo(f"<Bv, w> = {bvw:.3e} vanishes for the chosen pair")
    # sin^3(n t) has frequency 3n; the rule is exact below n_time
    n_time = 4 * n_max + 16 if n_time is None else n_time
    t = 2 * np.pi * np.arange(n_time) / n_time
    wt = 2 * np.pi / n_time
    ns = np.arange(1, n_max + 1)
    q = np.empty(n_max)
    sin3 = np.empty(n_max)
    for i, n in enumerate(ns):
        s = np.sin(n * t)
        q[i] = wt * sum(convective_pairing(sk * v, sk * v - w, basis) for sk in s)
        sin3[i] = abs(wt * np.sum(s ** 3) * bvv)
    return Comp2Result(ns, q, bvw, bvv, sin3, n_time)


def _phi_catalogue():
    return {
        "one": (lambda t: np.ones_like(t), lambda t: np.zeros_like(t)),
        "t": (lambda t: t, lambda t: np.ones_like(t)),
        "t2": (lambda t: t ** 2, lambda t: 2 * t),
        "exp_sin": (lambda t: np.exp(np.sin(t)), lambda t: np.cos(t) * np.exp(np.sin(t))),
        "gauss": (lambda t: np.exp(-(t - np.pi) ** 2), lambda t: -2 * (t - np.pi) * np.exp(-(t - np.pi) ** 2)),
    }


PHI_NAMES = tuple(_phi_catalogue())


@dataclass
class OscillationResult:
    n: np.ndarray
    s: np.ndarray
    sin2: np.ndarray
    C: float
    fitted_C: float

    @property
    def decay_ok(self) -> bool:
        return bool(np.all(np.abs(self.s) * self.n <= self.C * (1 + 1e-9) + 1e-12))

    @property
    def sin2_ok(self) -> bool:
        return bool(np.all(np.abs(self.sin2 - np.pi) <= 1e-8))


def oscillation_demo(phi: str | Callable = "t", n_max: int = 20, dphi: Optional[Callable] = None,
                     order: int = 8) -> OscillationResult:
    """``s_n = int_0^{2 pi} sin(nt) phi(t) dt``; ``|s_n| <= C/n`` with
    ``C = |phi(2 pi) - phi(0)| + int |phi'|``."""
    from .function_space import composite_gauss_legendre

    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if isinstance(phi, str):
        cat = _phi_catalogue()
        if phi not in cat:
            raise ValueError(f"unknown test function {phi!r}; choose from {PHI_NAMES}")
        phi, dphi = cat[phi]
    t, w = composite_gauss_legendre(0.0, 2 * np.pi, max(64, 4 * n_max), order)
    vals = phi(t)
    ns = np.arange(1, n_max + 1)
    s = np.array([np.dot(w, np.sin(n * t) * vals) for n in ns])
    sin2 = np.array([np.dot(w, np.sin(n * t) ** 2) for n in ns])
    ends = abs(float(phi(np.array([2 * np.pi]))[0] - phi(np.array([0.0]))[0]))
    if dphi is None:
        dphi = lambda x: np.gradient(phi(x), x)  # noqa: E731
    C = ends + float(np.dot(w, np.abs(dphi(t))))
    return OscillationResult(ns, s, sin2, C, float(np.max(np.abs(s) * ns)))
