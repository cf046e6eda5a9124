"""Time stepping of the Galerkin coefficient system ``alpha' = -L(t, alpha) + l(t)``.

The basis is H-orthonormal, so the mass matrix is the identity.  Steps use
the theta-method with ``theta`` in [1/2, 1]; each implicit stage is solved
by Newton's method with a backtracking line search, a damped fixed-point
fallback and at most two emergency halvings of the step.

The energy ledger pairs the scheme increment with the theta-average
``theta alpha_k + (1 - theta) alpha_{k-1}``, which gives

    E_k + W_k - F_k = E_0 - sum_j (theta - 1/2) |alpha_j - alpha_{j-1}|^2

so the slack ``E_0 - E_k - W_k + F_k`` can only drop below zero through
unconverged Newton solves.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .function_space import GalerkinBasis, project_initial, v_norm
from .operators import Forcing, OperatorFamily, ZeroForcing, finite_difference_jacobian

log = logging.getLogger(__name__)

SCHEMES = ("implicit_euler", "theta_method")


class SolveError(RuntimeError):
    """A step could not be completed; carries the partial run."""

    def __init__(self, message, trajectory=None, ledger=None, t_fail=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.ledger = ledger
        self.t_fail = t_fail


class BlowUpError(SolveError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    dt: float
    T: float
    scheme: str = "implicit_euler"
    theta: float = 1.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    blow_up_threshold: float = 10.0
    jacobian: str = "analytic"
    max_halvings: int = 2

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError(f"theta={self.theta} outside [1/2, 1]; explicit schemes break the energy inequality")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")
        if not self.blow_up_threshold > 0:
            raise ValueError("blow_up_threshold must be positive")
        if self.jacobian not in ("analytic", "finite_difference"):
            raise ValueError("jacobian must be 'analytic' or 'finite_difference'")

    @property
    def theta_eff(self) -> float:
        return 1.0 if self.scheme == "implicit_euler" else float(self.theta)

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))


@dataclass
class Trajectory:
    times: np.ndarray
    coeffs: np.ndarray
    newton_iterations: np.ndarray
    basis: GalerkinBasis
    t_fail: Optional[float] = None

    def __len__(self):
        return len(self.times)

    def values(self, k: int) -> np.ndarray:
        return self.basis.evaluate(self.coeffs[k])

    def h_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.coeffs ** 2, axis=1))

    def v_norms(self, p: float) -> np.ndarray:
        return np.array([v_norm(a, self.basis, p) for a in self.coeffs])

    @property
    def complete(self) -> bool:
        return self.t_fail is None


@dataclass
class EnergyLedger:
    times: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    operator_work: list = field(default_factory=list)
    forcing_work: list = field(default_factory=list)
    part_work: dict = field(default_factory=dict)
    initial_energy: float = 0.0
    data_energy: float = 0.0

    def record(self, t, energy, op_work, f_work, parts):
        self.times.append(float(t))
        self.energy.append(float(energy))
        self.operator_work.append(float(op_work))
        self.forcing_work.append(float(f_work))
        for name, w in parts.items():
            self.part_work.setdefault(name, []).append(float(w))

    @property
    def slack(self) -> np.ndarray:
        e = np.asarray(self.energy)
        return self.initial_energy - e - np.asarray(self.operator_work) + np.asarray(self.forcing_work)


@dataclass(frozen=True)
class EnergyReport:
    min_slack: float
    t_min_slack: float
    times: np.ndarray
    slack: np.ndarray
    energy: np.ndarray
    initial_energy: float

    def ok(self, tol_abs: float) -> bool:
        return self.min_slack >= -tol_abs


@dataclass(frozen=True)
class StepResult:
    t: float
    alpha: np.ndarray
    iterations: int
    method: str
    residual: float


def ode_rhs(t: float, alpha, A: OperatorFamily, f: Optional[Forcing], basis: GalerkinBasis) -> np.ndarray:
    """``-<A(t) v, v_i> + <f(t), v_i>`` for ``v = sum alpha_k v_k``."""
    alpha = basis.check_coefficients(alpha)
    try:
        rhs = -A.load(t, alpha)
        if f is not None:
            rhs = rhs + f.load(t)
    except Exception as exc:
        raise RuntimeError(f"operator evaluation failed at t={t:.6g}, |alpha|={np.linalg.norm(alpha):.6g}: {exc}") from exc
    return rhs


def _jacobian(A, t, alpha, config):
    jac = A.jacobian(t, alpha) if config.jacobian == "analytic" else None
    if jac is None:
        jac = finite_difference_jacobian(A, t, alpha)
    return jac


def _newton(A, f, basis, t_new, alpha, explicit_part, dt, theta, config):
    """Solve ``R(x) = x - alpha - dt (theta rhs(t_new, x) + explicit_part) = 0``."""

    def residual(x):
        return x - alpha - dt * (theta * ode_rhs(t_new, x, A, f, basis) + explicit_part)

    x = alpha.copy()
    r = residual(x)
    rn = np.linalg.norm(r)
    n = alpha.size
    for it in range(1, config.newton_max_iter + 1):
        if rn <= config.newton_tol:
            return x, it - 1, rn, "newton"
        try:
            jac = np.eye(n) + dt * theta * _jacobian(A, t_new, x, config)
            delta = np.linalg.solve(jac, -r)
        except (np.linalg.LinAlgError, RuntimeError, FloatingPointError):
            break
        if not np.all(np.isfinite(delta)):
            break
        lam = 1.0
        accepted = False
        while lam > 1e-6:
            trial = x + lam * delta
            try:
                rt = residual(trial)
            except (RuntimeError, FloatingPointError):
                rt = None
            if rt is not None and np.all(np.isfinite(rt)):
                rtn = np.linalg.norm(rt)
                if rtn < (1.0 - 1e-4 * lam) * rn:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            # a residual at the rounding floor cannot decrease further
            scale = np.linalg.norm(x) + np.linalg.norm(alpha) + 1.0
            if rn <= 1e3 * np.finfo(float).eps * scale:
                return x, it, rn, "newton"
            break
        x, r, rn = trial, rt, rtn
    if rn <= config.newton_tol:
        return x, config.newton_max_iter, rn, "newton"
    return None, config.newton_max_iter, rn, "newton"


def _fixed_point(A, f, basis, t_new, alpha, explicit_part, dt, theta, config, omega=0.5):
    x = alpha.copy()
    rn = np.inf
    for it in range(1, 10 * config.newton_max_iter + 1):
        try:
            target = alpha + dt * (theta * ode_rhs(t_new, x, A, f, basis) + explicit_part)
        except (RuntimeError, FloatingPointError):
            break
        r = x - target
        rn = np.linalg.norm(r)
        if not np.isfinite(rn):
            break
        if rn <= config.newton_tol:
            return x, it, rn, "fixed_point"
        x = x - omega * r
    return None, 10 * config.newton_max_iter, rn, "fixed_point"


def _implicit_stage(A, f, basis, t, alpha, dt, config, rhs_prev=None):
    theta = config.theta_eff
    if theta < 1.0:
        if rhs_prev is None:
            rhs_prev = ode_rhs(t, alpha, A, f, basis)
        explicit_part = (1.0 - theta) * rhs_prev
    else:
        explicit_part = np.zeros_like(alpha)
    x, it, rn, method = _newton(A, f, basis, t + dt, alpha, explicit_part, dt, theta, config)
    if x is None:
        log.debug("newton failed at t=%.6g (residual %.3g); trying fixed point", t + dt, rn)
        x, it2, rn, method = _fixed_point(A, f, basis, t + dt, alpha, explicit_part, dt, theta, config)
        it += it2
    return x, it, rn, method


def step(state, config: SolveConfig, A: OperatorFamily, f: Optional[Forcing],
         basis: GalerkinBasis, dt: Optional[float] = None) -> StepResult:
    """One theta-method step of size ``dt`` (default ``config.dt``), no halving."""
    t, alpha = state
    alpha = basis.check_coefficients(alpha)
    dt = config.dt if dt is None else dt
    x, it, rn, method = _implicit_stage(A, f, basis, t, alpha, dt, config)
    if x is None:
        raise SolveError(f"implicit stage did not converge at t={t + dt:.6g} (residual {rn:.3g})",
                         t_fail=t + dt)
    return StepResult(t + dt, x, it, method, rn)


class _Run:
    """Mutable state of one solve: trajectory lists plus the ledger."""

    def __init__(self, A, f, basis, config, alpha0, blow_up_limit, data_energy):
        self.A, self.f, self.basis, self.config = A, f, basis, config
        self.theta = config.theta_eff
        self.limit = blow_up_limit
        self.times = [0.0]
        self.coeffs = [alpha0.copy()]
        self.iters = []
        self.parts = A.parts()
        self.ledger = EnergyLedger(initial_energy=0.5 * float(alpha0 @ alpha0), data_energy=data_energy)
        self.part_loads = self._part_loads(0.0, alpha0)
        self.force = f.load(0.0)
        self.cum = {"op": 0.0, "f": 0.0, **{name: 0.0 for name, _ in self.parts}}
        self.ledger.record(0.0, self.ledger.initial_energy, 0.0, 0.0,
                           {name: 0.0 for name, _ in self.parts})

    def _part_loads(self, t, alpha):
        return [op.load(t, alpha) for _, op in self.parts]

    def advance(self, dt, depth=0):
        t, alpha = self.times[-1], self.coeffs[-1]
        rhs_prev = -sum(self.part_loads) + self.force
        x, it, rn, method = _implicit_stage(self.A, self.f, self.basis, t, alpha, dt, self.config, rhs_prev)
        if x is None:
            if depth < self.config.max_halvings:
                log.info("halving step at t=%.6g (depth %d)", t, depth + 1)
                self.advance(dt / 2, depth + 1)
                self.advance(dt / 2, depth + 1)
                return
            raise SolveError(f"step from t={t:.6g} failed after {depth} halvings (residual {rn:.3g})",
                             t_fail=t + dt)
        self._accept(t + dt, alpha, x, it)

    def _accept(self, t_new, alpha, x, it):
        norm = float(np.linalg.norm(x))
        if not np.isfinite(norm) or norm > self.limit:
            raise BlowUpError(f"|alpha| = {norm:.6g} exceeds the blow-up limit {self.limit:.6g} at t={t_new:.6g}",
                              t_fail=t_new)
        dt = t_new - self.times[-1]
        th = self.theta
        avg = th * x + (1.0 - th) * alpha
        new_loads = self._part_loads(t_new, x)
        new_force = self.f.load(t_new)
        for (name, _), old, new in zip(self.parts, self.part_loads, new_loads):
            w = dt * float((th * new + (1.0 - th) * old) @ avg)
            self.cum[name] += w
            self.cum["op"] += w
        self.cum["f"] += dt * float((th * new_force + (1.0 - th) * self.force) @ avg)
        self.part_loads, self.force = new_loads, new_force
        self.times.append(t_new)
        self.coeffs.append(x)
        self.iters.append(it)
        self.ledger.record(t_new, 0.5 * float(x @ x), self.cum["op"], self.cum["f"],
                           {name: self.cum[name] for name, _ in self.parts})

    def trajectory(self, t_fail=None):
        return Trajectory(np.array(self.times), np.array(self.coeffs),
                          np.array(self.iters, dtype=int), self.basis, t_fail)


def solve_coefficients(alpha0, A: OperatorFamily, f: Optional[Forcing], basis: GalerkinBasis,
                       config: SolveConfig, bounds=None, data_energy: Optional[float] = None):
    """Integrate from coefficients ``alpha0``; returns ``(Trajectory, EnergyLedger)``."""
    alpha0 = basis.check_coefficients(alpha0).copy()
    f = ZeroForcing(basis) if f is None else f
    if A.basis is not basis:
        raise ValueError("operator is bound to a different basis")
    limit = np.inf
    if bounds is not None and np.isfinite(bounds.M):
        limit = config.blow_up_threshold * max(bounds.M, np.finfo(float).tiny)
    if data_energy is None:
        data_energy = 0.5 * float(alpha0 @ alpha0)
    run = _Run(A, f, basis, config, alpha0, limit, data_energy)
    times = np.linspace(0.0, config.T, config.n_steps + 1)
    for k in range(1, times.size):
        try:
            run.advance(times[k] - run.times[-1])
        except SolveError as exc:
            exc.trajectory = run.trajectory(exc.t_fail)
            exc.ledger = run.ledger
            raise
    return run.trajectory(), run.ledger


def solve(y0, A: OperatorFamily, f: Optional[Forcing], basis: GalerkinBasis, config: SolveConfig,
          bounds=None):
    """Project raw initial samples onto the basis and integrate to ``T``."""
    alpha0 = project_initial(y0, basis)
    samples = y0(basis.nodes) if callable(y0) else np.asarray(y0, dtype=float)
    samples = np.asarray(samples, dtype=float).reshape(basis.n_nodes, -1)
    data_energy = 0.5 * float(np.dot(basis.weights, np.sum(samples ** 2, axis=1)))
    return solve_coefficients(alpha0, A, f, basis, config, bounds, data_energy)


def discrete_ibp_check(x: Trajectory, y: Trajectory, basis: GalerkinBasis) -> float:
    """Defect of the discrete integration-by-parts identity

        sum_k <x_k - x_{k-1}, y_k> + sum_k <y_k - y_{k-1}, x_{k-1}> = (x_K, y_K) - (x_0, y_0)
    """
    if x.coeffs.shape != y.coeffs.shape or not np.array_equal(x.times, y.times):
        raise ValueError("trajectories must share the time grid and basis dimension")
    if x.coeffs.shape[1] != basis.n:
        raise ValueError("trajectory dimension does not match the basis")
    X, Y = x.coeffs, y.coeffs
    lhs = np.sum(np.diff(X, axis=0) * Y[1:]) + np.sum(np.diff(Y, axis=0) * X[:-1])
    rhs = X[-1] @ Y[-1] - X[0] @ Y[0]
    return float(abs(lhs - rhs))


def energy_report(ledger: EnergyLedger) -> EnergyReport:
    slack = ledger.slack
    k = int(np.argmin(slack))
    return EnergyReport(float(slack[k]), float(ledger.times[k]), np.asarray(ledger.times),
                        slack, np.asarray(ledger.energy), ledger.initial_energy)
