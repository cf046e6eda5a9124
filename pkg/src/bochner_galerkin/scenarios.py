"""Preset problems, manufactured solutions and convergence studies."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import conditions
from .apriori import AprioriBounds, operator_bounds
from .function_space import (BasisKind, GalerkinBasis, bochner_norms, check_exponent,
                             divfree_fourier_2d, divfree_wavevectors, interval, make_basis,
                             project_initial, square, torus2d)
from .operators import (ConvectiveOperator, FieldForcing, Forcing, LoadForcing, NemyckiiOperator,
                        OperatorFamily, PLaplaceOperator, StressOperator, StressParams,
                        ZeroForcing, sum_operator)
from .perturbation import from_catalogue
from .solver import SolveConfig, SolveError, solve_coefficients

log = logging.getLogger(__name__)

NSE_MAX_KMAX = 16
SCENARIOS = ("heat_1d", "p_laplace_1d", "p_laplace_2d", "p_laplace_perturbed", "p_nse_2d")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "heat_1d"
    p: float = 2.0
    delta: float = 0.0
    T: float = 0.1
    n: int = 8
    dt: float = 1e-3
    y0: str = "mode:1"
    y0_scale: float = 1.0
    f: str = "zero"
    perturbation: Optional[str] = None
    perturbation_params: dict = field(default_factory=dict)
    seed: int = 0
    length: Optional[float] = None
    quadrature_order: int = 8
    quadrature_modes: Optional[int] = None
    scheme: str = "implicit_euler"
    theta: float = 1.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    blow_up_threshold: float = 10.0
    jacobian: str = "analytic"
    constants: dict = field(default_factory=dict)
    probes: tuple = ("auto",)
    probe_samples: int = 200
    probe_tolerance: float = 1e-8

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        check_exponent(self.p)
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.scenario == "p_nse_2d" and self.perturbation not in (None, "zero"):
            raise ValueError("p_nse_2d takes no scalar perturbation")

    @property
    def solve_config(self) -> SolveConfig:
        return SolveConfig(self.dt, self.T, self.scheme, self.theta, self.newton_tol,
                           self.newton_max_iter, self.blow_up_threshold, self.jacobian)

    def echo(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, dict):
                out.update({f"{k}.{kk}": vv for kk, vv in v.items()})
            elif isinstance(v, tuple):
                out[k] = ",".join(map(str, v))
            else:
                out[k] = v
        return out


PRESETS = {
    "heat_1d": dict(p=2.0, T=0.1, n=8, dt=1e-3, y0="mode:1"),
    "p_laplace_1d": dict(p=3.0, T=0.1, n=16, dt=1e-3, y0="multi"),
    "p_laplace_2d": dict(p=3.0, T=0.05, n=10, dt=1e-3, y0="multi"),
    "p_laplace_perturbed": dict(p=2.5, T=0.1, n=12, dt=1e-3, y0="multi",
                                perturbation="linear_plus_sine", perturbation_params={"lam": 1.0}),
    "p_nse_2d": dict(p=11 / 5, delta=0.0, T=0.5, n=12, dt=1e-2, y0="multi"),
}


def preset(name: str, **overrides) -> ScenarioConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    return ScenarioConfig(scenario=name, **{**PRESETS[name], **overrides})


@dataclass
class ManufacturedTarget:
    """``u(t) = a(t) v_mode`` for basis element ``mode`` (1-based)."""

    mode: int
    a: Callable[[float], float]
    da: Callable[[float], float]


@dataclass
class Scenario:
    config: ScenarioConfig
    basis: GalerkinBasis
    operator: OperatorFamily
    y0: np.ndarray
    forcing: Forcing
    bounds: Optional[AprioriBounds]
    alpha0: np.ndarray
    exact: Optional[Callable[[float], np.ndarray]] = None
    metadata: dict = field(default_factory=dict)

    def as_tuple(self):
        return self.basis, self.operator, self.y0, self.forcing, self.bounds

    def solve(self):
        return solve_coefficients(self.alpha0, self.operator, self.forcing, self.basis,
                                  self.config.solve_config, self.bounds,
                                  data_energy=self.metadata.get("data_energy"))

    def probes(self, samples: Optional[int] = None, seed: Optional[int] = None, jobs: int = 1):
        """Condition probes applicable to this scenario at its declared constants."""
        cfg = self.config
        samples = cfg.probe_samples if samples is None else samples
        seed = cfg.seed if seed is None else seed
        wanted = set(cfg.probes)
        auto = "auto" in wanted
        if "none" in wanted:
            return []
        const = self.operator.constants
        kw = dict(samples=samples, seed=seed, tol=cfg.probe_tolerance, jobs=jobs, t_range=(0.0, cfg.T))
        reports = []
        if (auto and const.has_growth) or "C3" in wanted:
            reports.append(conditions.check_growth_C3(self.operator, self.basis, **kw))
        if (auto and const.has_coercivity) or "C5" in wanted:
            reports.append(conditions.check_coercivity_C5(self.operator, self.basis, **kw))
        nem = [op for _, op in self.operator.parts() if isinstance(op, NemyckiiOperator)]
        if nem and (auto or "B2" in wanted):
            reports.append(conditions.check_nemyckii_growth(nem[0].spec, self.basis, **kw))
        conv = any(isinstance(op, ConvectiveOperator) for _, op in self.operator.parts())
        if conv and (auto or "skew" in wanted):
            reports.append(conditions.check_skew(self.basis, min(samples, 100), seed, jobs=jobs))
        return reports


# ------------------------------------------------------------ builders

def _domain_and_basis(cfg: ScenarioConfig) -> GalerkinBasis:
    qn = max(cfg.n, cfg.quadrature_modes or cfg.n)
    if cfg.scenario in ("heat_1d", "p_laplace_1d", "p_laplace_perturbed"):
        dom = interval(cfg.length or 1.0, qn, cfg.quadrature_order)
        return make_basis(dom, BasisKind.DIRICHLET_SINE, cfg.n)
    if cfg.scenario == "p_laplace_2d":
        # resolve the largest index among the first qn tensor modes
        bound = int(np.ceil(np.sqrt(2 * qn))) + 1
        pairs = sorted((k * k + l * l, k, l) for k in range(1, bound + 1) for l in range(1, bound + 1))
        kmax = max(max(k, l) for _, k, l in pairs[:qn])
        dom = square(cfg.length or 1.0, kmax, cfg.quadrature_order)
        return make_basis(dom, BasisKind.TENSOR_SINE_2D, cfg.n)
    length = cfg.length or 2 * np.pi
    available = 2 * len(divfree_wavevectors(NSE_MAX_KMAX))
    if qn > available:
        raise ValueError(f"p_nse_2d needs n <= {available} div-free modes (wavenumbers up to {NSE_MAX_KMAX}), got {qn}")
    kmax = 1
    while 2 * len(divfree_wavevectors(kmax)) < qn:
        kmax += 1
    dom = torus2d(length, max(24, 3 * kmax + 1))
    return divfree_fourier_2d(dom, cfg.n)


def _y0_samples(cfg: ScenarioConfig, basis: GalerkinBasis) -> np.ndarray:
    spec = cfg.y0.strip()
    x = basis.nodes
    shape = basis.values.shape[1:]
    if spec == "zero":
        out = np.zeros(shape)
    elif spec.startswith("mode:"):
        k = int(spec.split(":", 1)[1])
        if not 1 <= k <= basis.n:
            raise ValueError(f"initial mode {k} outside the basis (n={basis.n})")
        out = basis.values[k - 1].copy()
    elif spec in ("multi", "poly"):
        if basis.is_vector:
            if spec == "poly":
                raise ValueError("poly initial data needs a scalar basis")
            weights = np.array([1.0, 0.5, 0.25, 0.125])[:basis.n]
            out = np.tensordot(weights, basis.values[:weights.size], axes=1)
        else:
            s = x / np.array(basis.domain.extent)[None, :]
            prof = 4 * s * (1 - s)
            if spec == "multi":
                prof = prof * (1 + s)
            out = np.prod(prof, axis=1)
    else:
        raise ValueError(f"unknown initial data {spec!r}; use zero, mode:K, multi or poly")
    return cfg.y0_scale * out


def manufactured_heat(t: float, nodes, length: float = 1.0) -> np.ndarray:
    """``exp(-pi^2 t / L^2) sqrt(2/L) sin(pi x / L)`` at the given nodes."""
    x = np.asarray(nodes, dtype=float).reshape(len(nodes), -1)[:, 0]
    return np.exp(-(np.pi / length) ** 2 * t) * np.sqrt(2.0 / length) * np.sin(np.pi * x / length)


def manufactured_forced(p: float, target: ManufacturedTarget, basis: GalerkinBasis,
                        operator: Optional[OperatorFamily] = None) -> LoadForcing:
    """Forcing whose Galerkin solution is exactly ``a(t) v_mode``:
    ``<f(t), v_i> = a'(t) delta_{i,mode} + <A(a(t) v_mode), v_i>``."""
    if not 1 <= target.mode <= basis.n:
        raise ValueError(f"target mode {target.mode} is outside the span of the {basis.n}-element basis")
    op = PLaplaceOperator(basis, p) if operator is None else operator
    e = np.zeros(basis.n)
    e[target.mode - 1] = 1.0

    def load(t):
        a = float(target.a(t))
        return float(target.da(t)) * e + (op.load(t, a * e) if a != 0.0 else np.zeros(basis.n))

    return LoadForcing(basis, load, name=f"manufactured_mode{target.mode}")


def _parse_forcing(cfg: ScenarioConfig, basis: GalerkinBasis, op: OperatorFamily):
    spec = cfg.f.strip()
    if spec == "zero":
        return ZeroForcing(basis), None
    if spec.startswith("const:"):
        c = float(spec.split(":", 1)[1])
        return FieldForcing(basis, lambda t, x: c, name=spec), None
    if spec.startswith("manufactured"):
        parts = spec.split(":")
        mode = int(parts[2]) if len(parts) > 2 else 1
        decay = float(parts[3]) if len(parts) > 3 else 1.0
        target = ManufacturedTarget(mode, lambda t: np.exp(-decay * t), lambda t: -decay * np.exp(-decay * t))
        return manufactured_forced(cfg.p, target, basis, op), target
    raise ValueError(f"unknown forcing {spec!r}; use zero, const:C or manufactured:mode:K:DECAY")


def _build_operator(cfg: ScenarioConfig, basis: GalerkinBasis) -> OperatorFamily:
    if cfg.scenario == "p_nse_2d":
        parts = [StressOperator(basis, StressParams(cfg.p, cfg.delta)), ConvectiveOperator(basis, cfg.p)]
    else:
        parts = [PLaplaceOperator(basis, cfg.p)]
        if cfg.perturbation not in (None, "zero"):
            spec = from_catalogue(cfg.perturbation, **cfg.perturbation_params)
            parts.append(NemyckiiOperator(basis, spec, cfg.p))
    op = sum_operator(parts)
    if cfg.constants:
        op = op.with_constants(**cfg.constants)
    return op


def build_scenario(config: ScenarioConfig) -> Scenario:
    cfg = config
    if cfg.scenario == "heat_1d" and cfg.p != 2.0:
        raise ValueError("heat_1d is the p = 2 case")
    basis = _domain_and_basis(cfg)
    op = _build_operator(cfg, basis)
    forcing, target = _parse_forcing(cfg, basis, op)
    if target is not None:
        y0 = float(target.a(0.0)) * basis.values[target.mode - 1]
    else:
        y0 = _y0_samples(cfg, basis)
    alpha0 = project_initial(y0, basis)
    flat = y0.reshape(basis.n_nodes, -1)
    data_energy = 0.5 * float(np.dot(basis.weights, np.sum(flat * flat, axis=1)))
    x0 = max(float(np.linalg.norm(alpha0)), float(np.sqrt(2 * data_energy)))
    times = np.linspace(0.0, cfg.T, cfg.solve_config.n_steps + 1)
    try:
        bounds = operator_bounds(op, forcing, x0, times, cfg.p)
    except ValueError as exc:
        log.warning("no a-priori bounds: %s", exc)
        bounds = None

    exact = None
    if target is not None:
        e = np.zeros(basis.n)
        e[target.mode - 1] = 1.0
        exact = lambda t: float(target.a(t)) * e  # noqa: E731
    elif cfg.scenario == "heat_1d" and forcing.is_zero:
        (length,) = basis.domain.extent
        lam = (np.arange(1, basis.n + 1) * np.pi / length) ** 2
        exact = lambda t: np.exp(-lam * t) * alpha0  # noqa: E731

    d = basis.dim
    meta = {
        "scenario": cfg.scenario,
        "basis": basis.kind.value,
        "n": basis.n,
        "quadrature_nodes": basis.n_nodes,
        "norm_gradient": basis.norm_gradient,
        "pre_evolution_regime": cfg.p < 2 * d / (d + 2),
        "operative_norm": "intersection" if cfg.p < 2 * d / (d + 2) else "V and H",
        "forcing": forcing.name,
        "data_energy": data_energy,
    }
    meta.update(op.metadata())
    return Scenario(cfg, basis, op, y0, forcing, bounds, alpha0, exact, meta)


# ------------------------------------------------------ convergence study

@dataclass
class StudyCell:
    n: int
    dt: float
    linf_H: float = np.nan
    lp_V: float = np.nan
    status: str = "ok"
    message: str = ""


@dataclass
class ConvergenceStudy:
    cells: list
    reference: str
    temporal_order: float
    spatial_errors: list

    @property
    def all_solved(self) -> bool:
        return all(c.status == "ok" for c in self.cells)

    @property
    def spatial_monotone(self) -> bool:
        errs = [e for _, e in self.spatial_errors if np.isfinite(e)]
        return all(b < a for a, b in zip(errs, errs[1:]))


def _pad(coeffs, n):
    out = np.zeros((coeffs.shape[0], n))
    out[:, :coeffs.shape[1]] = coeffs
    return out


def _resample(times, coeffs, t_new):
    return np.stack([np.interp(t_new, times, coeffs[:, i]) for i in range(coeffs.shape[1])], axis=1)


def fit_order(hs, errs) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    hs, errs = np.asarray(hs, float), np.asarray(errs, float)
    ok = np.isfinite(errs) & (errs > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hs[ok]), np.log(errs[ok]), 1)[0])


def run_study(base: ScenarioConfig, n_list: Sequence[int], dt_list: Sequence[float],
              jobs: int = 1, reference: str = "auto") -> ConvergenceStudy:
    """Solve every ``(n, dt)`` cell and measure ``L^inf(H)`` and ``L^p(V)`` errors."""
    n_list, dt_list = list(n_list), list(dt_list)
    if not n_list or not dt_list:
        raise ValueError("n_list and dt_list must be non-empty")
    n_max, dt_min = max(n_list), min(dt_list)
    grid = [(n, dt) for n in n_list for dt in dt_list]

    def run(cell):
        n, dt = cell
        cfg = replace(base, n=n, dt=dt, quadrature_modes=n_max)
        try:
            sc = build_scenario(cfg)
            traj, _ = sc.solve()
            return sc, traj, None
        except (SolveError, ValueError, RuntimeError) as exc:
            return None, None, str(exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, grid))
    else:
        results = [run(c) for c in grid]

    ref_idx = grid.index((n_max, dt_min))
    ref_sc, ref_traj, _ = results[ref_idx]
    use_exact = reference == "exact" or (reference == "auto" and ref_sc is not None and ref_sc.exact is not None)
    if use_exact and (ref_sc is None or ref_sc.exact is None):
        raise ValueError("no exact solution available for this scenario")
    ref_basis = ref_sc.basis if ref_sc is not None else None

    cells = []
    for (n, dt), (sc, traj, err) in zip(grid, results):
        cell = StudyCell(n, dt)
        if err is not None or ref_basis is None:
            cell.status, cell.message = "failed", err or "reference cell failed"
            cells.append(cell)
            continue
        if use_exact:
            target = _pad(np.array([sc.exact(t) for t in traj.times]), n_max)
        else:
            target = _resample(ref_traj.times, _pad(ref_traj.coeffs, n_max), traj.times)
        diff = _pad(traj.coeffs, n_max) - target
        diff_traj = type(traj)(traj.times, diff, traj.newton_iterations, ref_basis)
        cell.lp_V, cell.linf_H = bochner_norms(diff_traj, ref_basis, base.p)
        cells.append(cell)

    finest_n = [c for c in cells if c.n == n_max and not (not use_exact and c.dt == dt_min)]
    order = fit_order([c.dt for c in finest_n], [c.linf_H for c in finest_n])
    finest_dt = [c for c in cells if c.dt == dt_min and not (not use_exact and c.n == n_max)]
    spatial = [(c.n, c.linf_H) for c in finest_dt]
    return ConvergenceStudy(cells, "exact" if use_exact else f"cell n={n_max}, dt={dt_min:g}",
                            order, spatial)


def galerkin_differences(base: ScenarioConfig, n_list: Sequence[int], jobs: int = 1) -> list[float]:
    """``||traj_n - traj_2n||_{L^inf(I,H)}`` for each ``n`` in ``n_list``."""
    ns = sorted(set(n_list) | {2 * n for n in n_list})
    q = max(ns)

    def run(n):
        sc = build_scenario(replace(base, n=n, quadrature_modes=q))
        return sc.solve()[0]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trajs = dict(zip(ns, pool.map(run, ns)))
    else:
        trajs = {n: run(n) for n in ns}
    out = []
    for n in n_list:
        a, b = trajs[n], trajs[2 * n]
        diff = _pad(a.coeffs, 2 * n) - b.coeffs
        out.append(float(np.sqrt(np.max(np.sum(diff * diff, axis=1)))))
    return out
