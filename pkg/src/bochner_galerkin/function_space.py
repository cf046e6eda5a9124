"""Discrete function spaces: domains, quadrature, Galerkin bases and norms.

A coefficient vector ``alpha`` of length ``n`` against a :class:`GalerkinBasis`
represents an element of ``V`` and, at the same time, its image in ``H``.
Every basis built here is orthonormal in ``L^2`` under its own quadrature,
so the H inner product of two coefficient vectors is their dot product.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

# |G| floor for the power-law flux; the singularity at G = 0 is removable.
GRAD_FLOOR = 1e-14


class DomainKind(str, Enum):
    INTERVAL_1D = "interval_1d"
    SQUARE_2D = "square_2d"
    TORUS_2D = "torus_2d"
    TORUS_3D_PROBE = "torus_3d_probe"


class BasisKind(str, Enum):
    DIRICHLET_SINE = "dirichlet_sine"
    TENSOR_SINE_2D = "tensor_sine_2d"
    DIVFREE_FOURIER_2D = "divfree_fourier_2d"


_DIMS = {
    DomainKind.INTERVAL_1D: 1,
    DomainKind.SQUARE_2D: 2,
    DomainKind.TORUS_2D: 2,
    DomainKind.TORUS_3D_PROBE: 3,
}


@dataclass(frozen=True)
class Domain:
    """Box domain with its quadrature rule.

    Intervals and squares use a composite Gauss-Legendre rule with
    ``grid_resolution`` cells per axis and ``quadrature_order`` points per
    cell.  Tori use the uniform trapezoid rule with ``grid_resolution``
    points per axis, which is exact for trigonometric polynomials of degree
    below ``grid_resolution``.
    """

    kind: DomainKind
    extent: tuple[float, ...]
    quadrature_order: int = 8
    grid_resolution: tuple[int, ...] = (32,)

    def __post_init__(self):
        kind = DomainKind(self.kind)
        object.__setattr__(self, "kind", kind)
        d = _DIMS[kind]
        extent = tuple(float(e) for e in np.broadcast_to(self.extent, (d,)))
        res = tuple(int(r) for r in np.broadcast_to(self.grid_resolution, (d,)))
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "grid_resolution", res)
        if any(e <= 0 for e in extent):
            raise ValueError(f"domain extent must be positive, got {extent}")
        if self.quadrature_order < 2:
            raise ValueError("quadrature_order must be at least 2")
        if any(r < 4 for r in res):
            raise ValueError("grid_resolution must be at least 4 on every axis")

    @property
    def dim(self) -> int:
        return _DIMS[self.kind]

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def periodic(self) -> bool:
        return self.kind in (DomainKind.TORUS_2D, DomainKind.TORUS_3D_PROBE)

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(nodes, weights)`` with nodes of shape ``(Q, d)``."""
        axes = []
        for length, res in zip(self.extent, self.grid_resolution):
            if self.periodic:
                axes.append((np.arange(res) * (length / res), np.full(res, length / res)))
            else:
                axes.append(composite_gauss_legendre(0.0, length, res, self.quadrature_order))
        grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
        wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=1)
        weights = np.prod(np.stack([w.ravel() for w in wgrids], axis=1), axis=1)
        return nodes, weights


def composite_gauss_legendre(a: float, b: float, cells: int, order: int):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, cells + 1)
    h = np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + 0.5 * h[:, None] * xg[None, :]).ravel()
    weights = (0.5 * h[:, None] * wg[None, :]).ravel()
    return nodes, weights


def interval(length: float = 1.0, n_modes: int = 8, quadrature_order: int = 8,
             grid_resolution: int | None = None) -> Domain:
    """Interval ``(0, length)`` with a quadrature fine enough for ``n_modes`` sines."""
    if grid_resolution is None:
        grid_resolution = _sine_resolution(n_modes, quadrature_order)
    return Domain(DomainKind.INTERVAL_1D, (length,), quadrature_order, (grid_resolution,))


def square(length: float = 1.0, max_mode: int = 4, quadrature_order: int = 8,
           grid_resolution: int | None = None) -> Domain:
    if grid_resolution is None:
        grid_resolution = _sine_resolution(max_mode, quadrature_order)
    return Domain(DomainKind.SQUARE_2D, (length, length), quadrature_order,
                  (grid_resolution, grid_resolution))


def torus2d(length: float = 2 * np.pi, grid_resolution: int = 24) -> Domain:
    return Domain(DomainKind.TORUS_2D, (length, length), 2, (grid_resolution, grid_resolution))


def _sine_resolution(k_max: int, order: int) -> int:
    # keeps the phase of the highest product mode below (pi/2)(order/8) per cell
    res = int(np.ceil(32 * k_max / order))
    res += res % 2
    return max(16, res)


def _max_sine_mode(domain: Domain) -> int:
    return min(domain.grid_resolution) * domain.quadrature_order // 32


def _max_fourier_wavenumber(domain: Domain) -> int:
    # cubic integrands (convective form) stay exact under the trapezoid rule
    return (min(domain.grid_resolution) - 1) // 3


@dataclass(frozen=True, eq=False)
class GalerkinBasis:
    """Finite basis sampled at quadrature nodes.

    ``values`` has shape ``(n, Q)`` for scalar bases and ``(n, Q, d)`` for
    vector bases.  ``gradients`` has shape ``(n, Q, d)`` or ``(n, Q, d, d)``
    with ``gradients[i, q, a, b] = d_b (v_i)_a``.
    """

    domain: Domain
    kind: BasisKind
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    gradients: np.ndarray
    modes: np.ndarray
    _norm_grad: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        g = self.gradients
        if self.is_vector:
            sym = 0.5 * (g + np.swapaxes(g, -1, -2))
            flat = sym.reshape(self.n, self.n_nodes, -1)
        else:
            flat = g
        object.__setattr__(self, "_norm_grad", flat)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 3

    @property
    def norm_gradient(self) -> str:
        """Which gradient enters ``||.||_V``: ``"symmetric"`` or ``"full"``."""
        return "symmetric" if self.is_vector else "full"

    @property
    def grad_flat(self) -> np.ndarray:
        """Gradient samples used by ``||.||_V``, shape ``(n, Q, m)``."""
        return self._norm_grad

    def check_coefficients(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (self.n,):
            raise ValueError(f"expected coefficient vector of length {self.n}, got shape {alpha.shape}")
        return alpha

    def evaluate(self, alpha) -> np.ndarray:
        """Samples of ``sum_i alpha_i v_i`` at the quadrature nodes."""
        alpha = self.check_coefficients(alpha)
        return np.tensordot(alpha, self.values, axes=1)

    def gradient(self, alpha) -> np.ndarray:
        alpha = self.check_coefficients(alpha)
        return np.tensordot(alpha, self.gradients, axes=1)

    def norm_gradient_samples(self, alpha) -> np.ndarray:
        """``grad v`` (scalar) or flattened ``D v`` (vector), shape ``(Q, m)``."""
        alpha = self.check_coefficients(alpha)
        return np.tensordot(alpha, self._norm_grad, axes=1)

    def gram(self) -> np.ndarray:
        v = self.values.reshape(self.n, self.n_nodes, -1)
        return np.einsum("iqa,q,jqa->ij", v, self.weights, v)

    def integrate(self, samples) -> float:
        return float(np.dot(self.weights, samples))

    def divergence(self) -> np.ndarray:
        """Pointwise divergence of every basis field, shape ``(n, Q)``."""
        if not self.is_vector:
            raise ValueError("divergence is defined for vector bases only")
        return np.trace(self.gradients, axis1=-2, axis2=-1)


def dirichlet_sine(domain: Domain, n: int) -> GalerkinBasis:
    """``sqrt(2/L) sin(i pi x / L)``, ``i = 1..n``, on ``(0, L)``."""
    if domain.kind is not DomainKind.INTERVAL_1D:
        raise ValueError("dirichlet_sine needs an interval_1d domain")
    if not 1 <= n <= _max_sine_mode(domain):
        raise ValueError(f"n={n} exceeds the {_max_sine_mode(domain)} modes the quadrature resolves")
    nodes, weights = domain.quadrature()
    (length,) = domain.extent
    k = np.arange(1, n + 1)[:, None] * np.pi / length
    x = nodes[:, 0][None, :]
    c = np.sqrt(2.0 / length)
    values = c * np.sin(k * x)
    gradients = (c * k * np.cos(k * x))[:, :, None]
    return GalerkinBasis(domain, BasisKind.DIRICHLET_SINE, nodes, weights, values,
                         gradients, np.arange(1, n + 1)[:, None])


def tensor_sine_2d(domain: Domain, n: int) -> GalerkinBasis:
    """Products of Dirichlet sines on a rectangle, ordered by eigenvalue."""
    if domain.kind is not DomainKind.SQUARE_2D:
        raise ValueError("tensor_sine_2d needs a square_2d domain")
    kmax = _max_sine_mode(domain)
    lx, ly = domain.extent
    pairs = [(k, l) for k in range(1, kmax + 1) for l in range(1, kmax + 1)]
    pairs.sort(key=lambda kl: ((kl[0] / lx) ** 2 + (kl[1] / ly) ** 2, kl))
    if not 1 <= n <= len(pairs):
        raise ValueError(f"n={n} exceeds the {len(pairs)} available tensor modes")
    modes = np.array(pairs[:n])
    nodes, weights = domain.quadrature()
    x, y = nodes[:, 0][None, :], nodes[:, 1][None, :]
    kx = modes[:, 0:1] * np.pi / lx
    ky = modes[:, 1:2] * np.pi / ly
    c = 2.0 / np.sqrt(lx * ly)
    sx, cx = np.sin(kx * x), np.cos(kx * x)
    sy, cy = np.sin(ky * y), np.cos(ky * y)
    values = c * sx * sy
    gradients = np.stack([c * kx * cx * sy, c * ky * sx * cy], axis=-1)
    return GalerkinBasis(domain, BasisKind.TENSOR_SINE_2D, nodes, weights, values, gradients, modes)


def divfree_wavevectors(kmax: int) -> list[tuple[int, int]]:
    """Half-plane wavevectors with ``max |k_i| <= kmax``, ordered by ``|k|^2``."""
    ks = [(a, b) for a in range(0, kmax + 1) for b in range(-kmax, kmax + 1)
          if a > 0 or (a == 0 and b > 0)]
    ks.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2, k))
    return ks


def divfree_fourier_2d(domain: Domain, n: int) -> GalerkinBasis:
    """Real divergence-free Fourier fields on the 2D torus.

    Each wavevector ``k`` contributes ``c k_perp/|k| cos(k.x)`` and
    ``c k_perp/|k| sin(k.x)`` with ``k_perp = (-k_2, k_1)``.
    """
    if domain.kind is not DomainKind.TORUS_2D:
        raise ValueError("divfree_fourier_2d needs a torus_2d domain")
    ks = divfree_wavevectors(_max_fourier_wavenumber(domain))
    if not 1 <= n <= 2 * len(ks):
        raise ValueError(f"n={n} exceeds the {2 * len(ks)} available divergence-free modes")
    nodes, weights = domain.quadrature()
    lx, ly = domain.extent
    c = np.sqrt(2.0 / domain.volume)
    values, gradients, modes = [], [], []
    for i in range(n):
        k_int = ks[i // 2]
        phase_kind = i % 2  # 0: cos, 1: sin
        k = np.array([2 * np.pi * k_int[0] / lx, 2 * np.pi * k_int[1] / ly])
        kperp = np.array([-k[1], k[0]]) / np.linalg.norm(k)
        theta = nodes @ k
        if phase_kind == 0:
            f, df = np.cos(theta), -np.sin(theta)
        else:
            f, df = np.sin(theta), np.cos(theta)
        values.append(c * f[:, None] * kperp[None, :])
        gradients.append(c * df[:, None, None] * np.outer(kperp, k)[None, :, :])
        modes.append((k_int[0], k_int[1], phase_kind))
    return GalerkinBasis(domain, BasisKind.DIVFREE_FOURIER_2D, nodes, weights,
                         np.array(values), np.array(gradients), np.array(modes))


def make_basis(domain: Domain, kind: BasisKind | str, n: int) -> GalerkinBasis:
    builders = {
        BasisKind.DIRICHLET_SINE: dirichlet_sine,
        BasisKind.TENSOR_SINE_2D: tensor_sine_2d,
        BasisKind.DIVFREE_FOURIER_2D: divfree_fourier_2d,
    }
    return builders[BasisKind(kind)](domain, n)


# ---------------------------------------------------------------- norms

def check_exponent(p: float) -> float:
    p = float(p)
    if not 1.0 < p < np.inf:
        raise ValueError(f"exponent must lie in (1, inf), got {p}")
    return p


def conjugate(p: float) -> float:
    p = check_exponent(p)
    return p / (p - 1.0)


def h_inner(u, v, basis: GalerkinBasis) -> float:
    """H inner product of two coefficient vectors (Parseval)."""
    u = basis.check_coefficients(u)
    v = basis.check_coefficients(v)
    return float(np.dot(u, v))


def h_norm(v, basis: GalerkinBasis) -> float:
    return float(np.sqrt(h_inner(v, v, basis)))


def h_inner_quadrature(u_samples, v_samples, basis: GalerkinBasis) -> float:
    """L^2 pairing of raw samples by direct quadrature."""
    u = np.asarray(u_samples, dtype=float).reshape(basis.n_nodes, -1)
    v = np.asarray(v_samples, dtype=float).reshape(basis.n_nodes, -1)
    return float(np.einsum("q,qa,qa->", basis.weights, u, v))


def grad_magnitude(v, basis: GalerkinBasis) -> np.ndarray:
    g = basis.norm_gradient_samples(v)
    return np.sqrt(np.sum(g * g, axis=-1))


def v_norm(v, basis: GalerkinBasis, p: float) -> float:
    """``(int |grad v|^p)^(1/p)``; the symmetric gradient on vector bases."""
    p = check_exponent(p)
    return float(np.dot(basis.weights, grad_magnitude(v, basis) ** p) ** (1.0 / p))


def v_norm_and_gradient(v, basis: GalerkinBasis, p: float) -> tuple[float, np.ndarray]:
    """:func:`v_norm` and its derivative with respect to the coefficients."""
    p = check_exponent(p)
    g = basis.norm_gradient_samples(v)
    mag = np.sqrt(np.sum(g * g, axis=-1))
    norm = float(np.dot(basis.weights, mag ** p) ** (1.0 / p))
    if norm == 0.0:
        return 0.0, np.zeros(basis.n)
    flux = (basis.weights * np.maximum(mag, GRAD_FLOOR) ** (p - 2))[:, None] * g
    return norm, basis.grad_flat.reshape(basis.n, -1) @ flux.ravel() * norm ** (1 - p)


def v_norm_gradient(v, basis: GalerkinBasis, p: float) -> np.ndarray:
    """Derivative of :func:`v_norm` with respect to the coefficients."""
    return v_norm_and_gradient(v, basis, p)[1]


def intersection_norm(v, basis: GalerkinBasis, p: float) -> float:
    """Norm of ``V cap_j H``: ``||v||_V + ||j v||_H``."""
    return v_norm(v, basis, p) + h_norm(v, basis)


def lebesgue_norm(samples, weights, q: float) -> float:
    """``(sum_k w_k |u_k|^q)^(1/q)`` for scalar or vector samples."""
    u = np.asarray(samples, dtype=float)
    mag = np.abs(u) if u.ndim == 1 else np.sqrt(np.sum(u * u, axis=-1))
    if np.isinf(q):
        return float(mag.max(initial=0.0))
    return float(np.dot(weights, mag ** q) ** (1.0 / q))


def project_initial(y0, basis: GalerkinBasis) -> np.ndarray:
    """Coefficients ``(y0, j v_i)_H`` of the H-projection of ``y0``.

    ``y0`` is either an array of samples at ``basis.nodes`` or a callable
    taking the node array.
    """
    if callable(y0):
        y0 = y0(basis.nodes)
    samples = np.asarray(y0, dtype=float)
    expected = basis.values.shape[1:]
    if samples.shape != expected:
        raise ValueError(f"initial samples must have shape {expected}, got {samples.shape}")
    v = basis.values.reshape(basis.n, basis.n_nodes, -1)
    return np.einsum("iqa,q,qa->i", v, basis.weights, samples.reshape(basis.n_nodes, -1))


def bochner_norms(traj, basis: GalerkinBasis, p: float) -> tuple[float, float]:
    """Discrete ``L^p(I, V)`` and ``L^inf(I, H)`` norms of a trajectory.

    The time integral is the right-endpoint sum over the trajectory grid,
    matching the implicit Euler energy ledger.
    """
    coeffs = np.asarray(traj.coeffs, dtype=float)
    times = np.asarray(traj.times, dtype=float)
    if coeffs.shape[0] == 0:
        raise ValueError("empty trajectory")
    p = check_exponent(p)
    dt = np.diff(times)
    vn = np.array([v_norm(a, basis, p) for a in coeffs[1:]])
    lp = float(np.dot(dt, vn ** p) ** (1.0 / p)) if dt.size else 0.0
    linf = float(np.sqrt(np.max(np.sum(coeffs * coeffs, axis=1))))
    return lp, linf


def norm_equivalence(basis: GalerkinBasis, p: float, samples: int = 200,
                     seed: int = 0) -> tuple[float, float]:
    """Empirical ``c, C`` with ``c |alpha| <= ||v||_{V cap H} <= C |alpha|``."""
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(samples):
        a = rng.standard_normal(basis.n)
        ratios.append(intersection_norm(a, basis, p) / np.linalg.norm(a))
    return float(min(ratios)), float(max(ratios))


def export_basis_csv(basis: GalerkinBasis, path) -> None:
    """Write nodes, weights and basis samples as long-format CSV."""
    d = basis.dim
    coord = [f"x{a}" for a in range(d)]
    if basis.is_vector:
        val = [f"value{a}" for a in range(d)]
        grad = [f"grad{a}{b}" for a in range(d) for b in range(d)]
    else:
        val = ["value"]
        grad = [f"grad{b}" for b in range(d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(coord + ["weight", "basis_index"] + val + grad)
        for i in range(basis.n):
            vals = basis.values[i].reshape(basis.n_nodes, -1)
            grads = basis.gradients[i].reshape(basis.n_nodes, -1)
            for q in range(basis.n_nodes):
                row = list(basis.nodes[q]) + [basis.weights[q], i + 1] + list(vals[q]) + list(grads[q])
                w.writerow([r if isinstance(r, int) else "%.17g" % r for r in row])


def sample_field(func: Callable, basis: GalerkinBasis) -> np.ndarray:
    """Evaluate ``func(nodes)`` with the shape a raw sample array needs."""
    out = np.asarray(func(basis.nodes), dtype=float)
    return np.broadcast_to(out, basis.values.shape[1:]).copy()


__all__ = [
    "Domain", "DomainKind", "BasisKind", "GalerkinBasis", "interval", "square", "torus2d",
    "dirichlet_sine", "tensor_sine_2d", "divfree_fourier_2d", "make_basis", "h_inner",
    "h_norm", "h_inner_quadrature", "v_norm", "v_norm_gradient", "v_norm_and_gradient", "intersection_norm",
    "project_initial", "bochner_norms", "norm_equivalence", "export_basis_csv",
    "lebesgue_norm", "conjugate", "check_exponent", "sample_field", "composite_gauss_legendre",
]
