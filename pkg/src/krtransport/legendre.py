"""Orthonormal Legendre basis for L^2([-1,1], dx/2) and tensorized expansions.

The basis is fixed once as L_n = sqrt(2n+1) P_n with P_n the classical
Legendre polynomial, so that Parseval identities hold at the coefficient
level.  Multi-indices are plain tuples of non-negative integers; trailing
zeros are significant (the last slot plays a special role downstream).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CapabilityError, DomainError
from .quadrature import MonteCarloScheme, _mc_block_points, MC_BLOCK, anisotropic_tensor, gauss_legendre

MAX_DEGREE = 200

MultiIndex = tuple[int, ...]


def check_multi_index(nu) -> MultiIndex:
    nu = tuple(int(v) for v in nu)
    if len(nu) < 1 or any(v < 0 for v in nu):
        raise DomainError(f"invalid multi-index {nu}")
    return nu


def legendre_p_basis(nmax: int, x: np.ndarray) -> np.ndarray:
    """P_0..P_nmax (unnormalized) at x; shape (nmax+1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = x
    for m in range(1, nmax):
        out[m + 1] = ((2 * m + 1) * x * out[m] - m * out[m - 1]) / (m + 1)
    return out


@lru_cache(maxsize=None)
def _norms(nmax: int) -> np.ndarray:
    return np.sqrt(2.0 * np.arange(nmax + 1) + 1.0)


def legendre_basis(nmax: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal L_0..L_nmax at x; shape (nmax+1,) + x.shape."""
    p = legendre_p_basis(nmax, x)
    return p * _norms(nmax).reshape((nmax + 1,) + (1,) * (p.ndim - 1))


def legendre_eval(n: int, x) -> float | np.ndarray:
    """L_n(x) = sqrt(2n+1) P_n(x) via the three-term recurrence."""
    if not 0 <= n <= MAX_DEGREE:
        raise CapabilityError(f"degree {n} outside [0, {MAX_DEGREE}]")
    arr = np.asarray(x, dtype=float)
    if np.any(np.abs(arr) > 1.0 + 1e-14):
        raise DomainError("point outside [-1,1]")
    vals = legendre_basis(n, arr)[n]
    return float(vals) if np.isscalar(x) or arr.ndim == 0 else vals


def antiderivative_matrix(ncoef: int) -> np.ndarray:
    """Matrix A with: integral_{-1}^t sum_m c_m L_m dmu = sum_q (A c)_q P_q(t).

    Uses d/dt [P_{m+1} - P_{m-1}] = (2m+1) P_m; the result vanishes at t=-1.
    Shape (ncoef+1, ncoef).
    """
    A = np.zeros((ncoef + 1, ncoef))
    A[0, 0] = 0.5
    A[1, 0] = 0.5
    for m in range(1, ncoef):
        cm = 0.5 / np.sqrt(2.0 * m + 1.0)
        A[m + 1, m] += cm
        A[m - 1, m] -= cm
    return A


@dataclass(frozen=True)
class LegendreExpansion:
    """Finite expansion sum_nu c_nu prod_j L_{nu_j}(y_j) over U_k."""

    k: int
    coeffs: dict[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self):
        for nu in self.coeffs:
            if len(nu) != self.k:
                raise DomainError(f"index {nu} has length != k={self.k}")

    def __call__(self, y) -> float:
        return float(self.eval_batch(np.asarray(y, dtype=float)[None, :])[0])

    def eval_batch(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.k:
            raise DomainError(f"points must have shape (N, {self.k})")
        if not self.coeffs:
            return np.zeros(pts.shape[0])
        idx = np.array(sorted(self.coeffs), dtype=int)
        c = np.array([self.coeffs[tuple(nu)] for nu in idx])
        out = np.full((pts.shape[0], idx.shape[0]), 1.0)
        for j in range(self.k):
            deg = int(idx[:, j].max())
            B = legendre_basis(deg, pts[:, j])  # (deg+1, N)
            out *= B[idx[:, j], :].T
        return out @ c

    def l2_norm(self) -> float:
        return float(np.sqrt(sum(v * v for v in self.coeffs.values())))

    def max_degree(self, j: int) -> int:
        """Largest exponent appearing in coordinate j (0-based)."""
        return max((nu[j] for nu in self.coeffs), default=0)

    def to_lines(self) -> list[str]:
        return [
            " ".join(str(v) for v in nu) + "  " + format(c, ".17g")
            for nu, c in sorted(self.coeffs.items())
        ]

    @classmethod
    def from_lines(cls, k: int, lines) -> "LegendreExpansion":
        coeffs = {}
        for line in lines:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != k + 1:
                raise DomainError(f"expansion line {line!r} does not match k={k}")
            coeffs[tuple(int(p) for p in parts[:-1])] = float(parts[-1])
        return cls(k=k, coeffs=coeffs)


def project(target, indices, *, margin: int = 10, scheme=None, jobs: int = 1) -> LegendreExpansion:
    """Project ``target`` onto span{L_nu : nu in indices} by quadrature.

    The default rule is an anisotropic tensor Gauss grid with
    max-degree-per-coordinate + ``margin`` nodes, which makes the inner
    products exact for polynomial targets up to the margin.  ``target`` maps
    (N, k) arrays to (N,) arrays.
    """
    indices = [check_multi_index(nu) for nu in indices]
    if not indices:
        raise DomainError("empty index set")
    k = len(indices[0])
    if any(len(nu) != k for nu in indices):
        raise DomainError("indices of mixed length")
    idx = np.array(indices, dtype=int)

    if isinstance(scheme, MonteCarloScheme):
        coeffs = {}
        n = scheme.n_samples
        acc = np.zeros(len(indices))
        for b in range((n + MC_BLOCK - 1) // MC_BLOCK):
            size = min(MC_BLOCK, n - b * MC_BLOCK)
            pts = _mc_block_points(scheme.seed, b, size, k)
            vals = np.asarray(target(pts))
            basis = np.full((size, len(indices)), 1.0)
            for j in range(k):
                B = legendre_basis(int(idx[:, j].max()), pts[:, j])
                basis *= B[idx[:, j], :].T
            acc += basis.T @ vals
        acc /= n
        for i, nu in enumerate(indices):
            coeffs[nu] = float(acc[i])
        return LegendreExpansion(k=k, coeffs=coeffs)

    counts = [int(idx[:, j].max()) + margin for j in range(k)]
    pts, _ = anisotropic_tensor(counts)
    vals = np.asarray(target(pts))
    return LegendreExpansion(k=k, coeffs=project_on_grid(vals, counts, indices))


def project_on_grid(values: np.ndarray, counts: list[int], indices) -> dict[MultiIndex, float]:
    """Inner products of grid-sampled values with L_nu on the tensor Gauss grid.

    ``values`` holds the target at the ``anisotropic_tensor(counts)`` points in
    grid (row-major) order.
    """
    indices = [check_multi_index(nu) for nu in indices]
    k = len(counts)
    idx = np.array(indices, dtype=int)
    wts = 1.0
    for j in range(k):
        w = gauss_legendre(counts[j]).weights
        shape = [1] * k
        shape[j] = counts[j]
        wts = wts * w.reshape(shape)
    wf = wts * np.asarray(values).reshape(counts)
    basis_per_dim = [legendre_basis(int(idx[:, j].max()), gauss_legendre(counts[j]).nodes)
                     for j in range(k)]
    coeffs = {}
    for nu in indices:
        acc = wf
        for j, m in enumerate(nu):
            acc = np.tensordot(basis_per_dim[j][m], acc, axes=([0], [0]))
        coeffs[nu] = float(acc)
    return coeffs


class SquaredSliceMarginal:
    """Exact univariate Legendre algebra for (q(y_prefix, t))^2.

    Given an expansion q over U_k (typically p_k + 1), exposes for each fixed
    prefix the coefficients of t -> q(prefix, t) (degree D) and of its square
    (degree 2D), linearized by an exact-degree Gauss rule with 2D+1 nodes.
    """

    def __init__(self, q: LegendreExpansion):
        self.k = q.k
        self.expansion = q
        items = sorted(q.coeffs.items())
        self._idx = np.array([nu for nu, _ in items], dtype=int).reshape(len(items), q.k)
        self._c = np.array([c for _, c in items])
        self.degree = int(self._idx[:, -1].max()) if items else 0
        rule = gauss_legendre(2 * self.degree + 1)
        self._rule = rule
        self._slice_basis = legendre_basis(self.degree, rule.nodes)      # (D+1, nq)
        sq_basis = legendre_basis(2 * self.degree, rule.nodes)           # (2D+1, nq)
        self._proj = sq_basis * rule.weights                             # project with mu weights

    def slice_coeffs(self, prefixes: np.ndarray) -> np.ndarray:
        """Legendre-in-t coefficients of q(prefix, .); shape (N, D+1)."""
        prefixes = np.asarray(prefixes, dtype=float)
        if prefixes.ndim != 2 or prefixes.shape[1] != self.k - 1:
            raise DomainError(f"prefixes must have shape (N, {self.k - 1})")
        n = prefixes.shape[0]
        out = np.zeros((n, self.degree + 1))
        if self._c.size == 0:
            return out
        prod = np.full((n, self._c.size), 1.0)
        for j in range(self.k - 1):
            deg = int(self._idx[:, j].max())
            B = legendre_basis(deg, prefixes[:, j])
            prod *= B[self._idx[:, j], :].T
        last = self._idx[:, -1]
        for m in range(self.degree + 1):
            sel = last == m
            if np.any(sel):
                out[:, m] = prod[:, sel] @ self._c[sel]
        return out

    def squared_coeffs(self, prefixes: np.ndarray) -> np.ndarray:
        """Legendre-in-t coefficients of q(prefix, .)^2; shape (N, 2D+1)."""
        a = self.slice_coeffs(prefixes)
        vals = a @ self._slice_basis          # (N, nq) slice values at rule nodes
        return (vals * vals) @ self._proj.T   # exact: integrand degree 4D < 2(2D+1)

    def averaged_squared_coeffs(self) -> np.ndarray:
        """Coefficients of integral over prefixes of q(., t)^2 d mu(prefix)."""
        if self._c.size == 0:
            return np.zeros(2 * self.degree + 1)
        groups: dict[MultiIndex, np.ndarray] = {}
        for row, c in zip(self._idx, self._c):
            key = tuple(row[:-1])
            vec = groups.setdefault(key, np.zeros(self.degree + 1))
            vec[row[-1]] += c
        vals_sq = np.zeros(self._rule.n)
        for vec in groups.values():
            v = vec @ self._slice_basis
            vals_sq += v * v
        return vals_sq @ self._proj.T

    def __call__(self, prefix, t) -> float:
        """(q(prefix, t))^2 evaluated through the squared-slice coefficients."""
        g = self.squared_coeffs(np.asarray(prefix, dtype=float)[None, :])
        basis = legendre_basis(2 * self.degree, np.asarray(t, dtype=float))
        return float(g[0] @ basis)


def squared_slice_marginal(p_plus_one: LegendreExpansion) -> SquaredSliceMarginal:
    return SquaredSliceMarginal(p_plus_one)
