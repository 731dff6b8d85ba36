"""Integration with respect to the uniform probability measure on [-1,1]^k.

Univariate Gauss-Legendre rules are rescaled so the weights sum to one
(the reference measure is dx/2 per coordinate).  Tensor products cover
dimensions up to ``K_TENSOR_MAX``; beyond that a seeded, block-wise Monte
Carlo estimator is used.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapabilityError

MAX_NODES = 256
K_TENSOR_MAX = 6
MC_BLOCK = 1 << 16


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes in (-1,1) and positive weights summing to 1."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n(self) -> int:
        return self.nodes.size

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ values)


@dataclass(frozen=True)
class TensorScheme:
    """Full tensor Gauss-Legendre rule with ``n`` nodes per coordinate."""

    n: int


@dataclass(frozen=True)
class MonteCarloScheme:
    """Uniform Monte Carlo with counter-derived per-block seeding."""

    seed: int
    n_samples: int


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadratureRule:
    """n-node Gauss-Legendre rule for the probability measure dx/2 on [-1,1]."""
    if not 1 <= n <= MAX_NODES:
        raise CapabilityError(f"node count {n} outside [1, {MAX_NODES}]")
    x, w = np.polynomial.legendre.leggauss(n)
    # enforce the symmetry the eigen solve only gives approximately
    x = 0.5 * (x - x[::-1])
    w = 0.25 * (w + w[::-1])
    w /= w.sum()
    if not np.all(np.isfinite(x)) or np.any(w <= 0):
        raise CapabilityError(f"Gauss-Legendre construction failed for n={n}")
    return QuadratureRule(nodes=x, weights=w)


def tensor_points(k: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """All n^k tensor nodes (rows) and their product weights."""
    rule = gauss_legendre(n)
    return _tensor_points_fast([rule.nodes] * k, [rule.weights] * k)


def _tensor_points_fast(nodes_per_dim: list[np.ndarray],
                        weights_per_dim: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    grids = np.meshgrid(*nodes_per_dim, indexing="ij")
    pts = np.column_stack([g.reshape(-1) for g in grids])
    wgrids = np.meshgrid(*weights_per_dim, indexing="ij")
    wts = np.ones(pts.shape[0])
    for g in wgrids:
        wts *= g.reshape(-1)
    return pts, wts


def anisotropic_tensor(node_counts: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Tensor grid with a per-coordinate node count."""
    rules = [gauss_legendre(n) for n in node_counts]
    return _tensor_points_fast([r.nodes for r in rules], [r.weights for r in rules])


def _mc_block_points(seed: int, block: int, size: int, k: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(block,))
    rng = np.random.Generator(np.random.Philox(ss))
    return rng.uniform(-1.0, 1.0, size=(size, k))


def integrate(f, k: int, scheme, jobs: int = 1) -> float:
    """Integral of ``f`` over [-1,1]^k against the uniform probability measure.

    ``f`` must accept an (N, k) array and return an (N,) array.  The tensor
    scheme is deterministic; the Monte Carlo scheme is reproducible given its
    seed regardless of ``jobs``.
    """
    if k < 1:
        raise CapabilityError("dimension must be >= 1")
    if isinstance(scheme, TensorScheme):
        if k > K_TENSOR_MAX:
            raise CapabilityError(
                f"tensor quadrature capped at k={K_TENSOR_MAX}; got k={k}"
            )
        rule = gauss_legendre(scheme.n)
        if k == 1:
            return float(rule.weights @ np.asarray(f(rule.nodes[:, None])))
        inner_pts, inner_wts = _tensor_points_fast(
            [rule.nodes] * (k - 1), [rule.weights] * (k - 1)
        )

        def slab(i):
            pts = np.empty((inner_pts.shape[0], k))
            pts[:, 0] = rule.nodes[i]
            pts[:, 1:] = inner_pts
            return rule.weights[i] * float(inner_wts @ np.asarray(f(pts)))

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as ex:
                return float(sum(ex.map(slab, range(rule.n))))
        return float(sum(slab(i) for i in range(rule.n)))

    if isinstance(scheme, MonteCarloScheme):
        n = scheme.n_samples
        blocks = [(b, min(MC_BLOCK, n - b * MC_BLOCK))
                  for b in range((n + MC_BLOCK - 1) // MC_BLOCK)]

        def block_sum(args):
            b, size = args
            pts = _mc_block_points(scheme.seed, b, size, k)
            return float(np.sum(np.asarray(f(pts))))

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as ex:
                total = sum(ex.map(block_sum, blocks))
        else:
            total = sum(block_sum(a) for a in blocks)
        return float(total / n)

    raise CapabilityError(f"unknown integration scheme {scheme!r}")
