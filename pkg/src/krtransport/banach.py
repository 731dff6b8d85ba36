"""Function-space sample generation through a scaled basis expansion.

Transported coefficient vectors y are turned into grid-discretized functions
sum_{j<=s} y_j psi_j.  The default mother family is cos(j pi x) on [0,1],
scaled by the decay sequence b_j, so each basis function has sup norm exactly
b_j and truncation tails telescope through the triangle inequality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, DomainError
from .models import BasisDecay, DensityModel
from .oracle import MAX_ORACLE_DIM, ExactTransport
from .quadrature import MC_BLOCK, _mc_block_points
from .rational import ApproxTransport

GRID_POINTS = 256


@dataclass(frozen=True)
class FunctionBasis:
    grid: np.ndarray     # (G,) points in [0,1]
    values: np.ndarray   # (J, G): psi_j sampled on the grid
    scales: np.ndarray   # (J,) sup scales of the psi_j

    def __post_init__(self):
        for name in ("grid", "values", "scales"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)
        if self.values.shape != (self.scales.size, self.grid.size):
            raise DomainError("basis table shapes disagree")

    @property
    def size(self) -> int:
        return int(self.scales.size)

    @classmethod
    def cosine(cls, decay: BasisDecay, size: int | None = None,
               grid_points: int = GRID_POINTS) -> "FunctionBasis":
        """psi_j(x) = b_j cos(j pi x) on a uniform grid over [0,1]."""
        size = decay.j_max if size is None else size
        if size > decay.j_max:
            raise CapabilityError(f"decay holds {decay.j_max} scales; asked for {size}")
        grid = np.linspace(0.0, 1.0, grid_points)
        j = np.arange(1, size + 1)
        values = decay.b[:size, None] * np.cos(np.pi * j[:, None] * grid[None, :])
        return cls(grid=grid, values=values, scales=decay.b[:size].copy())


def phi_expand(basis: FunctionBasis, y, s: int) -> np.ndarray:
    """sum_{j<=s} y_j psi_j on the grid; batched when y is 2-d."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    if s > y.shape[1]:
        raise CapabilityError(f"truncation s={s} exceeds coefficient length {y.shape[1]}")
    if s > basis.size:
        raise CapabilityError(f"truncation s={s} exceeds stored basis size {basis.size}")
    out = y[:, :s] @ basis.values[:s]
    return out[0] if single else out


def reference_draws(n: int, s: int, seed: int,
                    reference: DensityModel | None = None) -> np.ndarray:
    """n draws from the s-dimensional reference marginal, block-seeded.

    A non-uniform reference is sampled through its own exact conditional-CDF
    transport; coordinates beyond its truncation are uniform.
    """
    draws = np.empty((n, s))
    for b in range((n + MC_BLOCK - 1) // MC_BLOCK):
        size = min(MC_BLOCK, n - b * MC_BLOCK)
        draws[b * MC_BLOCK: b * MC_BLOCK + size] = _mc_block_points(seed, b, size, s)
    if reference is None or reference.family == "uniform":
        return draws
    s_ref = min(s, reference.dim)
    if s_ref > MAX_ORACLE_DIM:
        raise CapabilityError(f"reference sampling capped at {MAX_ORACLE_DIM} dimensions")
    from .models import uniform_model

    sampler = ExactTransport(uniform_model(s_ref), reference.truncate(s_ref))
    draws[:, :s_ref] = sampler.transport_batch(draws[:, :s_ref])
    return draws


def sample_banach(transport: ApproxTransport, basis: FunctionBasis, n: int, s: int,
                  seed: int, reference: DensityModel | None = None):
    """n function samples at truncation s: Phi_s(T~_[s](y_[s])), y ~ reference.

    Returns (samples, latent) with samples of shape (n, G); bit-identical for
    identical seeds.
    """
    if n == 0:
        return np.empty((0, basis.grid.size)), np.empty((0, s))
    latent = reference_draws(n, s, seed, reference)
    pushed = transport.push(latent)
    return phi_expand(basis, pushed, s), latent
