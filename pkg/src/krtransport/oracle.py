"""Exact truncated-dimension Knothe-Rosenblatt transport.

Each component T_k inverts the target's conditional CDF at the reference's
conditional CDF value.  Conditional slices t -> marginal_k(prefix, t) are
represented spectrally: the slice is sampled at a fixed Gauss grid, projected
onto the Legendre basis, and integrated in closed form.  That makes the CDF
and its derivative cheap per root-finding step and exactly normalized at the
endpoints.  Marginal caches (tail rules or family-exact tables) are frozen at
construction, so a built transport is immutable and safe to share across
threads.
"""

from __future__ import annotations

import numpy as np

from .errors import CapabilityError, DomainError, ModelError
from .legendre import antiderivative_matrix, legendre_basis, legendre_p_basis
from .models import DensityModel
from .quadrature import K_TENSOR_MAX, gauss_legendre, tensor_points
from .rootfind import solve_increasing

MAX_ORACLE_DIM = 12
BATCH_CHUNK = 1 << 16


class MarginalEngine:
    """Marginal and conditional-slice evaluators for one density model.

    Models that expose ``exact_marginal`` (all built-in families do) are
    evaluated through it; the generic path integrates the tail with a cached
    tensor Gauss rule, or frozen Monte Carlo points when the tail dimension
    exceeds the tensor cap.
    """

    def __init__(self, model: DensityModel, *, tail_nodes: int = 16,
                 k_tensor_max: int = K_TENSOR_MAX, mc_samples: int = 100_000,
                 mc_seed: int = 77, cdf_nodes: int = 64):
        self.model = model
        self.cdf_nodes = cdf_nodes
        self.tail_nodes = tail_nodes
        self.k_tensor_max = k_tensor_max
        self.mc_samples = mc_samples
        self.mc_seed = mc_seed
        self.rule = gauss_legendre(cdf_nodes)
        basis = legendre_basis(cdf_nodes - 1, self.rule.nodes)
        self._proj = basis * self.rule.weights            # (ncdf, ncdf)
        self._anti = antiderivative_matrix(cdf_nodes)     # (ncdf+1, ncdf)
        self._tails: dict[int, tuple[np.ndarray | None, np.ndarray | None]] = {}
        if model.exact_marginal is None:
            self.prepare()

    def prepare(self) -> None:
        """Freeze the tail rules for every marginal order (single-threaded)."""
        for k in range(1, self.model.dim + 1):
            self._tail(k)

    def _tail(self, k: int):
        # tensor tails only in the tensor regime (model dim within the cap);
        # in higher dimension every marginal uses the frozen MC rule
        if k not in self._tails:
            t = self.model.dim - k
            if t == 0:
                self._tails[k] = (None, None)
            elif self.model.dim <= self.k_tensor_max:
                self._tails[k] = tensor_points(t, self.tail_nodes)
            else:
                rng = np.random.Generator(
                    np.random.Philox(np.random.SeedSequence(self.mc_seed)))
                pts = rng.uniform(-1.0, 1.0, size=(self.mc_samples, t))
                self._tails[k] = (pts, np.full(self.mc_samples, 1.0 / self.mc_samples))
        return self._tails[k]

    # -- marginals ------------------------------------------------------------

    def marginal(self, k: int, pts: np.ndarray, method: str = "auto") -> np.ndarray:
        """hat f_k at each row of an (N, k) array: tail coordinates integrated out."""
        pts = np.asarray(pts, dtype=float)
        if k == 0:
            return np.ones(pts.shape[0])
        if not 1 <= k <= self.model.dim:
            raise DomainError(f"marginal order k={k} outside 1..{self.model.dim}")
        if pts.ndim != 2 or pts.shape[1] != k:
            raise DomainError(f"points must have shape (N, {k})")
        if k == self.model.dim:
            return self.model.evaluate_batch(pts)
        if method == "auto" and self.model.exact_marginal is not None:
            vals = np.asarray(self.model.exact_marginal(k, pts), dtype=float)
            if not np.all(np.isfinite(vals)):
                raise ModelError("exact marginal produced a non-finite value")
            return vals
        tail_pts, tail_wts = self._tail(k)
        n, p = pts.shape[0], tail_pts.shape[0]
        out = np.empty(n)
        chunk = max(1, int(4_000_000 // p))
        for a in range(0, n, chunk):
            b = min(n, a + chunk)
            block = np.empty(((b - a) * p, self.model.dim))
            block[:, :k] = np.repeat(pts[a:b], p, axis=0)
            block[:, k:] = np.tile(tail_pts, (b - a, 1))
            vals = self.model.evaluate_batch(block).reshape(b - a, p)
            out[a:b] = vals @ tail_wts
        return out

    # -- conditional slices -----------------------------------------------------

    def slice_coeffs(self, k: int, prefixes: np.ndarray) -> np.ndarray:
        """Legendre coefficients of t -> hat f_k(prefix, t); shape (m, ncdf).

        Coefficient 0 equals hat f_{k-1}(prefix) up to quadrature, so the
        conditional CDF normalizes to [0, 1] exactly.
        """
        prefixes = np.asarray(prefixes, dtype=float)
        m = prefixes.shape[0]
        pts = np.empty((m * self.cdf_nodes, k))
        if k > 1:
            pts[:, : k - 1] = np.repeat(prefixes, self.cdf_nodes, axis=0)
        pts[:, k - 1] = np.tile(self.rule.nodes, m)
        vals = self.marginal(k, pts).reshape(m, self.cdf_nodes)
        if np.min(vals) <= 0.0:
            raise ModelError("non-positive conditional density encountered")
        return vals @ self._proj.T

    def antider(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self._anti.T

    def slice_values(self, coeffs: np.ndarray, t: np.ndarray) -> np.ndarray:
        basis = legendre_basis(self.cdf_nodes - 1, np.asarray(t, dtype=float))
        return np.einsum("nm,mn->n", coeffs, basis)

    def cdf_raw(self, anti_coeffs: np.ndarray, t: np.ndarray) -> np.ndarray:
        basis = legendre_p_basis(self.cdf_nodes, np.asarray(t, dtype=float))
        return np.einsum("nm,mn->n", anti_coeffs, basis)


def _unique_rows(arr: np.ndarray):
    """np.unique(axis=0) wrapper that tolerates zero-width arrays."""
    if arr.shape[1] == 0:
        return arr[:1], np.zeros(1, dtype=int), np.zeros(arr.shape[0], dtype=int)
    uniq, first, inv = np.unique(arr, axis=0, return_index=True, return_inverse=True)
    return uniq, first, np.asarray(inv).reshape(-1)


class ExactTransport:
    """Componentwise conditional-CDF inversion pushing rho forward to pi."""

    def __init__(self, rho: DensityModel, pi: DensityModel, *, tail_nodes: int = 16,
                 cdf_nodes: int = 64, root_tol: float = 1e-12, max_root_iter: int = 200,
                 mc_samples: int = 100_000, mc_seed: int = 77):
        if rho.dim != pi.dim:
            raise DomainError("reference and target must share the truncation dimension")
        if rho.dim > MAX_ORACLE_DIM:
            raise CapabilityError(f"oracle dimension capped at {MAX_ORACLE_DIM}")
        self.d = rho.dim
        self.rho = rho
        self.pi = pi
        self.root_tol = root_tol
        self.max_root_iter = max_root_iter
        kw = dict(tail_nodes=tail_nodes, cdf_nodes=cdf_nodes,
                  mc_samples=mc_samples, mc_seed=mc_seed)
        self._rho_eng = MarginalEngine(rho, **kw)
        self._pi_eng = MarginalEngine(pi, **kw)

    def _engine(self, side: str) -> MarginalEngine:
        if side == "rho":
            return self._rho_eng
        if side == "pi":
            return self._pi_eng
        raise DomainError("side must be 'rho' or 'pi'")

    # -- public marginal / conditional surface ---------------------------------

    def marginal_density(self, side: str, k: int, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(self._engine(side).marginal(k, y[None, :k])[0])

    def conditional_cdf(self, side: str, k: int, prefix, t) -> float | np.ndarray:
        """F_{side;k}(prefix, t), normalized so F(prefix, -1)=0 and F(prefix, 1)=1."""
        eng = self._engine(side)
        prefix = np.asarray(prefix, dtype=float).reshape(1, -1)[:, : k - 1]
        coeffs = eng.slice_coeffs(k, prefix)
        anti = eng.antider(coeffs)
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        raw = eng.cdf_raw(np.repeat(anti, tt.size, axis=0), tt)
        out = np.clip(raw / coeffs[0, 0], 0.0, 1.0)
        return float(out[0]) if np.ndim(t) == 0 else out

    # -- transport proper -------------------------------------------------------

    def transport_batch(self, Y: np.ndarray, *, with_det: bool = False,
                        last_derivative: bool = False):
        """Apply (T_1, ..., T_k) to each row of an (N, k) array.

        Returns X, and optionally the running product of the component
        derivatives (with_det) or the k-th component derivative
        (last_derivative).
        """
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2 or not 1 <= Y.shape[1] <= self.d:
            raise DomainError(f"points must have shape (N, k) with k <= {self.d}")
        if Y.size and np.max(np.abs(Y)) > 1.0 + 1e-12:
            raise DomainError("point outside [-1,1]^k")
        if Y.shape[0] > BATCH_CHUNK:
            parts = [self.transport_batch(Y[a: a + BATCH_CHUNK], with_det=with_det,
                                          last_derivative=last_derivative)
                     for a in range(0, Y.shape[0], BATCH_CHUNK)]
            if not (with_det or last_derivative):
                return np.vstack(parts)
            stacked = [np.vstack([p[0] for p in parts])]
            for i in range(1, len(parts[0])):
                stacked.append(np.concatenate([p[i] for p in parts]))
            return tuple(stacked)
        n, kk = Y.shape
        X = np.empty_like(Y)
        det = np.ones(n) if with_det else None
        dlast = None
        for j in range(1, kk + 1):
            uniq, first, inv = _unique_rows(Y[:, : j - 1])
            cr_u = self._rho_eng.slice_coeffs(j, uniq)
            cr = cr_u[inv]
            n0r = cr[:, 0]
            fr = self._rho_eng.cdf_raw(self._rho_eng.antider(cr), Y[:, j - 1])
            u = np.clip(fr / n0r, 0.0, 1.0)

            cp_u = self._pi_eng.slice_coeffs(j, X[first, : j - 1])
            cp = cp_u[inv]
            n0p = cp[:, 0]
            anti_p = self._pi_eng.antider(cp)

            def f_df(x, anti_p=anti_p, cp=cp):
                return (self._pi_eng.cdf_raw(anti_p, x),
                        0.5 * self._pi_eng.slice_values(cp, x))

            x = solve_increasing(
                f_df, u * n0p, -1.0, 1.0, x0=2.0 * u - 1.0,
                tol=self.root_tol, max_iter=self.max_root_iter, resid_scale=n0p,
            )
            X[:, j - 1] = x
            if with_det or (last_derivative and j == kk):
                dcond_r = self._rho_eng.slice_values(cr, Y[:, j - 1]) / n0r
                dcond_p = self._pi_eng.slice_values(cp, x) / n0p
                dTj = dcond_r / dcond_p
                if with_det:
                    det *= dTj
                if j == kk:
                    dlast = dTj
        results = [X]
        if with_det:
            results.append(det)
        if last_derivative:
            results.append(dlast)
        return results[0] if len(results) == 1 else tuple(results)

    def transport(self, y) -> np.ndarray:
        """T_[k](y_[k]) for a single point."""
        return self.transport_batch(np.asarray(y, dtype=float)[None, :])[0]

    def component(self, k: int, y) -> float:
        """T_k(y_[k])."""
        y = np.asarray(y, dtype=float)
        if y.size < k:
            raise DomainError(f"need at least {k} coordinates")
        return float(self.transport(y[:k])[k - 1])

    def component_derivative(self, k: int, y) -> float:
        y = np.asarray(y, dtype=float)
        _, d = self.transport_batch(y[None, :k], last_derivative=True)
        return float(d[0])

    def pushforward_residual(self, Y) -> np.ndarray:
        """f_pi(T(y)) * prod_j dT_j(y_[j]) - f_rho(y); zero in exact arithmetic."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if Y.shape[1] != self.d:
            raise DomainError(f"points must have {self.d} coordinates")
        X, det = self.transport_batch(Y, with_det=True)
        return self.pi.evaluate_batch(X) * det - self.rho.evaluate_batch(Y)


# -- module-level operations matching the library surface ----------------------

def marginal_density(model: DensityModel, k: int, y, *, tail_nodes: int = 16,
                     mc_samples: int = 100_000, mc_seed: int = 77,
                     method: str = "auto") -> float:
    """hat f_k(y_[k]) with the model's remaining coordinates integrated out.

    ``method="quadrature"`` forces the generic tensor/Monte-Carlo tail rule
    even when the model carries an exact marginal.
    """
    eng = MarginalEngine(model, tail_nodes=tail_nodes, mc_samples=mc_samples,
                         mc_seed=mc_seed)
    y = np.asarray(y, dtype=float)
    return float(eng.marginal(k, y[None, :k], method=method)[0])


def conditional_cdf(model: DensityModel, k: int, prefix, t, *, tail_nodes: int = 16,
                    cdf_nodes: int = 64) -> float | np.ndarray:
    """Conditional CDF of coordinate k given the prefix, in [0, 1]."""
    eng = MarginalEngine(model, tail_nodes=tail_nodes, cdf_nodes=cdf_nodes)
    prefix = np.asarray(prefix, dtype=float).reshape(1, -1)[:, : k - 1]
    coeffs = eng.slice_coeffs(k, prefix)
    anti = eng.antider(coeffs)
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    raw = eng.cdf_raw(np.repeat(anti, tt.size, axis=0), tt)
    out = np.clip(raw / coeffs[0, 0], 0.0, 1.0)
    return float(out[0]) if np.ndim(t) == 0 else out
