"""Sparse monotone rational transport components and their composition.

Component k stores a polynomial q = p_k + 1 over U_k.  The slice map is

    t -> -1 + 2 * int_{-1}^{t} q(prefix, s)^2 dmu(s) / int_{-1}^{1} q(prefix, s)^2 dmu(s),

a strictly increasing bijection of [-1,1] whenever q is not identically zero
on a subinterval.  Partial integrals are evaluated exactly: the squared slice
is a polynomial whose Legendre coefficients come from an exact-degree Gauss
linearization, and the numerator uses the same rule affinely rescaled to
[-1, t].  The printed normalization that also averages the prefix out of both
integrals is available as mode="averaged"; the default "slice" mode keeps the
prefix dependence.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import DomainError, ModelError
from .legendre import (
    LegendreExpansion,
    SquaredSliceMarginal,
    antiderivative_matrix,
    legendre_basis,
    legendre_p_basis,
    project_on_grid,
)
from .models import DensityModel
from .oracle import ExactTransport
from .quadrature import anisotropic_tensor, gauss_legendre
from .rootfind import solve_increasing

POSITIVITY_GUARD = 0.05
EVAL_CHUNK = 1 << 16


class RationalComponent:
    """Monotone rational slice map for one coordinate.

    Immutable after construction; ``p_plus_one is None`` encodes the identity
    component (empty ansatz or guard fallback).
    """

    def __init__(self, k: int, p_plus_one: LegendreExpansion | None,
                 mode: str = "slice"):
        if mode not in ("slice", "averaged"):
            raise DomainError(f"unknown normalization mode {mode!r}")
        self.k = k
        self.mode = mode
        self.p_plus_one = p_plus_one
        if p_plus_one is None:
            return
        if p_plus_one.k != k:
            raise DomainError("expansion dimension disagrees with component index")
        self._sq = SquaredSliceMarginal(p_plus_one)
        deg2 = 2 * self._sq.degree
        self._rule = gauss_legendre(deg2 + 1)
        self._anti = antiderivative_matrix(deg2 + 1)
        self._avg = self._sq.averaged_squared_coeffs() if mode == "averaged" else None

    @property
    def identity(self) -> bool:
        return self.p_plus_one is None

    # -- internals -------------------------------------------------------------

    def _squared_coeffs(self, prefixes: np.ndarray) -> np.ndarray:
        if self.mode == "averaged":
            return np.tile(self._avg, (prefixes.shape[0], 1))
        return self._sq.squared_coeffs(prefixes)

    def _partial_integral(self, g: np.ndarray, t: np.ndarray) -> np.ndarray:
        """int_{-1}^{t} sum_m g_m L_m dmu via the exact-degree rule rescaled to [-1,t]."""
        half = 0.5 * (t + 1.0)
        nodes = half[:, None] * (self._rule.nodes + 1.0)[None, :] - 1.0
        basis = legendre_basis(g.shape[1] - 1, nodes)       # (2D+1, N, nq)
        vals = np.einsum("nm,mnq->nq", g, basis)
        return half * (vals @ self._rule.weights)

    def _denominator(self, g: np.ndarray) -> np.ndarray:
        denom = g[:, 0]
        if np.any(denom <= 0.0):
            raise ModelError("squared slice integrates to zero: invalid component")
        return denom

    # -- evaluation --------------------------------------------------------------

    def eval_batch(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2 or Y.shape[1] != self.k:
            raise DomainError(f"points must have shape (N, {self.k})")
        if self.identity:
            return Y[:, -1].copy()
        out = np.empty(Y.shape[0])
        for a in range(0, Y.shape[0], EVAL_CHUNK):
            b = min(Y.shape[0], a + EVAL_CHUNK)
            g = self._squared_coeffs(Y[a:b, :-1])
            t = Y[a:b, -1]
            num = self._partial_integral(g, t)
            res = -1.0 + 2.0 * num / self._denominator(g)
            res[t == 1.0] = 1.0
            res[t == -1.0] = -1.0
            out[a:b] = res
        return np.clip(out, -1.0, 1.0)

    def __call__(self, y) -> float:
        return float(self.eval_batch(np.asarray(y, dtype=float)[None, :])[0])

    def derivative_batch(self, Y: np.ndarray) -> np.ndarray:
        """d/dt of the slice map: q(prefix, t)^2 / int q(prefix, .)^2 dmu."""
        Y = np.asarray(Y, dtype=float)
        if self.identity:
            return np.ones(Y.shape[0])
        out = np.empty(Y.shape[0])
        for a in range(0, Y.shape[0], EVAL_CHUNK):
            b = min(Y.shape[0], a + EVAL_CHUNK)
            g = self._squared_coeffs(Y[a:b, :-1])
            denom = self._denominator(g)
            if self.mode == "averaged":
                basis = legendre_basis(g.shape[1] - 1, Y[a:b, -1])
                sq_vals = np.einsum("nm,mn->n", g, basis)
            else:
                a_coef = self._sq.slice_coeffs(Y[a:b, :-1])
                basis = legendre_basis(a_coef.shape[1] - 1, Y[a:b, -1])
                s = np.einsum("nm,mn->n", a_coef, basis)
                sq_vals = s * s
            out[a:b] = sq_vals / denom
        return out

    def derivative(self, y) -> float:
        return float(self.derivative_batch(np.asarray(y, dtype=float)[None, :])[0])

    # -- inversion ---------------------------------------------------------------

    def solve_batch(self, prefixes: np.ndarray, x: np.ndarray, *, tol: float = 1e-12,
                    max_iter: int = 200) -> np.ndarray:
        """Solve T_k(prefix, t) = x for t (monotone in t)."""
        x = np.asarray(x, dtype=float)
        if self.identity:
            return x.copy()
        out = np.empty(x.size)
        for a in range(0, x.size, EVAL_CHUNK):
            b = min(x.size, a + EVAL_CHUNK)
            g = self._squared_coeffs(np.asarray(prefixes, dtype=float)[a:b])
            denom = self._denominator(g)
            anti = g @ self._anti.T
            targets = 0.5 * (x[a:b] + 1.0) * denom

            def f_df(t, anti=anti, g=g):
                p = legendre_p_basis(anti.shape[1] - 1, t)
                vals = np.einsum("nm,mn->n", anti, p)
                basis = legendre_basis(g.shape[1] - 1, t)
                deriv = 0.5 * np.einsum("nm,mn->n", g, basis)
                return vals, deriv

            out[a:b] = solve_increasing(
                f_df, targets, -1.0, 1.0, x0=x[a:b], tol=tol, max_iter=max_iter,
                resid_scale=denom,
            )
        return out


def build_component(oracle: ExactTransport, k: int, indices, *, margin: int = 10,
                    mode: str = "slice", guard: float = POSITIVITY_GUARD,
                    guard_points: int = 512, guard_seed: int = 2021) -> RationalComponent:
    """Project sqrt(d_k T_k) - 1 onto the ansatz set and wrap it monotonically.

    Components beyond the oracle dimension are exactly the identity for
    truncated models, so they are returned without projection.  If the probe
    minimum of p_k + 1 falls below ``guard`` the component degrades to the
    identity (with a conditioning warning): bijectivity takes priority over
    fidelity in that regime.
    """
    indices = list(indices)
    if not indices or k > oracle.d:
        return RationalComponent(k, None, mode=mode)
    counts = [max(int(nu[j]) for nu in indices) + margin for j in range(k)]
    pts, _ = anisotropic_tensor(counts)
    _, dT = oracle.transport_batch(pts, last_derivative=True)
    values = np.sqrt(dT) - 1.0
    coeffs = project_on_grid(values, counts, indices)
    zero = (0,) * k
    coeffs[zero] = coeffs.get(zero, 0.0) + 1.0
    q = LegendreExpansion(k=k, coeffs=coeffs)

    from scipy.stats import qmc

    probe = qmc.Sobol(k, scramble=True, seed=guard_seed).random(guard_points) * 2.0 - 1.0
    if float(np.min(q.eval_batch(probe))) <= guard:
        warnings.warn(
            f"component {k}: p+1 dips below {guard} on the probe grid; "
            "falling back to the identity slice map", RuntimeWarning,
        )
        return RationalComponent(k, None, mode=mode)
    return RationalComponent(k, q, mode=mode)


class ApproxTransport:
    """Triangular family of rational components with an identity tail."""

    def __init__(self, components: list[RationalComponent], *, eps: float | None = None,
                 alpha: float | None = None, d: int | None = None, mode: str = "slice"):
        for i, c in enumerate(components, start=1):
            if c.k != i:
                raise DomainError("components must be consecutive in k starting at 1")
        self.components = list(components)
        self.eps = eps
        self.alpha = alpha
        self.mode = mode
        self.d = d if d is not None else len(self.components)

    @property
    def k_max(self) -> int:
        """Largest k with a non-identity component."""
        return max((c.k for c in self.components if not c.identity), default=0)

    def component(self, k: int) -> RationalComponent:
        if k <= len(self.components):
            return self.components[k - 1]
        return RationalComponent(k, None)

    def push(self, Y: np.ndarray) -> np.ndarray:
        """Componentwise application; identity beyond the stored components."""
        Y = np.asarray(Y, dtype=float)
        single = Y.ndim == 1
        Y = np.atleast_2d(Y)
        X = Y.copy()
        for k in range(1, Y.shape[1] + 1):
            comp = self.component(k)
            if not comp.identity:
                X[:, k - 1] = comp.eval_batch(Y[:, :k])
        return X[0] if single else X

    def pull(self, X: np.ndarray, *, tol: float = 1e-12) -> np.ndarray:
        """Inverse map: solve x_k = T_k(y_[k-1], y_k) coordinate by coordinate."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        Y = X.copy()
        for k in range(1, X.shape[1] + 1):
            comp = self.component(k)
            if not comp.identity:
                Y[:, k - 1] = comp.solve_batch(Y[:, : k - 1], X[:, k - 1], tol=tol)
        return Y[0] if single else Y

    def pushforward_density(self, rho: DensityModel, X: np.ndarray) -> np.ndarray:
        """Density of the image measure at X: f_rho(S(x)) / prod_k dT_k(S_[k](x))."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != rho.dim:
            raise DomainError(f"points must have {rho.dim} coordinates")
        Y = self.pull(X)
        dens = rho.evaluate_batch(Y)
        for k in range(1, X.shape[1] + 1):
            comp = self.component(k)
            if not comp.identity:
                dens /= comp.derivative_batch(Y[:, :k])
        return dens

    # -- serialization -----------------------------------------------------------

    def to_text(self) -> str:
        lines = [
            "krtransport-transport v1",
            f"eps {'' if self.eps is None else format(self.eps, '.17g')}".rstrip(),
            f"alpha {'' if self.alpha is None else format(self.alpha, '.17g')}".rstrip(),
            f"d {self.d}",
            f"mode {self.mode}",
            f"components {len(self.components)}",
        ]
        for c in self.components:
            if c.identity:
                lines.append(f"component {c.k} identity")
            else:
                body = c.p_plus_one.to_lines()
                lines.append(f"component {c.k} terms {len(body)}")
                lines.extend(body)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ApproxTransport":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("krtransport-transport"):
            raise DomainError("not a serialized transport")
        header: dict[str, str] = {}
        i = 1
        while i < len(lines) and not lines[i].startswith("component "):
            key, _, val = lines[i].partition(" ")
            header[key] = val.strip()
            i += 1
        mode = header.get("mode", "slice")
        comps: list[RationalComponent] = []
        while i < len(lines):
            parts = lines[i].split()
            k = int(parts[1])
            if parts[2] == "identity":
                comps.append(RationalComponent(k, None, mode=mode))
                i += 1
            else:
                nterms = int(parts[3])
                chunk = lines[i + 1: i + 1 + nterms]
                comps.append(RationalComponent(
                    k, LegendreExpansion.from_lines(k, chunk), mode=mode))
                i += 1 + nterms
        eps = float(header["eps"]) if header.get("eps") else None
        alpha = float(header["alpha"]) if header.get("alpha") else None
        d = int(header["d"]) if header.get("d") else None
        return cls(comps, eps=eps, alpha=alpha, d=d, mode=mode)


def build_transport(oracle: ExactTransport, family, *, margin: int = 10,
                    mode: str = "slice", alpha: float | None = None,
                    jobs: int = 1) -> ApproxTransport:
    """Assemble all components for an index-set family (parallel over k)."""
    ks = list(range(1, max(family.k_max, 1) + 1))

    def make(k):
        return build_component(oracle, k, family.set_for(k), margin=margin, mode=mode)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            comps = list(ex.map(make, ks))
    else:
        comps = [make(k) for k in ks]
    return ApproxTransport(comps, eps=family.eps, alpha=alpha, d=oracle.d, mode=mode)
