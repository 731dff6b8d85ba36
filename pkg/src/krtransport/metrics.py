"""Error functionals between transports and between their pushforwards.

Sup norms are reported as maxima over deterministic probe sets (scrambled
low-discrepancy points with a fixed seed), which lower-bound the true sup but
suffice for decay studies.  Distances between densities are quadrature
estimates; the product-metric bound sum_k c_k sup_k dominates the Wasserstein
distance of the pushforwards for every order q >= 1.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import DomainError, ModelError
from .models import BasisDecay, DensityModel
from .oracle import ExactTransport
from .quadrature import (
    MC_BLOCK,
    MonteCarloScheme,
    TensorScheme,
    _mc_block_points,
    tensor_points,
)
from .rational import ApproxTransport

PROBE_SEED = 2017


def sobol_probe(k: int, n: int = 1024, seed: int = PROBE_SEED) -> np.ndarray:
    """Deterministic scrambled low-discrepancy probe in (-1,1)^k."""
    m = int(np.ceil(np.log2(max(n, 2))))
    pts = qmc.Sobol(k, scramble=True, seed=seed).random_base2(m)[:n]
    return 2.0 * pts - 1.0


@dataclass(frozen=True)
class ComponentError:
    map_sup: float
    derivative_sup: float


def component_sup_error(oracle: ExactTransport, transport: ApproxTransport, k: int,
                        probe: np.ndarray | None = None) -> ComponentError:
    """Probe maxima of |T_k - T~_k| and |d_k T_k - d_k T~_k| over U_k."""
    if probe is None:
        probe = sobol_probe(k)
    probe = np.asarray(probe, dtype=float)[:, :k]
    _, d_exact = oracle.transport_batch(probe, last_derivative=True)
    t_exact = oracle.transport_batch(probe)[:, k - 1]
    comp = transport.component(k)
    t_approx = comp.eval_batch(probe)
    d_approx = comp.derivative_batch(probe)
    return ComponentError(
        map_sup=float(np.max(np.abs(t_exact - t_approx))),
        derivative_sup=float(np.max(np.abs(d_exact - d_approx))),
    )


@dataclass(frozen=True)
class Distances:
    hellinger: float
    tv: float
    kl: float


def _scheme_points(d: int, scheme):
    if isinstance(scheme, TensorScheme):
        yield tensor_points(d, scheme.n)
        return
    if isinstance(scheme, MonteCarloScheme):
        n = scheme.n_samples
        for b in range((n + MC_BLOCK - 1) // MC_BLOCK):
            size = min(MC_BLOCK, n - b * MC_BLOCK)
            yield _mc_block_points(scheme.seed, b, size, d), np.full(size, 1.0 / n)
        return
    raise DomainError(f"unknown scheme {scheme!r}")


def statistical_distances(pi: DensityModel, q_density, d: int, scheme) -> Distances:
    """Hellinger, total variation, and KL(q || pi) between two densities.

    ``q_density`` maps (N, d) points to density values (e.g. the pushforward
    density of an approximate transport).
    """
    h2 = tv = kl = 0.0
    for pts, wts in _scheme_points(d, scheme):
        fq = np.asarray(q_density(pts))
        fp = pi.evaluate_batch(pts)
        if np.min(fq) <= 0.0 or np.min(fp) <= 0.0:
            raise ModelError("non-positive density value in distance estimate")
        h2 += float(wts @ (np.sqrt(fq) - np.sqrt(fp)) ** 2)
        tv += float(wts @ np.abs(fq - fp))
        kl += float(wts @ (np.log(fq / fp) * fq))
    return Distances(hellinger=float(np.sqrt(0.5 * h2)), tv=0.5 * tv, kl=kl)


@dataclass(frozen=True)
class ProductMetric:
    """d(x, y) = sum_j c_j |x_j - y_j| with summable positive weights."""

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "c", c)
        c.setflags(write=False)
        if np.any(c <= 0):
            raise DomainError("metric weights must be positive")

    @classmethod
    def from_decay(cls, decay: BasisDecay) -> "ProductMetric":
        return cls(c=decay.b.copy())

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x, y = np.atleast_2d(x), np.atleast_2d(y)
        return np.abs(x - y) @ self.c[: x.shape[1]]


def wasserstein_upper_bound(metric: ProductMetric, sup_errors) -> float:
    """sum_k c_k sup|T_k - T~_k|; bounds W_q of the pushforwards for all q >= 1."""
    errs = np.asarray(list(sup_errors), dtype=float)
    if errs.size > metric.c.size:
        raise DomainError("metric holds fewer weights than error terms")
    return float(metric.c[: errs.size] @ errs)


def sorted_sample_w1(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Sorted-sample 1-Wasserstein estimate between equal-size 1d samples.

    Returns the estimate and a Monte Carlo standard error for it.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size != b.size or a.size < 2:
        raise DomainError("need two samples of equal size >= 2")
    diffs = np.abs(a - b)
    return float(diffs.mean()), float(diffs.std(ddof=1) / np.sqrt(diffs.size))


def fit_rate(n_eps, errors) -> float:
    """Least-squares slope of log(error) against log(N_eps)."""
    n = np.asarray(list(n_eps), dtype=float)
    e = np.asarray(list(errors), dtype=float)
    keep = n > 0
    n, e = n[keep], e[keep]
    if n.size < 3 or np.unique(n).size < 2:
        raise DomainError("need at least 3 rows with distinct N_eps > 0")
    if np.any(e <= 0):
        raise DomainError("errors must be positive for a log-log fit")
    return float(np.polyfit(np.log(n), np.log(e), 1)[0])


@dataclass(frozen=True)
class RateRow:
    eps: float
    n_eps: int
    sup_error_sum: float
    hellinger: float
    tv: float
    kl: float
    w_bound: float


CSV_HEADER = ["eps", "n_eps", "sup_error_sum", "hellinger", "tv", "kl", "w_bound"]


@dataclass
class RateReport:
    rows: list[RateRow]
    p: float

    def __post_init__(self):
        eps = [r.eps for r in self.rows]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise DomainError("rows must be sorted by strictly decreasing eps")
        n = [r.n_eps for r in self.rows]
        if any(b < a for a, b in zip(n, n[1:])):
            raise DomainError("N_eps must be non-decreasing as eps shrinks")

    @property
    def theoretical_slope(self) -> float:
        return -(1.0 / self.p - 1.0)

    @property
    def fitted_slope(self) -> float:
        return fit_rate((r.n_eps for r in self.rows), (r.sup_error_sum for r in self.rows))

    def to_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([
                format(r.eps, ".17g"), r.n_eps,
                format(r.sup_error_sum, ".17g"), format(r.hellinger, ".17g"),
                format(r.tv, ".17g"), format(r.kl, ".17g"), format(r.w_bound, ".17g"),
            ])

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, fh, p: float) -> "RateReport":
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise DomainError(f"unexpected CSV header {header}")
        rows = [
            RateRow(eps=float(r[0]), n_eps=int(r[1]), sup_error_sum=float(r[2]),
                    hellinger=float(r[3]), tv=float(r[4]), kl=float(r[5]),
                    w_bound=float(r[6]))
            for r in reader if r
        ]
        return cls(rows=rows, p=p)
