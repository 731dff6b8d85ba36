"""Batched safeguarded Newton-bisection for monotone scalar equations.

Solves f(x) = target per lane for strictly increasing f on a bracket.  Newton
steps are taken whenever they stay inside the current bracket, otherwise the
lane bisects; every evaluation tightens the bracket, so termination is
guaranteed and convergence is quadratic near the root.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError


def solve_increasing(f_df, targets, lo, hi, *, x0=None, tol: float = 1e-12,
                     max_iter: int = 200, resid_scale=None) -> np.ndarray:
    """Vectorized solve of f(x) = target on [lo, hi].

    ``f_df(x)`` returns (values, derivatives) for a full lane vector x.
    ``resid_scale`` (per lane or scalar) declares the size of f at which
    residuals are considered exactly converged; defaults to max|target|.
    """
    targets = np.asarray(targets, dtype=float)
    n = targets.size
    lo = np.full(n, lo, dtype=float) if np.ndim(lo) == 0 else np.array(lo, dtype=float)
    hi = np.full(n, hi, dtype=float) if np.ndim(hi) == 0 else np.array(hi, dtype=float)
    if resid_scale is None:
        resid_scale = max(1.0, float(np.max(np.abs(targets), initial=1.0)))
    ftiny = 4.0 * np.finfo(float).eps * np.asarray(resid_scale, dtype=float)

    x = 0.5 * (lo + hi) if x0 is None else np.array(x0, dtype=float)
    np.clip(x, lo, hi, out=x)
    done = np.zeros(n, dtype=bool)

    for _ in range(max_iter):
        vals, derivs = f_df(x)
        resid = vals - targets
        exact = np.abs(resid) <= ftiny
        neg = resid < 0
        lo = np.where(~done & neg & ~exact, x, lo)
        hi = np.where(~done & ~neg & ~exact, x, hi)
        done |= exact | (hi - lo <= tol)
        if np.all(done):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - resid / derivs
        ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
        x = np.where(done, x, np.where(ok, newton, 0.5 * (lo + hi)))
    else:
        bad = ~done
        raise ConvergenceError(
            f"{int(bad.sum())} lane(s) failed after {max_iter} iterations; "
            f"worst bracket [{lo[bad].min():.17g}, {hi[bad].max():.17g}]"
        )
    return x
