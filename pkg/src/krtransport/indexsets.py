"""Anisotropic importance weights and a-priori sparse multi-index families.

The weight of a monomial exponent tuple nu of length k is

    gamma(rho, nu) = rho_k^{-max(1, nu_k)} * prod_{j<k} rho_j^{-nu_j},

with rho_j = 1 + alpha / b_j > 1.  The family Lambda_{eps,k} collects all nu
with gamma >= eps; it is finite because the flooring of the last exponent
charges at least rho_k^{-1} per dimension.  Enumeration runs in log space by
depth-first search with multiplicative pruning; ties at gamma = eps are
included, with a tiny relative slack so floating-point ties resolve toward
inclusion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, DomainError
from .legendre import MultiIndex, check_multi_index
from .models import BasisDecay

TIE_SLACK = 1e-12


@dataclass(frozen=True)
class WeightSequence:
    """rho_j = 1 + alpha / b_j for j = 1..j_max."""

    rho: np.ndarray
    alpha: float
    decay: BasisDecay

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        object.__setattr__(self, "rho", rho)
        rho.setflags(write=False)
        if np.any(rho <= 1.0):
            raise DomainError("weights rho_j must exceed 1")

    @property
    def j_max(self) -> int:
        return int(self.rho.size)

    @classmethod
    def from_decay(cls, decay: BasisDecay, alpha: float = 1.0) -> "WeightSequence":
        if alpha <= 0:
            raise DomainError("alpha must be positive")
        return cls(rho=1.0 + alpha / decay.b, alpha=alpha, decay=decay)


def gamma(w: WeightSequence, nu) -> float:
    """Importance of the monomial with exponents nu for component k = len(nu)."""
    nu = check_multi_index(nu)
    k = len(nu)
    if k > w.j_max:
        raise CapabilityError(f"index length {k} exceeds j_max={w.j_max}")
    logr = np.log(w.rho[:k])
    log_gamma = -max(1, nu[-1]) * logr[-1] - float(np.dot(nu[:-1], logr[:-1]))
    return float(np.exp(log_gamma))


@dataclass
class IndexSetFamily:
    eps: float
    sets: list[list[MultiIndex]]
    k_max: int
    n_eps: int

    def __iter__(self):
        return iter(self.sets)

    def set_for(self, k: int) -> list[MultiIndex]:
        """Lambda_{eps,k}; empty beyond k_max."""
        return self.sets[k - 1] if k <= self.k_max else []

    def sizes(self) -> list[int]:
        return [len(s) for s in self.sets]

    def to_lines(self) -> list[str]:
        lines = [f"eps {self.eps:.17g}", f"k_max {self.k_max}", f"n_eps {self.n_eps}"]
        for k, s in enumerate(self.sets, start=1):
            lines.append(f"set {k} {len(s)}")
            lines.extend(" ".join(str(v) for v in nu) for nu in s)
        return lines

    @classmethod
    def from_lines(cls, lines) -> "IndexSetFamily":
        it = iter(lines)
        eps = float(next(it).split()[1])
        k_max = int(next(it).split()[1])
        n_eps = int(next(it).split()[1])
        sets: list[list[MultiIndex]] = []
        for raw in it:
            parts = raw.split()
            if not parts:
                continue
            if parts[0] == "set":
                sets.append([])
            else:
                sets[-1].append(tuple(int(p) for p in parts))
        fam = cls(eps=eps, sets=sets, k_max=k_max, n_eps=n_eps)
        if fam.n_eps != sum(len(s) for s in sets):
            raise DomainError("index family header disagrees with its body")
        return fam


def _enumerate_component(log_rho: np.ndarray, k: int, budget: float) -> list[MultiIndex]:
    """All nu in N_0^k with max(1,nu_k) log rho_k + sum_{j<k} nu_j log rho_j <= budget."""
    out: list[MultiIndex] = []
    lk = log_rho[k - 1]
    if lk > budget:
        return out

    def expand(j: int, remaining: float, prefix: tuple, last: int):
        if j == k - 1:
            out.append(prefix + (last,))
            return
        lj = log_rho[j]
        v = 0
        while v * lj <= remaining:
            expand(j + 1, remaining - v * lj, prefix + (v,), last)
            v += 1

    # last exponents 0 and 1 carry the same charge; higher values multiply it
    expand(0, budget - lk, (), 0)
    m = 1
    while m * lk <= budget:
        expand(0, budget - m * lk, (), m)
        m += 1
    out.sort()
    return out


def build_index_sets(w: WeightSequence, eps: float) -> IndexSetFamily:
    """Enumerate Lambda_{eps,k} for every k with a nonempty set."""
    if not 0.0 < eps <= 1.0:
        raise DomainError("eps must lie in (0, 1]")
    log_rho = np.log(w.rho)
    budget = -np.log(eps)
    budget += TIE_SLACK * max(1.0, abs(budget))
    if log_rho[-1] <= budget:
        raise CapabilityError(
            f"j_max={w.j_max} too small: rho_jmax^-1 = {1.0 / w.rho[-1]:.3e} >= eps={eps:.3e}; "
            "extend the decay sequence"
        )
    active = np.nonzero(log_rho <= budget)[0]
    k_max = int(active[-1]) + 1 if active.size else 0
    sets = [
        _enumerate_component(log_rho, k, budget) for k in range(1, k_max + 1)
    ]
    return IndexSetFamily(eps=eps, sets=sets, k_max=k_max,
                          n_eps=sum(len(s) for s in sets))


def cardinality_scaling(w: WeightSequence, eps_list, p: float | None = None):
    """Sweep table of (eps, N_eps, N_eps * eps^p); p defaults to the decay's."""
    if p is None:
        p = w.decay.p
    rows = []
    for eps in eps_list:
        fam = build_index_sets(w, eps)
        rows.append((float(eps), fam.n_eps, fam.n_eps * float(eps) ** p))
    return rows
