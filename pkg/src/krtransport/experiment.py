"""Experiment drivers binding models, oracle, sparse sets, and metrics.

These functions back the command-line interface and the acceptance suite:
oracle sanity checks, single transport builds, epsilon sweeps producing rate
reports, and function-space sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .banach import FunctionBasis, sample_banach
from .config import ExperimentConfig
from .indexsets import IndexSetFamily, WeightSequence, build_index_sets
from .metrics import (
    ComponentError,
    Distances,
    ProductMetric,
    RateReport,
    RateRow,
    component_sup_error,
    sobol_probe,
    sorted_sample_w1,
    statistical_distances,
    wasserstein_upper_bound,
)
from .oracle import ExactTransport
from .quadrature import K_TENSOR_MAX, MonteCarloScheme, TensorScheme
from .rational import ApproxTransport, build_transport


def make_oracle(cfg: ExperimentConfig) -> ExactTransport:
    return ExactTransport(
        cfg.reference_model(), cfg.target_model(),
        tail_nodes=cfg.tail_nodes, cdf_nodes=cfg.cdf_nodes,
        mc_samples=cfg.mc_samples, mc_seed=cfg.seed,
    )


def make_weights(cfg: ExperimentConfig) -> WeightSequence:
    return WeightSequence.from_decay(cfg.decay, alpha=cfg.alpha)


@dataclass(frozen=True)
class CheckRow:
    name: str
    statistic: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.threshold


def run_oracle_check(cfg: ExperimentConfig) -> list[CheckRow]:
    """Pushforward-residual, monotonicity, and roundtrip suites on the oracle."""
    oracle = make_oracle(cfg)
    d = cfg.d
    rng = np.random.default_rng(cfg.seed)
    pts = rng.uniform(-1.0, 1.0, size=(cfg.probe_points, d))
    residual = float(np.max(np.abs(oracle.pushforward_residual(pts))))

    # monotonicity: ordered pairs in the last coordinate share each prefix
    lo = pts.copy()
    hi = pts.copy()
    pairs = rng.uniform(-1.0, 1.0, size=(cfg.probe_points, 2))
    lo[:, -1] = pairs.min(axis=1)
    hi[:, -1] = pairs.max(axis=1) + 1e-9
    np.clip(hi[:, -1], -1.0, 1.0, out=hi[:, -1])
    t_lo = oracle.transport_batch(lo)[:, d - 1]
    t_hi = oracle.transport_batch(hi)[:, d - 1]
    mono_violation = float(np.max(t_lo - t_hi))

    swapped = ExactTransport(
        cfg.target_model(), cfg.reference_model(),
        tail_nodes=cfg.tail_nodes, cdf_nodes=cfg.cdf_nodes,
        mc_samples=cfg.mc_samples, mc_seed=cfg.seed,
    )
    roundtrip = float(np.max(np.abs(swapped.transport_batch(oracle.transport_batch(pts)) - pts)))
    return [
        CheckRow("pushforward_residual_max", residual, 1e-6),
        CheckRow("monotonicity_violation", mono_violation, 0.0),
        CheckRow("roundtrip_max_error", roundtrip, 1e-8),
    ]


def run_build(cfg: ExperimentConfig, eps: float, jobs: int | None = None):
    """Index family and serialized-ready transport for one epsilon."""
    oracle = make_oracle(cfg)
    family = build_index_sets(make_weights(cfg), eps)
    transport = build_transport(oracle, family, margin=cfg.margin, mode=cfg.mode,
                                alpha=cfg.alpha, jobs=jobs or cfg.jobs)
    return family, transport


@dataclass
class SweepRowDetail:
    eps: float
    family: IndexSetFamily
    transport: ApproxTransport
    sup_errors: list[ComponentError]
    distances: Distances
    w_bound: float
    w1_first_marginal: float
    w1_standard_error: float


@dataclass
class SweepResult:
    report: RateReport
    details: list[SweepRowDetail]


def _distance_scheme(cfg: ExperimentConfig):
    if cfg.d <= K_TENSOR_MAX:
        return TensorScheme(cfg.distance_nodes)
    return MonteCarloScheme(seed=cfg.seed + 1, n_samples=cfg.mc_samples)


def run_sweep(cfg: ExperimentConfig, on_row=None) -> SweepResult:
    """Build a transport per epsilon and collect errors, distances, and bounds.

    ``on_row`` is called with each RateRow as soon as it is complete, which
    lets the CLI flush partial CSV output row by row.
    """
    oracle = make_oracle(cfg)
    weights = make_weights(cfg)
    metric = ProductMetric.from_decay(cfg.decay)
    rho = oracle.rho
    pi = oracle.pi
    probes = {k: sobol_probe(k, cfg.probe_points) for k in range(1, cfg.d + 1)}
    w1_latent = sobol_probe(1, cfg.w1_samples, seed=cfg.seed + 2)
    exact_first = oracle.transport_batch(w1_latent)[:, 0]
    scheme = _distance_scheme(cfg)

    rows: list[RateRow] = []
    details: list[SweepRowDetail] = []
    for eps in cfg.eps_list:
        family = build_index_sets(weights, eps)
        transport = build_transport(oracle, family, margin=cfg.margin,
                                    mode=cfg.mode, alpha=cfg.alpha, jobs=cfg.jobs)
        sup_errors = [component_sup_error(oracle, transport, k, probe=probes[k])
                      for k in range(1, cfg.d + 1)]
        sup_sum = float(sum(e.map_sup for e in sup_errors))
        dist = statistical_distances(
            pi, lambda pts: transport.pushforward_density(rho, pts), cfg.d, scheme)
        w_bound = wasserstein_upper_bound(metric, [e.map_sup for e in sup_errors])
        approx_first = transport.component(1).eval_batch(w1_latent)
        w1, w1_se = sorted_sample_w1(exact_first, approx_first)
        row = RateRow(eps=eps, n_eps=family.n_eps, sup_error_sum=sup_sum,
                      hellinger=dist.hellinger, tv=dist.tv, kl=dist.kl,
                      w_bound=w_bound)
        rows.append(row)
        details.append(SweepRowDetail(
            eps=eps, family=family, transport=transport, sup_errors=sup_errors,
            distances=dist, w_bound=w_bound, w1_first_marginal=w1,
            w1_standard_error=w1_se,
        ))
        if on_row is not None:
            on_row(row)
    return SweepResult(report=RateReport(rows=rows, p=cfg.decay.p), details=details)


def run_sample(cfg: ExperimentConfig, transport: ApproxTransport, n: int, s: int):
    """Function-space samples through the cosine basis scaled by the decay."""
    basis = FunctionBasis.cosine(cfg.decay, size=max(s, 1))
    return sample_banach(transport, basis, n, s, seed=cfg.seed)
