import numpy as np
import pytest

from krtransport.errors import DomainError
from krtransport.indexsets import WeightSequence, build_index_sets
from krtransport.metrics import (
    ProductMetric,
    RateReport,
    RateRow,
    component_sup_error,
    fit_rate,
    sobol_probe,
    sorted_sample_w1,
    statistical_distances,
    wasserstein_upper_bound,
)
from krtransport.models import BasisDecay, linear_tilt_model, posterior_model, uniform_model
from krtransport.oracle import ExactTransport
from krtransport.quadrature import MonteCarloScheme, TensorScheme
from krtransport.rational import ApproxTransport, RationalComponent, build_transport


@pytest.fixture(scope="module")
def decay():
    return BasisDecay.algebraic(c=1.0, r=3.0, p=0.4)


@pytest.fixture(scope="module")
def small_problem(decay):
    rho = uniform_model(2)
    pi = posterior_model(decay, 2)
    oracle = ExactTransport(rho, pi)
    fam = build_index_sets(WeightSequence.from_decay(decay), 1e-2)
    transport = build_transport(oracle, fam)
    return rho, pi, oracle, transport


def test_probe_is_deterministic():
    a = sobol_probe(3, 64)
    b = sobol_probe(3, 64)
    np.testing.assert_array_equal(a, b)
    assert np.max(np.abs(a)) < 1.0


def test_sup_error_vanishes_for_matching_measures(decay):
    pi = posterior_model(decay, 2)
    oracle = ExactTransport(pi, pi)
    fam = build_index_sets(WeightSequence.from_decay(decay), 1e-1)
    transport = build_transport(oracle, fam)
    for k in (1, 2):
        err = component_sup_error(oracle, transport, k)
        assert err.map_sup <= 1e-10
        assert err.derivative_sup <= 1e-9


def test_sup_error_identity_fallback_measures_map_gap(small_problem):
    _, _, oracle, _ = small_problem
    ident = ApproxTransport([RationalComponent(1, None), RationalComponent(2, None)])
    probe = sobol_probe(2, 256)
    err = component_sup_error(oracle, ident, 2, probe=probe)
    t_exact = oracle.transport_batch(probe)[:, 1]
    assert err.map_sup == pytest.approx(np.max(np.abs(t_exact - probe[:, 1])), abs=1e-14)


def test_distances_vanish_for_identical_density(decay):
    pi = posterior_model(decay, 2)
    d = statistical_distances(pi, pi.evaluate_batch, 2, TensorScheme(16))
    assert d.hellinger <= 1e-10 and d.tv <= 1e-10 and abs(d.kl) <= 1e-10


def test_tv_closed_form_for_tilt_vs_uniform():
    # TV = 1/2 int |c y| dmu = c/4
    c = 0.5
    pi = uniform_model(1)
    q = linear_tilt_model([c], d=1)
    d = statistical_distances(pi, q.evaluate_batch, 1, TensorScheme(64))
    # |f_q - f_pi| has a kink at 0, so the rule converges only algebraically
    assert d.tv == pytest.approx(c / 4.0, abs=1e-4)
    assert d.hellinger**2 <= d.tv + 1e-12


def test_hellinger_sq_below_tv_on_test_pairs(decay, small_problem):
    rho, pi, oracle, transport = small_problem
    q = lambda pts: transport.pushforward_density(rho, pts)
    d = statistical_distances(pi, q, 2, TensorScheme(24))
    assert d.hellinger >= 0 and d.tv >= 0
    assert d.hellinger**2 <= d.tv + 1e-12


def test_tv_quadrature_vs_monte_carlo(decay):
    pi = uniform_model(3)
    q = linear_tilt_model([0.4, 0.2, 0.1], d=3)
    ref = statistical_distances(pi, q.evaluate_batch, 3, TensorScheme(16))
    n = 400_000
    mc = statistical_distances(pi, q.evaluate_batch, 3,
                               MonteCarloScheme(seed=8, n_samples=n))
    # 4 sigma of the |f_q - f_pi| integrand
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, size=(n, 3))
    se = np.abs(q.evaluate_batch(pts) - 1.0).std() / np.sqrt(n)
    assert abs(mc.tv - ref.tv) <= 4 * se


def test_wasserstein_bound_structure(decay, small_problem):
    _, _, oracle, transport = small_problem
    metric = ProductMetric.from_decay(decay)
    errs = [component_sup_error(oracle, transport, k).map_sup for k in (1, 2)]
    bound = wasserstein_upper_bound(metric, errs)
    assert bound == pytest.approx(decay.b[0] * errs[0] + decay.b[1] * errs[1], rel=1e-14)
    assert bound >= 0
    exact = [0.0, 0.0]
    assert wasserstein_upper_bound(metric, exact) == 0.0


def test_wasserstein_bound_dominates_sorted_sample_w1(decay, small_problem):
    rho, pi, oracle, transport = small_problem
    metric = ProductMetric.from_decay(decay)
    errs = [component_sup_error(oracle, transport, k).map_sup for k in (1, 2)]
    bound = wasserstein_upper_bound(metric, errs)
    u = sobol_probe(1, 10_000, seed=55)
    exact_push = oracle.transport_batch(u)[:, 0]
    approx_push = transport.component(1).eval_batch(u)
    w1, se = sorted_sample_w1(exact_push, approx_push)
    assert bound >= w1 - 3 * se


def test_wasserstein_bound_monotone_along_mini_sweep(decay):
    rho = uniform_model(2)
    oracle = ExactTransport(rho, posterior_model(decay, 2))
    metric = ProductMetric.from_decay(decay)
    weights = WeightSequence.from_decay(decay)
    bounds = []
    for eps in (1e-1, 1e-2, 1e-3):
        transport = build_transport(oracle, build_index_sets(weights, eps))
        errs = [component_sup_error(oracle, transport, k).map_sup for k in (1, 2)]
        bounds.append(wasserstein_upper_bound(metric, errs))
    assert bounds[0] > bounds[1] > bounds[2]


def test_product_metric_distance():
    m = ProductMetric(c=np.array([1.0, 0.5]))
    d = m.distance(np.array([0.0, 0.0]), np.array([1.0, -1.0]))
    assert d[0] == pytest.approx(1.5, abs=1e-15)
    with pytest.raises(DomainError):
        ProductMetric(c=np.array([0.0]))


def test_fit_rate_exact_power_law():
    n = np.array([10, 30, 100, 500])
    assert fit_rate(n, n**-2.0) == pytest.approx(-2.0, abs=1e-12)
    assert fit_rate(n, np.full(4, 0.37)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        fit_rate([5, 5, 5], [1, 1, 1])
    with pytest.raises(DomainError):
        fit_rate([1, 2], [1.0, 0.5])


def test_rate_report_validation_and_csv_roundtrip():
    rows = [
        RateRow(1e-1, 4, 1e-2, 1e-3, 1e-3, 1e-4, 2e-2),
        RateRow(1e-2, 12, 5e-3, 5e-4, 6e-4, 5e-5, 9e-3),
        RateRow(1e-3, 40, 1e-3, 1e-4, 2e-4, 1e-5, 2e-3),
    ]
    report = RateReport(rows=rows, p=0.4)
    assert report.theoretical_slope == pytest.approx(-1.5)
    assert report.fitted_slope < 0
    text = report.csv_text()
    import io

    back = RateReport.from_csv(io.StringIO(text), p=0.4)
    assert back.rows == rows
    with pytest.raises(DomainError):
        RateReport(rows=list(reversed(rows)), p=0.4)
