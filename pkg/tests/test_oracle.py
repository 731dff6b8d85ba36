import numpy as np
import pytest

from krtransport.models import BasisDecay, linear_tilt_model, posterior_model, uniform_model
from krtransport.oracle import ExactTransport, conditional_cdf, marginal_density


def tilt_transport_closed_form(x, c):
    # antiderivative oracle: solve (T+1)/2 + c(T^2-1)/4 = (x+1)/2 for T,
    # i.e. c T^2 + 2 T - (c + 2x) = 0, increasing branch
    return (-1.0 + np.sqrt(1.0 + c * c + 2.0 * c * np.asarray(x))) / c


def tilt_cdf_closed_form(t, c):
    return (t + 1.0) / 2.0 + c * (t * t - 1.0) / 4.0


@pytest.fixture(scope="module")
def tilt_pair():
    return ExactTransport(uniform_model(1), linear_tilt_model([0.5], d=1))


def test_marginal_uniform_is_one():
    m = uniform_model(4)
    for k in (1, 2, 4):
        assert marginal_density(m, k, np.array([0.3, -0.2, 0.9, 0.0])) == pytest.approx(1.0, abs=1e-14)


def test_marginal_tilt_factorizes():
    m = linear_tilt_model([0.5, 0.3, -0.4], d=3)
    got = marginal_density(m, 1, np.array([0.7]))
    assert got == pytest.approx(1.0 + 0.5 * 0.7, abs=1e-13)


def test_marginal_posterior_riemann_cross_check():
    decay = BasisDecay.algebraic(c=1.0, r=3.0, p=0.4)
    m = posterior_model(decay, 2)
    got = marginal_density(m, 1, np.array([0.0]))
    n = 100_000
    t = -1.0 + (2.0 * np.arange(n) + 1.0) / n
    pts = np.column_stack([np.zeros(n), t])
    oracle = float(np.mean(m.evaluate_batch(pts)))
    assert got == pytest.approx(oracle, abs=1e-7)


def test_exact_marginals_match_quadrature_path():
    decay = BasisDecay.algebraic(c=1.0, r=3.0, p=0.4)
    rng = np.random.default_rng(42)
    for model in (posterior_model(decay, 4), linear_tilt_model([0.5, 0.3, -0.2, 0.1], d=4)):
        assert model.exact_marginal is not None
        for k in (1, 2, 3):
            y = rng.uniform(-1, 1, size=4)
            fast = marginal_density(model, k, y)
            slow = marginal_density(model, k, y, method="quadrature")
            assert fast == pytest.approx(slow, rel=1e-10)


def test_conditional_cdf_uniform():
    m = uniform_model(2)
    for t in (-1.0, -0.25, 0.5, 1.0):
        assert conditional_cdf(m, 2, [0.3], t) == pytest.approx((t + 1) / 2, abs=1e-14)


def test_conditional_cdf_tilt_antiderivative_oracle():
    # closed-form antiderivative of (1+cs)/2 from -1 to t
    for c in (0.5, 0.25):
        m = linear_tilt_model([c], d=1)
        got = conditional_cdf(m, 1, [], 0.0)
        assert got == pytest.approx(tilt_cdf_closed_form(0.0, c), abs=1e-14)
    # the c = 0.25 case pins the historical value 0.4375
    m = linear_tilt_model([0.25], d=1)
    assert conditional_cdf(m, 1, [], 0.0) == pytest.approx(0.4375, abs=1e-14)


def test_conditional_cdf_normalization_endpoints():
    decay = BasisDecay.algebraic()
    m = posterior_model(decay, 3)
    assert conditional_cdf(m, 2, [0.4], 1.0) == pytest.approx(1.0, abs=1e-14)
    assert conditional_cdf(m, 2, [0.4], -1.0) == pytest.approx(0.0, abs=1e-14)


def test_identity_transport_when_measures_match():
    decay = BasisDecay.algebraic()
    pi = posterior_model(decay, 2)
    T = ExactTransport(pi, pi)
    rng = np.random.default_rng(5)
    Y = rng.uniform(-1, 1, size=(200, 2))
    X = T.transport_batch(Y)
    assert np.max(np.abs(X - Y)) <= 1e-12
    assert T.component_derivative(2, np.array([0.2, -0.3])) == pytest.approx(1.0, abs=1e-10)


def test_tilt_component_quadratic_formula_oracle(tilt_pair):
    T = tilt_pair
    assert T.component(1, [0.0]) == pytest.approx(0.2360679774997896, abs=1e-10)
    assert T.component(1, [0.0]) == pytest.approx(0.2360680, abs=1e-6)
    xs = np.linspace(-1, 1, 101)
    got = T.transport_batch(xs[:, None])[:, 0]
    np.testing.assert_allclose(got, tilt_transport_closed_form(xs, 0.5), atol=1e-10)


def test_tilt_endpoints_preserved(tilt_pair):
    assert tilt_pair.component(1, [-1.0]) == pytest.approx(-1.0, abs=1e-12)
    assert tilt_pair.component(1, [1.0]) == pytest.approx(1.0, abs=1e-12)


def test_tilt_derivative_chain_oracle(tilt_pair):
    t0 = tilt_transport_closed_form(0.0, 0.5)
    expected = 1.0 / (1.0 + 0.5 * t0)
    assert tilt_pair.component_derivative(1, [0.0]) == pytest.approx(expected, abs=1e-10)
    assert tilt_pair.component_derivative(1, [0.0]) == pytest.approx(0.8944272, abs=1e-6)


def test_derivative_matches_finite_differences():
    decay = BasisDecay.algebraic()
    T = ExactTransport(uniform_model(3), posterior_model(decay, 3))
    rng = np.random.default_rng(9)
    h = 1e-5
    for _ in range(5):
        y = rng.uniform(-0.9, 0.9, size=3)
        for k in (1, 2, 3):
            up, dn = y.copy(), y.copy()
            up[k - 1] += h
            dn[k - 1] -= h
            fd = (T.component(k, up) - T.component(k, dn)) / (2 * h)
            assert T.component_derivative(k, y) == pytest.approx(fd, abs=1e-6)


def test_monotonicity_in_last_coordinate():
    decay = BasisDecay.algebraic()
    T = ExactTransport(uniform_model(3), posterior_model(decay, 3))
    rng = np.random.default_rng(13)
    for _ in range(25):
        prefix = rng.uniform(-1, 1, size=2)
        t1, t2 = np.sort(rng.uniform(-1, 1, size=2))
        if t1 == t2:
            continue
        a = T.component(3, np.array([*prefix, t1]))
        b = T.component(3, np.array([*prefix, t2]))
        assert a < b


def test_pushforward_residual_uniform_is_zero():
    T = ExactTransport(uniform_model(2), uniform_model(2))
    rng = np.random.default_rng(3)
    Y = rng.uniform(-1, 1, size=(50, 2))
    np.testing.assert_allclose(T.pushforward_residual(Y), 0.0, atol=1e-14)


def test_pushforward_residual_tilt_grid(tilt_pair):
    xs = np.linspace(-1, 1, 101)[:, None]
    assert np.max(np.abs(tilt_pair.pushforward_residual(xs))) <= 1e-9


@pytest.mark.parametrize("d", [2, 3, 4])
def test_pushforward_residual_posterior(d):
    decay = BasisDecay.algebraic()
    T = ExactTransport(uniform_model(d), posterior_model(decay, d))
    rng = np.random.default_rng(101)
    Y = rng.uniform(-1, 1, size=(1000, d))
    assert np.max(np.abs(T.pushforward_residual(Y))) <= 1e-6


def test_oracle_dimension_cap():
    from krtransport.errors import CapabilityError

    with pytest.raises(CapabilityError):
        ExactTransport(uniform_model(13), uniform_model(13))


def _opaque_tilt(c, d):
    # same density as the tilt family, but without the exact-marginal shortcut,
    # so marginals go through the generic tail rules
    from krtransport.models import DensityModel

    cd = np.zeros(d)
    cd[: len(c)] = c
    return DensityModel(
        family="opaque", dim=d,
        log_unnormalized=lambda pts: np.sum(np.log1p(pts * cd), axis=1),
        normalization=1.0,
        bounds=(float(np.prod(1 - np.abs(cd))), float(np.prod(1 + np.abs(cd)))),
    )


def test_monte_carlo_tail_marginals_beyond_tensor_cap():
    # d = 8 with k = 1 leaves a 7-dimensional tail, forcing the MC rule
    c = [0.5, 0.25]
    model = _opaque_tilt(c, 8)
    assert model.exact_marginal is None
    got = marginal_density(model, 1, np.array([0.7]), mc_samples=200_000)
    exact = 1.0 + 0.5 * 0.7
    assert got == pytest.approx(exact, abs=5e-3)
    # deterministic given the seed
    again = marginal_density(model, 1, np.array([0.7]), mc_samples=200_000)
    assert got == again


def test_high_dimensional_oracle_with_mc_marginals():
    rho = uniform_model(8)
    pi = _opaque_tilt([0.5, 0.25], 8)
    T = ExactTransport(rho, pi, mc_samples=20_000)
    rng = np.random.default_rng(2)
    Y = rng.uniform(-1, 1, size=(10, 8))
    X = T.transport_batch(Y[:, :3])
    # the target factorizes, so T_1 matches the closed form despite MC tails
    closed = tilt_transport_closed_form(Y[:, 0], 0.5)
    assert np.max(np.abs(X[:, 0] - closed)) <= 2e-2
    # the third factor is uniform, so that component is the identity up to MC error
    assert np.max(np.abs(X[:, 2] - Y[:, 2])) <= 2e-2


def test_measure_preservation_1d_sup_norm(tilt_pair):
    from scipy.stats import qmc

    u = qmc.Sobol(1, scramble=True, seed=7).random(2**14)[:10_000] * 2.0 - 1.0
    pushed = np.sort(tilt_pair.transport_batch(u)[:, 0])
    n = pushed.size
    cdf_vals = tilt_cdf_closed_form(pushed, 0.5)
    i = np.arange(1, n + 1)
    ks = max(np.max(np.abs(cdf_vals - i / n)), np.max(np.abs(cdf_vals - (i - 1) / n)))
    assert ks <= 2e-2


def test_inverse_consistency_roundtrip():
    decay = BasisDecay.algebraic()
    rho = uniform_model(2)
    pi = posterior_model(decay, 2)
    fwd = ExactTransport(rho, pi)
    bwd = ExactTransport(pi, rho)
    rng = np.random.default_rng(31)
    Y = rng.uniform(-1, 1, size=(100, 2))
    back = bwd.transport_batch(fwd.transport_batch(Y))
    assert np.max(np.abs(back - Y)) <= 1e-8
