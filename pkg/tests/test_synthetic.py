import math

import mpmath
import numpy as np
import pytest

from tirex.errors import InvalidInputError
from tirex.synthetic import (
    BernoulliLaw,
    MixtureSpec,
    UniformLaw,
    expected_abs_R,
    model_preset,
    s1_marginal,
    s2_marginal,
    sample,
    survival_components,
    tci_ratios,
    true_projector,
)

# Frozen output of sample(model A, n=5, seed=20240, stream=0); regenerating
# with the same key must reproduce these values.
GOLDEN_A_X = np.array([
    [2.695675511597165, 9.86253281881373],
    [7.752494970950695, 2.5522755277305604],
    [9.875989051277482, 5.335694064520685],
    [9.954937924212361, 5.94478466749908],
    [2.9415949708710327, 4.699662646668568],
])
GOLDEN_A_Y = np.array([
    0.12224963454315362, 0.6314399424832434, 5.996420995217321,
    0.9379693137508512, 0.01426798738249456,
])


def bernoulli_spec(tau=0.5, theta=0.5):
    return MixtureSpec(p=2, d=1, theta=theta, alpha1=10.0, alpha2=10.0,
                       covariate_law=BernoulliLaw(tau))


def test_golden_fixture_model_a():
    spec, _ = model_preset("A")
    ds = sample(spec, 5, seed=20240, stream=0)
    assert ds.names == ["v1", "w1"]
    assert np.allclose(ds.x, GOLDEN_A_X, rtol=1e-13, atol=0)
    assert np.allclose(ds.y, GOLDEN_A_Y, rtol=1e-13, atol=0)


def test_sample_seed_determinism():
    spec, _ = model_preset("B")
    a = sample(spec, 200, seed=1, stream=4)
    b = sample(spec, 200, seed=1, stream=4)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    c = sample(spec, 200, seed=2, stream=4)
    d = sample(spec, 200, seed=1, stream=5)
    assert not np.array_equal(a.y, c.y)
    assert not np.array_equal(a.y, d.y)


def test_theta_one_kills_heavy_tail():
    base = dict(p=2, d=1, alpha1=10.0, alpha2=10.0, covariate_law=UniformLaw(1.0, 10.0))
    light = sample(MixtureSpec(theta=1.0, **base), 50_000, seed=3)
    heavy = sample(MixtureSpec(theta=0.0, **base), 50_000, seed=3)
    # no exceedances of 10*b at all in the pure-light sample, never more than
    # in the pure-heavy one
    y0 = 10.0 * 10.0
    assert (light.y > y0).mean() <= (heavy.y > y0).mean()
    # at a threshold with observable mass the gap is dramatic
    y1 = 5.0
    assert (light.y > y1).mean() < 0.02 * (heavy.y > y1).mean()


def test_model_c_tau_one_constant_covariates():
    spec = MixtureSpec(p=2, d=1, theta=0.5, alpha1=10.0, alpha2=10.0,
                       covariate_law=BernoulliLaw(1.0))
    ds = sample(spec, 100, seed=9)
    assert np.all(ds.x == 1.0)


def test_true_projector_model_a():
    spec, _ = model_preset("A")
    p = true_projector(spec)
    assert np.array_equal(p.matrix, np.diag([0.0, 1.0]))
    assert p.rank == 1


def test_true_projector_model_b_block():
    spec, _ = model_preset("B")
    p = true_projector(spec)
    want = np.diag([0.0] * 25 + [1.0] * 5)
    assert np.array_equal(p.matrix, want)


def test_mixture_spec_validation():
    law = UniformLaw(1.0, 10.0)
    with pytest.raises(InvalidInputError):
        MixtureSpec(p=2, d=2, theta=0.5, alpha1=1.0, alpha2=1.0, covariate_law=law)
    with pytest.raises(InvalidInputError):
        MixtureSpec(p=2, d=1, theta=1.5, alpha1=1.0, alpha2=1.0, covariate_law=law)
    with pytest.raises(InvalidInputError):
        MixtureSpec(p=2, d=1, theta=0.5, alpha1=-1.0, alpha2=1.0, covariate_law=law)
    with pytest.raises(InvalidInputError):
        MixtureSpec(p=3, d=1, theta=0.5, alpha1=1.0, alpha2=1.0, covariate_law=law,
                    pi1=np.array([0.5, 0.6]))
    with pytest.raises(InvalidInputError):
        UniformLaw(5.0, 2.0)
    with pytest.raises(InvalidInputError):
        BernoulliLaw(1.2)


def test_spec_dict_roundtrip():
    spec, _ = model_preset("C")
    back = MixtureSpec.from_dict(spec.to_dict())
    assert back == spec


# ---------------------------------------------------------------------------
# analytic survival components


def test_survival_components_bernoulli_all_ones():
    spec = bernoulli_spec(tau=0.5)
    y = 3.0
    s1v, s2w, s1, s2 = survival_components(spec, y, np.array([1.0]), np.array([1.0]))
    assert s1v == pytest.approx(math.exp(-spec.alpha1 * y), rel=1e-14)
    assert s1 == pytest.approx(0.5 * math.exp(-spec.alpha1 * y), rel=1e-14)
    assert s2w == pytest.approx(y ** -spec.alpha2, rel=1e-14)
    assert s2 == pytest.approx(0.5 * y ** -spec.alpha2, rel=1e-14)


def test_survival_components_zero_covariates_vanish():
    spec = bernoulli_spec()
    s1v, s2w, _, _ = survival_components(spec, 2.0, np.array([0.0]), np.array([0.0]))
    assert s1v == 0.0 and s2w == 0.0


def test_survival_validity_threshold():
    spec_u, _ = model_preset("A")
    with pytest.raises(InvalidInputError):
        survival_components(spec_u, 10.0, np.array([1.0]), np.array([1.0]))
    spec_b = bernoulli_spec()
    with pytest.raises(InvalidInputError):
        survival_components(spec_b, 1.0, np.array([1.0]), np.array([1.0]))


def exact_s1_uniform(spec, y):
    """Closed form of the uniform-law marginal via exponential integrals, in
    80-digit arithmetic: integral of exp(-alpha1 y / v) over [a, b] equals
    [v e^{-c/v} - c E1(c/v)] evaluated at the endpoints, c = alpha1 y."""
    mpmath.mp.dps = 80
    law = spec.covariate_law
    c = mpmath.mpf(spec.alpha1) * y
    f = lambda v: v * mpmath.e ** (-c / v) - c * mpmath.expint(1, c / v)
    return float((f(law.b) - f(law.a)) / (law.b - law.a))


def test_s1_marginal_uniform_vs_quadrature_oracle():
    spec, _ = model_preset("A")
    for y in (10.5, 12.0, 20.0, 50.0, 100.0, 200.0):
        assert s1_marginal(spec, y) == pytest.approx(exact_s1_uniform(spec, y), rel=1e-8)


def test_s2_marginal_uniform_vs_quadrature_oracle():
    spec, _ = model_preset("A")
    mpmath.mp.dps = 40
    for y in (10.5, 20.0, 100.0):
        oracle = float(mpmath.quad(lambda v: (y / v) ** (-mpmath.mpf(spec.alpha2)), [1, 10]) / 9)
        assert s2_marginal(spec, y) == pytest.approx(oracle, rel=1e-10)


def test_s1_marginal_bernoulli_closed_form():
    spec = bernoulli_spec(tau=0.3)
    y = 4.0
    assert s1_marginal(spec, y) == pytest.approx(0.3 * math.exp(-spec.alpha1 * y), rel=1e-14)


# ---------------------------------------------------------------------------
# dependence ratios


def test_r_tilde_bernoulli_divergent_case():
    # v all ones, w all zeros: the ratio settles at (1 - tau) / tau for y > 1
    for tau in (0.5, 0.25):
        spec = bernoulli_spec(tau=tau)
        for y in (1.5, 2.0, 5.0, 20.0, 50.0):
            r = tci_ratios(spec, y, np.array([1.0]), np.array([0.0]))
            if tau == 0.5:
                assert r.r_tilde == 1.0  # exact binary arithmetic
            else:
                assert r.r_tilde == pytest.approx((1 - tau) / tau, rel=1e-12)


def test_r_zero_when_conditional_matches_marginal():
    # tau = 1 makes V degenerate at 1, so S1(y, v) == S1(y)
    spec = bernoulli_spec(tau=1.0)
    r = tci_ratios(spec, 2.0, np.array([1.0]), np.array([1.0]))
    assert r.r == 0.0


def test_diverging_ratio_reported_as_infinity():
    # tau = 0 makes both marginals vanish exactly; evaluating the formulas at
    # the off-support point v = 1 leaves a positive numerator over a zero
    # denominator, which must come back as a +inf marker, not a crash
    spec = bernoulli_spec(tau=0.0, theta=0.5)
    ratios = tci_ratios(spec, 2.0, np.array([1.0]), np.array([0.0]))
    assert math.isinf(ratios.r) and ratios.r > 0
    assert math.isinf(ratios.r_tilde) and ratios.r_tilde > 0
    # 0/0 carries no divergence evidence and stays finite
    zero = tci_ratios(spec, 2.0, np.array([0.0]), np.array([0.0]))
    assert zero.r == 0.0 and zero.r_tilde == 0.0


def test_r_bound_on_y_grid():
    # |R| <= theta/(1-theta) (S1(y,v) + S1(y)) / S2(y), checked numerically
    spec, _ = model_preset("A")
    rng = np.random.default_rng(17)
    for y in (11.0, 15.0, 25.0, 60.0, 120.0):
        s1 = s1_marginal(spec, y)
        s2 = s2_marginal(spec, y)
        for _ in range(10):
            v = spec.covariate_law.sample(rng, (1,))
            w = spec.covariate_law.sample(rng, (1,))
            r = tci_ratios(spec, y, v, w).r
            bound = spec.theta / (1 - spec.theta) * (
                survival_components(spec, y, v, w)[0] + s1) / s2
            assert abs(r) <= bound + 1e-18


def test_expected_abs_r_theta_zero_is_zero():
    spec = MixtureSpec(p=2, d=1, theta=0.0, alpha1=10.0, alpha2=10.0,
                       covariate_law=UniformLaw(1.0, 10.0))
    assert expected_abs_R(spec, 20.0, 500, seed=1) == 0.0


@pytest.mark.parametrize("name", ["A", "C"])
def test_expected_abs_r_decreases_to_zero(name):
    spec, _ = model_preset(name)
    values = [expected_abs_R(spec, y, 100_000, seed=11) for y in (20.0, 50.0, 100.0, 200.0)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[-1] < 0.05


def test_signed_r_mean_is_zero_within_mc_error():
    # tower property: E[R(y, V, W)] = 0
    spec, _ = model_preset("A")
    rng = np.random.default_rng(5)
    y = 12.0
    v = spec.covariate_law.sample(rng, (200_000, 1))
    from tirex.synthetic import _s1_conditional

    s1, s2 = s1_marginal(spec, y), s2_marginal(spec, y)
    r = spec.theta * (_s1_conditional(spec, y, v) - s1) / (
        spec.theta * s1 + (1 - spec.theta) * s2)
    assert abs(r.mean()) < 3 * r.std() / math.sqrt(r.size)


def test_empirical_survival_matches_mixture_marginal():
    spec, _ = model_preset("A")
    n = 100_000
    ds = sample(spec, n, seed=5, stream=0)
    y0 = 12.0
    s = spec.theta * s1_marginal(spec, y0) + (1 - spec.theta) * s2_marginal(spec, y0)
    emp = float((ds.y > y0).mean())
    se = math.sqrt(s * (1 - s) / n)
    assert abs(emp - s) <= 3 * se
