import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bayesinv.errors import DegenerateEvidence, NumericError
from bayesinv.fspace import ForwardMap
from bayesinv.noise import DominatedModifier, DominatedNoise, GaussianNoise
from bayesinv.posterior import (
    cm_estimate,
    compute_posterior,
    ess,
    from_log_weights,
    log_likelihoods,
    pointwise,
    posterior_functional,
    posterior_probability,
    prior_average,
)
from bayesinv.priors import PriorEnsemble, PriorScheme, kl_sigmas, sample_kl

SCHEME = PriorScheme("kl_truncation", 1)


def ensemble(rows):
    X = np.asarray(rows, dtype=float)
    return PriorEnsemble(SCHEME, 1, X, 0)


def test_two_particle_normalisation():
    post = from_log_weights(ensemble([[0.0], [1.0]]), [0.0, np.log(3.0)])
    assert post.norm_weights == pytest.approx([0.25, 0.75], rel=1e-15)
    assert ess(post) == pytest.approx(1.6, rel=1e-14)
    assert post.log_evidence == pytest.approx(np.log(4.0 / 2.0), rel=1e-15)


def test_ess_limits():
    ens = ensemble(np.arange(10.0)[:, None])
    assert ess(from_log_weights(ens, np.zeros(10))) == 10
    lw = np.full(10, -np.inf)
    lw[3] = 0.0
    assert ess(from_log_weights(ens, lw)) == 1


def test_constant_likelihood_recovers_prior():
    ens = sample_kl(kl_sigmas(4, 1.0), 4, 1000, 1)
    post = compute_posterior(ens, GaussianNoise("coeff", np.ones(4)), ForwardMap.zero("coeff", 4), np.ones(4))
    assert np.all(post.norm_weights == post.norm_weights[0])
    assert np.array_equal(cm_estimate(post).coeffs, np.array([np.mean(ens.particles[:, j]) for j in range(4)]))


def test_single_particle_cm():
    post = from_log_weights(ensemble([[1.5, -2.0]]), [-3.0])
    assert cm_estimate(post).coeffs.tolist() == [1.5, -2.0]


@settings(max_examples=40, deadline=None)
@given(arrays(float, 5, elements=st.floats(-3, 3)), st.integers(0, 3))
def test_zero_forward_gives_prior_average(a, power):
    ens = sample_kl(kl_sigmas(5, 1.0), 5, 300, 2)
    post = compute_posterior(ens, GaussianNoise("coeff", np.ones(5)), ForwardMap.zero("coeff", 5), np.ones(5))

    def g(X):
        return np.tanh(X @ a) ** power + X[:, 0]

    assert posterior_functional(post, g) == prior_average(ens, g)


def test_probability_examples():
    ens = sample_kl(kl_sigmas(3, 1.0), 3, 500, 3)
    post = compute_posterior(ens, GaussianNoise("coeff", np.ones(3)), None, np.array([0.5, 0.0, -0.2]))
    assert posterior_probability(post, lambda X: np.ones(len(X), bool)) == 1.0
    assert posterior_probability(post, lambda X: np.zeros(len(X), bool)) == 0.0
    inside = posterior_probability(post, lambda X: X[:, 0] > 0.1)
    outside = posterior_probability(post, lambda X: ~(X[:, 0] > 0.1))
    assert inside + outside == pytest.approx(1.0, abs=1e-12)
    # no prior atom beyond 100, hence no posterior mass there
    assert posterior_probability(post, lambda X: X[:, 0] > 100) == 0.0


def test_functional_examples():
    ens = sample_kl(kl_sigmas(3, 1.0), 3, 400, 4)
    post = compute_posterior(ens, GaussianNoise("coeff", np.ones(3)), None, np.array([1.0, 0.0, 0.0]))
    assert posterior_functional(post, lambda X: np.ones(len(X))) == pytest.approx(1.0, abs=1e-15)
    cm = cm_estimate(post).coeffs
    for j in range(3):
        assert posterior_functional(post, lambda X: X[:, j]) == cm[j]
    a = np.array([0.3, -1.0, 2.0])
    assert posterior_functional(post, lambda X: X @ a) == pytest.approx(cm @ a, rel=1e-12, abs=1e-15)
    mask = lambda X: X[:, 1] < 0  # noqa: E731
    assert posterior_functional(post, lambda X: mask(X).astype(float)) == posterior_probability(post, mask)
    with pytest.raises(NumericError):
        posterior_functional(post, lambda X: np.full(len(X), np.nan))


def test_pointwise_predicate_lift():
    post = from_log_weights(ensemble([[1.0], [-1.0]]), [0.0, 0.0])
    assert posterior_probability(post, pointwise(lambda v: v.coeffs[0] > 0)) == 0.5


@settings(max_examples=40, deadline=None)
@given(arrays(np.int64, 20, elements=st.integers(-30 * 1024, 30 * 1024)), st.integers(-1000, 1000))
def test_shift_invariance(ticks, c):
    # dyadic log-weights and integer shifts keep lw + c exactly representable
    ens = ensemble(np.arange(20.0)[:, None])
    lw = ticks / 1024.0
    c = float(c)
    a, b = from_log_weights(ens, lw), from_log_weights(ens, lw + c)
    assert np.array_equal(a.norm_weights, b.norm_weights)
    assert b.log_evidence - a.log_evidence == pytest.approx(c, rel=1e-12, abs=1e-12)
    assert abs(np.sum(a.norm_weights) - 1) <= 1e-12
    assert 1 <= a.ess <= 20


def test_nonfinite_weights():
    ens = ensemble([[0.0], [1.0]])
    with pytest.raises(NumericError):
        from_log_weights(ens, [0.0, np.nan])
    with pytest.raises(NumericError):
        from_log_weights(ens, [0.0, np.inf])
    post = from_log_weights(ens, [-np.inf, -np.inf])
    assert not post.valid
    assert post.log_evidence == -np.inf
    assert "excluded" in post.diagnostic
    for fn in (cm_estimate, ess):
        with pytest.raises(DegenerateEvidence):
            fn(post)


def test_box_exclusion_flows_into_weights():
    noise = DominatedNoise(GaussianNoise("coeff", np.ones(2)), DominatedModifier.box([0], 0.5))
    ens = ensemble([[0.0, 0.0], [3.0, 0.0]])
    post = compute_posterior(ens, noise, None, np.array([0.1, 0.0]))
    assert post.norm_weights.tolist() == [1.0, 0.0]
    dead = compute_posterior(ens, noise, None, np.array([10.0, 0.0]))
    assert not dead.valid


def test_threads_do_not_change_weights():
    ens = sample_kl(kl_sigmas(6, 1.0), 6, 10_000, 5)
    model = GaussianNoise("coeff", np.full(6, 0.5))
    y = np.linspace(-1, 1, 6)
    ref = log_likelihoods(ens, model, None, y, threads=1)
    for th in (2, 4, 8):
        assert np.array_equal(log_likelihoods(ens, model, None, y, threads=th), ref)


def test_conjugate_oracle_small():
    N = 3
    sig, c, lam = kl_sigmas(N, 1.0), np.array([1.0, 0.5, 0.25]), np.array([0.5, 1.0, 1.0])
    y = np.array([0.4, -0.3, 0.2])
    post_var = 1 / (1 / sig**2 + c * c / lam)
    mean = post_var * c * y / lam
    hits = 0
    for seed in range(10):
        ens = sample_kl(sig, N, 20_000, seed)
        post = compute_posterior(ens, GaussianNoise("coeff", lam), ForwardMap("diagonal", c, "coeff", "coeff"), y)
        se = np.sqrt(post_var / post.ess)
        hits += np.linalg.norm(cm_estimate(post).coeffs - mean) <= 3 * np.linalg.norm(se)
    assert hits >= 9
