import numpy as np
import pytest
import scipy.integrate

from normforge import (Linear, RoundedNorm, SamplerConfig, SumNorm,
                       augment_with_lewis, estimate_tau, exact_leverage_probs,
                       sample_mu, to_probabilities)
from normforge.sampler import SampleBatch
from normforge.weights import TauVector, default_k_tau, psi_n

from conftest import l1_norm, random_linear_norm


def make_batch(points, phat=None):
    return SampleBatch(np.asarray(points, float), phat,
                       SamplerConfig(burn_in=1, steps_per_sample=1), {})


class TestEstimateTau:
    def test_single_term_mean_is_dimension(self):
        # under exp(-N(x)) the average of N(Z) is exactly n, so tau -> 1.5 n
        n = 4
        N = SumNorm(n, 1.0, (Linear(np.ones(n)),))  # |sum x_i|, a seminorm... use l1 instead
        N = l1_norm(n)
        merged = SumNorm(n, 1.0, (Linear(np.eye(n)[0]),))
        cfg = SamplerConfig.for_dim(n, seed=3, chains=64)
        batch = sample_mu(RoundedNorm(N, 1.0, np.sqrt(n)), 1.0, 40000, cfg)
        tau = estimate_tau(N, batch, 1.0)
        assert tau.tau.sum() == pytest.approx(1.5 * n, rel=0.02)

    def test_orthonormal_p2_symmetry(self):
        # exp(-||x||^2) is Gaussian with covariance I/2: E<e_i, Z>^2 = 1/2
        n = 4
        N = SumNorm(n, 2.0, tuple(Linear(np.eye(n)[i]) for i in range(n)))
        cfg = SamplerConfig.for_dim(n, seed=5, chains=64)
        batch = sample_mu(RoundedNorm(N, 1.0, 1.0), 2.0, 30000, cfg)
        tau = estimate_tau(N, batch, 2.0)
        assert np.allclose(tau.tau, 1.5 * 0.5, rtol=0.08)

    def test_half_weight_duplicates_split_tau(self, rng):
        N = l1_norm(3)
        dup = SumNorm(3, 1.0, N.terms + N.terms, np.full(6, 0.5))
        batch = make_batch(rng.standard_normal((50, 3)))
        t1 = estimate_tau(N, batch, 1.0)
        t2 = estimate_tau(dup, batch, 1.0)
        assert np.allclose(t2.tau, np.concatenate([t1.tau, t1.tau]) / 2.0, rtol=1e-12)
        assert t2.tau.sum() == pytest.approx(t1.tau.sum(), rel=1e-12)

    def test_empty_batch_rejected(self):
        N = l1_norm(2)
        with pytest.raises(ValueError):
            estimate_tau(N, make_batch(np.zeros((0, 2))), 1.0)

    def test_phat_mismatch_warns(self, rng):
        N = l1_norm(2)
        batch = make_batch(rng.standard_normal((10, 2)), phat=1.0)
        with pytest.warns(UserWarning, match="phat"):
            estimate_tau(N, batch, 2.0)


class TestToProbabilities:
    def test_simple_normalization(self):
        rho = to_probabilities(TauVector(np.array([1.0, 1.0, 2.0]), 1.0, 10))
        assert np.allclose(rho.rho, [0.25, 0.25, 0.5])

    def test_zero_entry_gets_floor(self):
        rho = to_probabilities(TauVector(np.array([1.0, 0.0]), 1.0, 10))
        assert rho.rho[1] > 0
        assert rho.rho[0] == pytest.approx(1.0, abs=1e-11)

    def test_scale_invariance(self):
        t = np.array([0.3, 1.1, 2.2])
        a = to_probabilities(TauVector(t, 1.0, 5)).rho
        b = to_probabilities(TauVector(7.0 * t, 1.0, 5)).rho
        assert np.allclose(a, b, rtol=1e-14)

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            to_probabilities(TauVector(np.zeros(3), 1.0, 5))

    def test_permutation_equivariance(self, rng):
        N = l1_norm(4)
        X = rng.standard_normal((30, 4))
        perm = [2, 0, 3, 1]
        Np = SumNorm(4, 1.0, tuple(N.terms[i] for i in perm))
        a = to_probabilities(estimate_tau(N, make_batch(X), 1.0)).rho
        b = to_probabilities(estimate_tau(Np, make_batch(X), 1.0)).rho
        assert np.allclose(b, a[perm], rtol=1e-14)


class TestExactLeverage:
    def test_identity(self):
        rho = exact_leverage_probs([Linear([1.0, 0.0]), Linear([0.0, 1.0])])
        assert np.allclose(rho.rho, [0.5, 0.5])

    def test_repeated_row(self):
        rho = exact_leverage_probs(
            [Linear([1.0, 0.0]), Linear([1.0, 0.0]), Linear([0.0, 1.0])])
        assert np.allclose(rho.rho, [0.25, 0.25, 0.5], atol=1e-12)

    def test_trace_identity_random(self):
        _, A = random_linear_norm(40, 6, seed=9)
        terms = [Linear(a) for a in A]
        rho = exact_leverage_probs(terms)
        lev = np.einsum("ij,ij->i", A, np.linalg.solve(A.T @ A, A.T).T)
        assert abs(lev.sum() - 6.0) <= 1e-10
        assert np.allclose(rho.rho, lev / 6.0, atol=1e-12)

    def test_rank_deficient_warns(self):
        terms = [Linear([1.0, 0.0]), Linear([2.0, 0.0])]
        with pytest.warns(UserWarning, match="rank"):
            rho = exact_leverage_probs(terms)
        assert rho.rho.sum() == pytest.approx(1.0)


class TestAugmentWithLewis:
    def test_zero_alpha_reduces_to_plain(self):
        tau = TauVector(np.array([1.0, 3.0]), 1.0, 5)
        a = augment_with_lewis(tau, np.zeros(2), 1.0).rho
        b = to_probabilities(tau).rho
        assert np.allclose(a, b, atol=1e-11)

    def test_zero_tau_uses_alpha(self):
        tau = TauVector(np.zeros(2), 1.0, 5)
        rho = augment_with_lewis(tau, np.array([1.0, 1.0]), 1.0)
        assert np.allclose(rho.rho, [0.5, 0.5])

    def test_mixed(self):
        tau = TauVector(np.array([1.0, 0.0]), 1.0, 5)
        rho = augment_with_lewis(tau, np.array([0.0, 1.0]), 1.0)
        assert np.allclose(rho.rho, [0.5, 0.5])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            augment_with_lewis(TauVector(np.ones(2), 1.0, 5), np.ones(3), 1.0)


def gaussian_second_moment_numeric(A, i):
    """E <a_i, Z>^2 under density prop. to exp(-||A z||^2), by quadrature (n=2)."""
    a = A[i]

    def dens(y, x):
        z = np.array([x, y])
        return np.exp(-np.sum((A @ z) ** 2))

    def num(y, x):
        z = np.array([x, y])
        return (a @ z) ** 2 * dens(y, x)

    cov = np.linalg.inv(A.T @ A) / 2.0
    lim = 10.0 * np.sqrt(np.linalg.eigvalsh(cov)[-1])
    top = scipy.integrate.dblquad(num, -lim, lim, -lim, lim, epsabs=1e-12)[0]
    bot = scipy.integrate.dblquad(dens, -lim, lim, -lim, lim, epsabs=1e-12)[0]
    return top / bot


def test_gaussian_moment_oracle_matches_leverage_at_n2():
    # E N_i(Z)^2 under exp(-||Ax||^2) equals leverage_i / 2: the covariance
    # of the measure is (A^T A)^-1 / 2
    g = np.random.default_rng(3)
    A = g.standard_normal((3, 2))
    lev = np.einsum("ij,ij->i", A, np.linalg.solve(A.T @ A, A.T).T)
    for i in range(3):
        assert gaussian_second_moment_numeric(A, i) == pytest.approx(lev[i] / 2, rel=1e-5)


def test_factor_two_window_small_trials():
    # tau from the sampler must land in [sigma, 2 sigma] per entry, where
    # sigma_i = leverage_i / 2 comes from the Gaussian oracle
    n, m = 6, 40
    g = np.random.default_rng(17)
    A = g.standard_normal((m, n))
    N = SumNorm(n, 2.0, tuple(Linear(a) for a in A))
    sv = np.linalg.svd(A, compute_uv=False)
    lev = np.einsum("ij,ij->i", A, np.linalg.solve(A.T @ A, A.T).T)
    sigma = lev / 2.0
    k = default_k_tau(n, m + n)
    good = 0
    trials = 8
    for seed in range(trials):
        cfg = SamplerConfig.for_dim(n, seed=seed, chains=64)
        batch = sample_mu(RoundedNorm(N, sv[-1], sv[0]), 2.0, k, cfg)
        tau = estimate_tau(N, batch, 2.0).tau
        if np.all((sigma <= tau) & (tau <= 2 * sigma)):
            good += 1
    assert good >= trials - 1


def test_psi_constant_and_k_tau_formula():
    assert psi_n(1) == pytest.approx(np.sqrt(np.log(3)))
    assert psi_n(100) == pytest.approx(np.sqrt(np.log(100)))
    assert default_k_tau(6, 46) == int(np.ceil(200 * np.sqrt(np.log(6)) * np.log(52)))
