import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import logsumexp

from dyncomp.covariance import CrossCovSet, assemble_block_toeplitz
from dyncomp.errors import (ApproximationDomainError, DegenerateCovarianceError,
                            InvalidArgumentError, JitterRequiredError, SpectralFloorError)
from dyncomp.predinfo import (cholesky_logdet, freq_pi_autocov_grad, gaussian_lagged_mi,
                              lag_window, mi_knn, pi_analytic_exponential,
                              pi_analytic_squared_exponential, pi_freq_domain, pi_time_domain)
from dyncomp.synth import ar1_crosscov, gp_generate, kernel_autocov

from conftest import random_var1_covs, white_covs

# Asymptotic PI of the sampled squared-exponential kernel, tau = 4, computed
# from the Poisson-summed spectrum log S(w) = log(tau sqrt(pi)) +
# logsumexp_m(-tau^2 (w + 2 pi m)^2 / 4) and the full cepstral sum
# (see exact_se_pi below; independent of the package's spectral code).
SE_TAU4_DISCRETE = 38.29646421884494


def exact_se_pi(tau, M=4096):
    w = 2 * np.pi * np.arange(M) / M
    w = np.where(w > np.pi, w - 2 * np.pi, w)
    m = np.arange(-5, 6)[:, None]
    logS = np.log(tau * np.sqrt(np.pi)) + logsumexp(-tau ** 2 * (w + 2 * np.pi * m) ** 2 / 4, axis=0)
    b = np.fft.ifft(logS).real
    k = np.arange(1, M // 2)
    return 0.5 * np.sum(k * b[1:M // 2] ** 2)


def gaussian_entropy(S):
    return 0.5 * np.linalg.slogdet(2 * np.pi * np.e * S)[1]


class TestTimeDomain:
    @pytest.mark.parametrize("T", [1, 3, 7])
    def test_white_noise_is_zero(self, T):
        assert abs(pi_time_domain(white_covs(3, 2 * T), T).value) < 1e-12

    def test_ar1_tau2(self):
        est = pi_time_domain(ar1_crosscov(2.0, 2), 1)
        assert est.value == pytest.approx(-0.5 * np.log(1 - np.exp(-1.0)), abs=1e-12)
        assert est.value == pytest.approx(0.2292, abs=5e-4)

    def test_entropy_oracle(self, rng):
        covs = random_var1_covs(rng, 2, 4)
        T = 2
        S2 = assemble_block_toeplitz(covs, 2 * T).dense
        ref = 2 * gaussian_entropy(S2[:2 * T, :2 * T]) - gaussian_entropy(S2)
        assert pi_time_domain(covs, T).value == pytest.approx(ref, rel=1e-10)

    @given(st.integers(0, 2**31), st.integers(1, 3))
    def test_mixing_invariance(self, seed, T):
        r = np.random.default_rng(seed)
        covs = random_var1_covs(r, 3, 2 * T)
        A = r.standard_normal((3, 3)) + 3 * np.eye(3)
        mixed = CrossCovSet(np.einsum("ji,kjl,lm->kim", A, covs.lags, A))
        assert abs(pi_time_domain(mixed, T).value - pi_time_domain(covs, T).value) < 1e-8

    def test_time_reversal_invariance(self, var1_covs):
        a = pi_time_domain(var1_covs, 3).value
        b = pi_time_domain(var1_covs.time_reversed(), 3).value
        assert a == pytest.approx(b, abs=1e-10)

    def test_nondecreasing_in_t(self):
        covs = ar1_crosscov(7.0, 40)
        vals = [pi_time_domain(covs, T).value for T in range(1, 21)]
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))

    def test_nonnegative(self, var1_covs):
        assert pi_time_domain(var1_covs, 2).value >= -1e-9

    def test_degenerate_raises_and_regularize_rescues(self):
        lags = np.zeros((2, 2, 2))
        lags[0] = [[1.0, 1.0], [1.0, 1.0]]
        covs = CrossCovSet(lags)
        with pytest.raises(DegenerateCovarianceError) as info:
            pi_time_domain(covs, 1)
        assert info.value.condition > 1e12
        est = pi_time_domain(covs, 1, regularize=True)
        assert est.diagnostics["shift_applied"] > 0

    def test_needs_enough_lags(self, var1_covs):
        with pytest.raises(InvalidArgumentError):
            pi_time_domain(var1_covs, 5)
        with pytest.raises(InvalidArgumentError):
            pi_time_domain(var1_covs, 0)


class TestFreqDomain:
    def test_squared_exponential_asymptote(self):
        f = kernel_autocov("squared_exponential", 4.0, 1024)
        value = pi_freq_domain(autocov=f, T=512).value
        assert abs(value / pi_analytic_squared_exponential(4.0).value - 1) < 0.10
        assert abs(value / SE_TAU4_DISCRETE - 1) < 0.05

    def test_discrete_oracle_is_frozen(self):
        assert exact_se_pi(4.0) == pytest.approx(SE_TAU4_DISCRETE, rel=1e-12)

    def test_ar1_matches_time_domain(self):
        tau, T = 10.0, 256
        f = kernel_autocov("exponential", tau, 2 * T)
        freq = pi_freq_domain(autocov=f, T=T).value
        time = pi_time_domain(ar1_crosscov(tau, 2 * T), T).value
        assert abs(freq / time - 1) < 0.05

    def test_white_noise_series(self, rng):
        est = pi_freq_domain(rng.standard_normal(100_000), T=8)
        assert abs(est.value) < 0.02

    def test_series_matches_time_domain(self):
        y = gp_generate("exponential", 5.0, 200_000, seed=11)
        freq = pi_freq_domain(y.data[:, 0], T=32).value
        assert freq == pytest.approx(pi_analytic_exponential(5.0).value, rel=0.05)

    def test_needs_single_channel(self, rng):
        with pytest.raises(InvalidArgumentError):
            pi_freq_domain(rng.standard_normal((100, 2)), T=2)

    def test_exactly_one_input(self):
        with pytest.raises(InvalidArgumentError):
            pi_freq_domain(T=2)
        with pytest.raises(InvalidArgumentError):
            pi_freq_domain(np.zeros(10), T=2, autocov=np.ones(4))

    def test_spectral_floor(self):
        f = kernel_autocov("squared_exponential", 4.0, 1024)
        est = pi_freq_domain(autocov=f, T=512)
        assert est.diagnostics["n_clamped"] > 0
        with pytest.raises(SpectralFloorError):
            pi_freq_domain(autocov=f, T=512, clamp_nonpositive=False)

    @pytest.mark.parametrize("window_fn", ["hann", "none"])
    def test_autocov_gradient(self, window_fn):
        f = kernel_autocov("exponential", 3.0, 8)
        value, grad = freq_pi_autocov_grad(f, 4, window_fn)
        h = 1e-6
        for k in range(8):
            e = np.zeros(8)
            e[k] = h
            fd = (freq_pi_autocov_grad(f + e, 4, window_fn)[0]
                  - freq_pi_autocov_grad(f - e, 4, window_fn)[0]) / (2 * h)
            assert fd == pytest.approx(grad[k], rel=1e-5, abs=1e-8)

    def test_lag_window_normalized(self):
        w = lag_window(8)
        assert w[0] == 1.0 and w.size == 16 and np.all(np.diff(w) <= 1e-15)


class TestAnalytic:
    def test_exponential_values(self):
        assert pi_analytic_exponential(1.0).value == pytest.approx(0.0726, abs=5e-4)
        v = pi_analytic_exponential(100.0).value
        assert v == pytest.approx(1.961, abs=1e-3)
        assert abs(v / (0.5 * np.log(50.0)) - 1) < 0.003
        assert pi_analytic_exponential(1e-3).value < 1e-12

    @pytest.mark.parametrize("tau", [1.0, 5.0, 100.0])
    @pytest.mark.parametrize("T", [1, 4, 16])
    def test_exponential_matches_time_domain(self, tau, T):
        td = pi_time_domain(ar1_crosscov(tau, 2 * T), T).value
        assert abs(td - pi_analytic_exponential(tau).value) < 1e-9

    def test_squared_exponential(self):
        assert pi_analytic_squared_exponential(10.0).value == pytest.approx(1502.6, abs=0.1)
        ratio = pi_analytic_squared_exponential(8.0).value / pi_analytic_squared_exponential(4.0).value
        assert ratio == pytest.approx(16.0, rel=1e-14)
        with pytest.raises(ApproximationDomainError):
            pi_analytic_squared_exponential(1.5)

    def test_exponential_domain(self):
        with pytest.raises(InvalidArgumentError):
            pi_analytic_exponential(0.0)


class TestKnn:
    def test_independent(self, rng):
        est = mi_knn(rng.standard_normal(10_000), rng.standard_normal(10_000))
        assert abs(est.value) < 0.03

    def test_correlated_gaussians(self, rng):
        rho = 0.9
        x = rng.standard_normal(10_000)
        y = rho * x + np.sqrt(1 - rho ** 2) * rng.standard_normal(10_000)
        assert abs(mi_knn(x, y, k=3).value + 0.5 * np.log(1 - rho ** 2)) < 0.05

    def test_duplicates_need_jitter(self):
        x = np.repeat(np.arange(30.0), 4)
        with pytest.raises(JitterRequiredError):
            mi_knn(x, x)

    def test_argument_checks(self, rng):
        with pytest.raises(InvalidArgumentError):
            mi_knn(rng.standard_normal(40), rng.standard_normal(40))
        with pytest.raises(InvalidArgumentError):
            mi_knn(rng.standard_normal(60), rng.standard_normal(61))
        with pytest.raises(InvalidArgumentError):
            mi_knn(rng.standard_normal(60), rng.standard_normal(60), k=0)


def test_gaussian_lagged_mi_scalar():
    rho = 0.6
    C0 = np.eye(1)
    C1 = np.array([[rho]])
    assert gaussian_lagged_mi(C0, C1, np.ones(1)) == pytest.approx(-0.5 * np.log(1 - rho ** 2))


def test_cholesky_logdet():
    S = np.diag([2.0, 3.0])
    assert cholesky_logdet(S) == pytest.approx(np.log(6.0))
    with pytest.raises(DegenerateCovarianceError):
        cholesky_logdet(-S)
