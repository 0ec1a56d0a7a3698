import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from wavespec.errors import DomainError, InsufficientSampleError
from wavespec.filters import daubechies, get_family
from wavespec.rng import derive
from wavespec.synth import PathMatrix, synth_fgn
from wavespec.wavelet import (alpha_squared, border_free_count, highpass_power, lowpass_power,
                              mallat_pyramid, psi_hat_squared, wavelet_autocovariance,
                              wavelet_autocovariances, wavelet_spectral_density)

from oracles import daubechies_taps_mp, wavelet_covariance_time_domain

ORDERS = range(2, 9)


class TestFilters:
    @pytest.mark.parametrize("order", ORDERS)
    def test_taps_match_spectral_factorization(self, order):
        assert np.allclose(daubechies(order).low_pass, daubechies_taps_mp(order), rtol=0, atol=1e-15)

    def test_db2_closed_form(self):
        r3, d = math.sqrt(3), 4 * math.sqrt(2)
        expected = [(1 + r3) / d, (3 + r3) / d, (3 - r3) / d, (1 - r3) / d]
        assert np.allclose(daubechies(2).low_pass, expected, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("order", ORDERS)
    def test_normalization_and_moments(self, order):
        fam = daubechies(order)
        u, v = fam.low_pass, fam.high_pass
        assert abs(u.sum() - math.sqrt(2)) < 1e-12
        assert abs(u @ u - 1) < 1e-12 and abs(v @ v - 1) < 1e-12
        k = np.arange(u.size, dtype=float)
        for p in range(order):
            assert abs((k**p) @ v) < 1e-9 * max(1.0, float(np.abs(k**p).max()))
        assert fam.support_length == 2 * order - 1

    @pytest.mark.parametrize("order", ORDERS)
    def test_orthonormal_shifts(self, order):
        fam = daubechies(order)
        u, v = fam.low_pass, fam.high_pass
        L = u.size
        for m in range(-(L // 2) + 1, L // 2):
            s = slice(max(0, -2 * m), min(L, L - 2 * m))
            t = slice(max(0, 2 * m), min(L, L + 2 * m))
            delta = 1.0 if m == 0 else 0.0
            assert abs(u[s] @ u[t] - delta) < 1e-12
            assert abs(v[s] @ v[t] - delta) < 1e-12
            assert abs(u[s] @ v[t]) < 1e-12

    @pytest.mark.parametrize("bad", [1, 9, "haar", "db1"])
    def test_unknown_family(self, bad):
        with pytest.raises(DomainError):
            get_family(bad)

    @pytest.mark.parametrize("order", [2, 5, 8])
    def test_power_complementary(self, order):
        w = np.linspace(-np.pi, np.pi, 257)
        total = lowpass_power(w, order) + highpass_power(w, order)
        assert np.allclose(total, 1.0, atol=1e-14)
        # closed form agrees with |m0|^2 computed from the taps
        u = daubechies(order).low_pass
        m0 = np.exp(-1j * np.outer(w, np.arange(u.size))) @ u / math.sqrt(2)
        assert np.allclose(np.abs(m0) ** 2, lowpass_power(w, order), atol=1e-14)

    def test_psi_hat_partition_of_unity(self):
        x = np.linspace(-np.pi, np.pi, 33)
        total = psi_hat_squared(x[:, None] + 2 * np.pi * np.arange(-400, 401), "db3").sum(axis=1)
        assert np.allclose(total, 1.0, atol=1e-4)


class TestPyramid:
    def test_constant_signal(self):
        pyr = mallat_pyramid(np.full((2, 1000), 3.7), "db2", 5)
        for j in pyr.octaves:
            assert np.max(np.abs(pyr.detail(j))) < 1e-10

    @pytest.mark.parametrize("order", [2, 3, 4])
    def test_linear_signal(self, order):
        pyr = mallat_pyramid(np.arange(1.0, 2001.0), order, 4)
        for j in pyr.octaves:
            assert np.max(np.abs(pyr.detail(j))) < 1e-8

    def test_polynomial_up_to_order(self):
        t = np.arange(1.0, 4097.0) / 4096
        pyr = mallat_pyramid(3 * t**3 - t**2 + 2, "db4", 3)
        for j in pyr.octaves:
            assert np.max(np.abs(pyr.detail(j))) < 1e-9

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 5000), st.integers(2, 8), st.integers(1, 6))
    def test_counts_match_closed_form(self, n, order, j):
        T = 2 * order - 1
        expected = math.floor(2.0**-j * (n + 1 - T) - T)
        assert border_free_count(n, T, j) == expected
        if expected >= 1 and all(border_free_count(n, T, i) >= 1 for i in range(1, j + 1)):
            pyr = mallat_pyramid(np.zeros(n), order, j)
            assert pyr.counts[j] == expected and pyr.detail(j).shape == (1, expected)
            assert pyr.valid_ranges[j] == (0, expected)

    def test_border_free_against_direct_convolution(self):
        # octave-j coefficients equal the full-support correlation with the
        # equivalent filter h_j applied to the unextended samples
        fam = daubechies(3)
        y = derive(1).standard_normal(700)
        pyr = mallat_pyramid(y, fam, 3)
        u, v = fam.low_pass, fam.high_pass

        def up(f, s):
            out = np.zeros((f.size - 1) * s + 1)
            out[::s] = f
            return out

        approx = np.array([1.0])
        for j in range(1, 4):
            h = np.convolve(approx, up(v, 2 ** (j - 1)))
            coeffs = np.array([h @ y[2**j * k: 2**j * k + h.size] for k in range(pyr.counts[j])])
            assert np.allclose(pyr.detail(j)[0], coeffs, atol=1e-12)
            assert 2**j * (pyr.counts[j] - 1) + h.size <= y.size
            approx = np.convolve(approx, up(u, 2 ** (j - 1)))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**31))
    def test_linearity(self, a, b, seed):
        rng = derive(seed)
        y1, y2 = rng.standard_normal((2, 3, 600))
        p1, p2 = mallat_pyramid(y1, "db2", 4), mallat_pyramid(y2, "db2", 4)
        pc = mallat_pyramid(a * y1 + b * y2, "db2", 4)
        for j in pc.octaves:
            assert np.allclose(pc.detail(j), a * p1.detail(j) + b * p2.detail(j), rtol=0, atol=1e-12 * 40)

    def test_white_noise_energy(self):
        y = derive(2).standard_normal((50, 4096))
        pyr = mallat_pyramid(y, "db3", 4)
        for j in pyr.octaves:
            d = pyr.detail(j)
            # orthonormal analysis of white noise gives i.i.d. N(0, 1) details
            assert abs(np.mean(d**2) - 1.0) < 5 * math.sqrt(2.0 / d.size)

    def test_insufficient_sample_names_octave(self):
        with pytest.raises(InsufficientSampleError) as info:
            mallat_pyramid(np.zeros(40), "db2", 4)
        assert info.value.octave == 4 and "octave 4" in str(info.value)
        pyr = mallat_pyramid(np.zeros(40), "db2", 2)
        with pytest.raises(InsufficientSampleError):
            pyr.detail(3)

    def test_accepts_path_matrix(self):
        pm = PathMatrix(derive(3).standard_normal((2, 128)))
        assert mallat_pyramid(pm, "db2", 2).p == 2

    @pytest.mark.parametrize("h", [0.2, 0.5, 0.8])
    def test_scaling_slope(self, h):
        rng = derive(12, int(10 * h))
        x = np.cumsum(synth_fgn(h, 2**14, rng, rows=8), axis=1)
        pyr = mallat_pyramid(x, "db2", 8)
        js = np.arange(4, 9)
        logs = [math.log2(np.mean(pyr.detail(j) ** 2)) for j in js]
        slope = np.polyfit(js, logs, 1)[0]
        assert abs(slope - (2 * h + 1)) < 0.1


class TestSpectralDensity:
    def test_alpha_squared_half(self):
        assert alpha_squared(0.5) == pytest.approx(1 / (2 * math.pi), rel=1e-15)

    @pytest.mark.parametrize("h", [0.2, 0.5, 0.8])
    def test_even_and_positive(self, h):
        x = np.linspace(0, np.pi, 97)
        f_pos = wavelet_spectral_density(h, x, 2)
        f_neg = wavelet_spectral_density(h, -x, 2)
        assert np.allclose(f_pos, f_neg, rtol=1e-12)
        assert np.all(f_pos > 0)

    def test_domain(self):
        with pytest.raises(DomainError):
            wavelet_spectral_density(0.5, 4.0, 0)
        with pytest.raises(DomainError):
            wavelet_spectral_density(1.0, 0.0, 0)

    def test_scalar_input(self):
        assert isinstance(wavelet_spectral_density(0.5, 0.3, 1), float)

    @pytest.mark.parametrize("h", [0.2, 0.5, 0.8])
    def test_variance_is_integral(self, h):
        # covariance at lag 0 equals the integral of f over [-pi, pi]
        x = np.linspace(-np.pi, np.pi, 20001)
        integral = trapezoid(wavelet_spectral_density(h, x, 1), x)
        assert integral == pytest.approx(wavelet_autocovariance(h, 1, 0), rel=1e-6)


class TestAutocovariance:
    @pytest.mark.parametrize("order", [2, 3])
    @pytest.mark.parametrize("h", [0.2, 0.5, 0.8])
    def test_time_domain_oracle(self, order, h):
        fam = daubechies(order)
        lags = [0, 1, 2, 3, 5]
        oracle = wavelet_covariance_time_domain(fam.low_pass, fam.high_pass, h, lags, level=11)
        ours = wavelet_autocovariances(h, 0, lags, fam)
        assert np.max(np.abs(oracle - ours)) < 1e-3 * ours[0]

    def test_brownian_db2_values(self):
        # the time-domain oracle also gives 1/3600 at lag 2; db2 has support 3
        # so lag 3 vanishes for Brownian motion
        cov = wavelet_autocovariances(0.5, 0, [0, 1, 2, 3], "db2")
        assert cov[2] == pytest.approx(1 / 3600, rel=1e-6)
        assert abs(cov[3]) < 1e-12

    @pytest.mark.parametrize("h", [0.2, 0.5, 0.8])
    def test_octave_scaling(self, h):
        v = [wavelet_autocovariance(h, j, 0) for j in range(5)]
        for a, b in zip(v, v[1:]):
            assert b / a == pytest.approx(2 ** (1 + 2 * h), rel=1e-6)

    def test_symmetric_and_decaying(self):
        lags = np.arange(-20, 21)
        cov = wavelet_autocovariances(0.8, 2, lags)
        assert np.array_equal(cov, cov[::-1])
        mags = np.abs(cov[20:])
        assert mags[0] > mags[1] and mags[0] == cov.max()
        assert np.all(mags[5:] < 0.05 * mags[0])

    @pytest.mark.parametrize("h", [0.2, 0.5, 0.8])
    def test_pyramid_details_match_theory(self, h):
        # at a coarse enough octave the discrete coefficients track the continuous ones
        j = 5
        x = np.cumsum(synth_fgn(h, 2**13, derive(31, int(10 * h)), rows=64), axis=1)
        d = mallat_pyramid(x, "db2", j).detail(j)
        for kappa in (0, 1):
            prods = np.mean(d[:, kappa:] * d[:, : d.shape[1] - kappa], axis=1)
            se = prods.std(ddof=1) / math.sqrt(prods.size)
            theory = wavelet_autocovariance(h, j, kappa)
            assert abs(prods.mean() - theory) <= 0.05 * abs(wavelet_autocovariance(h, j, 0)) + 3 * se
