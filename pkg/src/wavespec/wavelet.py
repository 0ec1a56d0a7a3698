"""Mallat pyramid with border-effect accounting, and the second-order oracle
(spectral density and autocovariance) of fixed-octave wavelet coefficients of fBm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np
from scipy.special import roots_legendre

from .errors import DomainError, InsufficientSampleError, QuadratureError
from .filters import WaveletFamily, get_family

ALIAS_TERMS = 64
MAX_ALIAS_TERMS = 1024
ALIAS_RTOL = 1e-7
QUAD_NODES = 2048
QUAD_CHECK_NODES = 4096
QUAD_RTOL = 1e-6


def border_free_count(n: int, support_length: int, octave: int) -> int:
    """``floor(2^-j (n + 1 - T) - T)`` in exact integer arithmetic."""
    scale = 2**octave
    return (n + 1 - support_length - support_length * scale) // scale


@dataclass(frozen=True)
class WaveletPyramid:
    """Border-free detail coefficients of a ``p x n`` path matrix.

    ``details[j]`` is ``p x counts[j]``.  Column ``k`` of octave ``j`` is
    computed from samples ``2^j k + 1 .. 2^j k + (2^j - 1) * taps + 1``
    (1-based) only; ``valid_ranges[j]`` is the retained ``k`` window.
    """

    family: WaveletFamily
    n: int
    p: int
    octaves: Tuple[int, ...]
    details: Dict[int, np.ndarray]
    counts: Dict[int, int]
    valid_ranges: Dict[int, Tuple[int, int]]

    def detail(self, octave: int) -> np.ndarray:
        try:
            return self.details[octave]
        except KeyError:
            raise InsufficientSampleError(
                f"octave {octave} not in pyramid (octaves {self.octaves[0]}..{self.octaves[-1]})",
                octave=octave,
            ) from None


def _analysis_step(approx: np.ndarray, u: np.ndarray, v: np.ndarray):
    # out[k] = sum_m h[m] * approx[2k + m], restricted to fully supported k
    taps = len(u)
    count = (approx.shape[1] - taps) // 2 + 1
    if count < 1:
        return None, None
    stop = 2 * (count - 1) + 1
    a_next = np.zeros((approx.shape[0], count))
    d_next = np.zeros((approx.shape[0], count))
    for m in range(taps):
        window = approx[:, m:m + stop:2]
        a_next += u[m] * window
        d_next += v[m] * window
    return a_next, d_next


def mallat_pyramid(paths, family="db2", max_octave: int = 1) -> WaveletPyramid:
    """Run Mallat's recursion from ``A(2^0, k) = Y(k)`` up to ``max_octave``.

    Only coefficients untouched by the zero extension outside ``1..n`` are
    kept, and of those exactly ``n_j = floor(2^-j (n+1-T) - T)`` per octave.
    """
    family = get_family(family)
    data = np.asarray(getattr(paths, "data", paths), dtype=float)
    if data.ndim == 1:
        data = data[None, :]
    if max_octave < 1:
        raise DomainError(f"max_octave must be >= 1, got {max_octave}")
    p, n = data.shape
    t_len = family.support_length
    for j in range(1, max_octave + 1):
        if border_free_count(n, t_len, j) < 1:
            raise InsufficientSampleError(
                f"octave {j} has no border-free coefficient for n={n} with {family.name} "
                f"(n_j = floor(2^-j (n+1-T) - T) < 1, T={t_len})",
                octave=j,
            )

    details, counts, ranges = {}, {}, {}
    approx = data
    for j in range(1, max_octave + 1):
        approx, d = _analysis_step(approx, family.low_pass, family.high_pass)
        n_j = border_free_count(n, t_len, j)
        details[j] = np.ascontiguousarray(d[:, :n_j])
        counts[j] = n_j
        ranges[j] = (0, n_j)
    return WaveletPyramid(family, n, p, tuple(range(1, max_octave + 1)), details, counts, ranges)


# --- Fourier-domain oracle -------------------------------------------------

def alpha_squared(hurst: float) -> float:
    """``H Gamma(2H) sin(H pi) / pi``, the fBm spectral constant."""
    _check_hurst(hurst)
    return hurst * math.gamma(2.0 * hurst) * math.sin(hurst * math.pi) / math.pi


def _check_hurst(hurst):
    if not 0.0 < hurst < 1.0:
        raise DomainError(f"Hurst exponent must lie in (0, 1), got {hurst}")


def _daubechies_poly(y: np.ndarray, order: int) -> np.ndarray:
    # P(y) = sum_{k<N} C(N-1+k, k) y^k
    out = np.zeros_like(y)
    for k in reversed(range(order)):
        out = out * y + math.comb(order - 1 + k, k)
    return out


def lowpass_power(omega, family="db2") -> np.ndarray:
    """``|m0(omega)|^2 = cos^{2N}(omega/2) P(sin^2(omega/2))`` where
    ``m0(omega) = 2^-1/2 sum_k u_k e^{-i k omega}``."""
    family = get_family(family)
    omega = np.asarray(omega, dtype=float)
    c2 = np.cos(0.5 * omega) ** 2
    return c2**family.vanishing_moments * _daubechies_poly(1.0 - c2, family.vanishing_moments)


def highpass_power(omega, family="db2") -> np.ndarray:
    """``|m1(omega)|^2 = |m0(omega + pi)|^2``, written with the ``sin^{2N}``
    factor explicit so small ``omega`` loses no precision."""
    family = get_family(family)
    omega = np.asarray(omega, dtype=float)
    s2 = np.sin(0.5 * omega) ** 2
    return s2**family.vanishing_moments * _daubechies_poly(1.0 - s2, family.vanishing_moments)


def psi_hat_squared(x, family="db2") -> np.ndarray:
    """``|psi_hat(x)|^2`` from the infinite product of the low-pass filter.

    ``psi_hat(x) = m1(x/2) phi_hat(x/2)`` and ``phi_hat(x) = prod_k m0(x/2^k)``.
    The product stops once ``|x| / 2^k < 1e-3``; beyond that
    ``1 - |m0|^2 = O(omega^{2N}) < 1e-12``.
    """
    family = get_family(family)
    x = np.asarray(x, dtype=float)
    half = x / 2.0
    out = highpass_power(half, family)
    xmax = float(np.max(np.abs(x))) if x.size else 0.0
    depth = max(0, int(math.ceil(math.log2(max(xmax, 1e-3) / 1e-3))))
    scaled = half
    for _ in range(depth):
        scaled = scaled / 2.0
        out = out * lowpass_power(scaled, family)
    return out


@lru_cache(maxsize=32)
def _alias_grid(x_key: bytes, family_name: str, terms: int):
    # |psi_hat(x + 2 pi l)|^2 and |x + 2 pi l| for |l| <= terms; independent of H
    x = np.frombuffer(x_key)
    shifts = 2.0 * np.pi * np.arange(-terms, terms + 1)
    y = x[:, None] + shifts[None, :]
    power = psi_hat_squared(y, family_name)
    ay = np.abs(y)
    missing = np.clip(1.0 - power.sum(axis=1), 0.0, None)
    for arr in (power, ay, missing):
        arr.setflags(write=False)
    return power, ay, missing


def _base_density(x: np.ndarray, hurst: float, family: WaveletFamily,
                  terms: int = ALIAS_TERMS) -> np.ndarray:
    # sum over |l| <= terms of |psi_hat(x + 2 pi l)|^2 / |x + 2 pi l|^{1+2H}
    x = np.ascontiguousarray(x, dtype=float)
    expo = 1.0 + 2.0 * hurst
    while True:
        if x.size > 8192:
            power, ay, missing = _alias_grid.__wrapped__(x.tobytes(), family.name, terms)
        else:
            power, ay, missing = _alias_grid(x.tobytes(), family.name, terms)
        with np.errstate(divide="ignore", invalid="ignore"):
            total = np.where(ay > 0.0, power / ay**expo, 0.0).sum(axis=1)
        if not np.all(np.isfinite(total)):
            raise QuadratureError(f"non-finite spectral density for H={hurst}, {family.name}")
        # sum over all l of |psi_hat|^2 is 1 (orthonormality), which bounds the dropped terms
        tail = missing / (2.0 * np.pi * (terms + 0.5)) ** expo
        if np.all(tail <= ALIAS_RTOL * np.max(total)):
            return total
        if terms >= MAX_ALIAS_TERMS:
            raise QuadratureError(
                f"aliasing tail bound {tail.max():.2e} too large for H={hurst}, {family.name}"
            )
        terms *= 2


def wavelet_spectral_density(hurst: float, x, octave: int, family="db2"):
    """Spectral density ``f_H`` of the octave-``j`` wavelet coefficients of a
    standard fBm, for frequencies ``|x| <= pi``; the autocovariance is
    ``int_{-pi}^{pi} e^{i x kappa} f_H(x) dx``.
    """
    _check_hurst(hurst)
    family = get_family(family)
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(x) > np.pi * (1 + 1e-12)):
        raise DomainError("frequency must lie in [-pi, pi]")
    values = (2.0**octave) ** (1.0 + 2.0 * hurst) * alpha_squared(hurst) * _base_density(x, hurst, family)
    return float(values[0]) if scalar else values


@lru_cache(maxsize=8)
def half_period_nodes(nodes: int):
    """Gauss-Legendre nodes and weights on [0, pi]."""
    t, w = roots_legendre(nodes)
    x = 0.5 * np.pi * (t + 1.0)
    w = 0.5 * np.pi * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def _density_on_nodes(hurst: float, family_name: str, nodes: int):
    # f_H / (2^j)^{1+2H} at Gauss-Legendre nodes on [0, pi]
    x, w = half_period_nodes(nodes)
    f = alpha_squared(hurst) * _base_density(x, hurst, get_family(family_name))
    f.setflags(write=False)
    return x, w, f


def even_fourier_integral(x, w, f, lags) -> np.ndarray:
    """``int_{-pi}^{pi} cos(l x) f(x) dx`` for even ``f`` tabulated on [0, pi]."""
    lags = np.asarray(lags, dtype=float)
    return 2.0 * (np.cos(np.outer(lags, x)) @ (w * f))


def wavelet_autocovariances(hurst: float, octave: int, lags, family="db2") -> np.ndarray:
    """Vector form of :func:`wavelet_autocovariance`.

    Gauss-Legendre quadrature with ``QUAD_NODES`` nodes, checked against
    ``QUAD_CHECK_NODES`` nodes; the finer value is returned.
    """
    _check_hurst(hurst)
    family = get_family(family)
    lags = np.abs(np.atleast_1d(np.asarray(lags, dtype=int)))
    probe = np.unique(np.concatenate([[0], lags]))
    coarse = even_fourier_integral(*_density_on_nodes(hurst, family.name, QUAD_NODES), probe)
    fine = even_fourier_integral(*_density_on_nodes(hurst, family.name, QUAD_CHECK_NODES), probe)
    err = np.max(np.abs(coarse - fine))
    if not err <= QUAD_RTOL * fine[0]:
        raise QuadratureError(
            f"autocovariance quadrature error {err:.2e} exceeds {QUAD_RTOL:g} x variance "
            f"(H={hurst}, octave {octave}, {family.name})"
        )
    scale = (2.0**octave) ** (1.0 + 2.0 * hurst)
    return scale * fine[np.searchsorted(probe, lags)]


def wavelet_autocovariance(hurst: float, octave: int, kappa: int, family="db2") -> float:
    """``E[d(2^j, k + kappa) d(2^j, k) | H]`` for continuous-time wavelet
    coefficients of a standard fBm with exponent ``hurst``."""
    return float(wavelet_autocovariances(hurst, octave, [kappa], family)[0])
