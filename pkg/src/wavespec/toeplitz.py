"""Symmetric Toeplitz matrices generated by spectral densities, Gray's
eigenvalue bounds, and the conditional covariance of octave-``j`` wavelet
coefficients given the Hurst exponent.

Symbols follow ``tau(l) = (1/2pi) int_{-pi}^{pi} f(x) e^{-i l x} dx``.  The
wavelet autocovariance carries no ``1/2pi``, so its Toeplitz generator is
``2 pi f_H`` (see :func:`wavelet_symbol`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import eigen
from .errors import DomainError, QuadratureError, RankError, ValidationError
from .filters import get_family
from .wavelet import (QUAD_CHECK_NODES, QUAD_NODES, QUAD_RTOL, even_fourier_integral,
                      half_period_nodes, wavelet_autocovariances, wavelet_spectral_density)

GRAY_GRID = 4096
DECAY_CONSTANT = 4.0
DECAY_EXPONENT = 1.5
ROOT_RTOL = 1e-9


@dataclass(frozen=True)
class ToeplitzSpec:
    """An ``m x m`` symmetric Toeplitz matrix given by an even generator
    ``f`` on ``[-pi, pi]`` (vectorized callable) or by ``tau(0), tau(1), ...``.

    A short symbol is zero-padded to ``m`` lags.
    """

    size: int
    generator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    symbol: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.size < 1:
            raise ValidationError(f"Toeplitz size must be >= 1, got {self.size}")
        if (self.generator is None) == (self.symbol is None):
            raise ValidationError("give exactly one of generator and symbol")
        if self.symbol is not None:
            tau = np.asarray(self.symbol, dtype=float)
            if tau.ndim != 1 or tau.size < 1 or not np.all(np.isfinite(tau)):
                raise ValidationError("symbol must be a non-empty finite sequence tau(0), tau(1), ...")
            object.__setattr__(self, "symbol", tuple(tau.tolist()))

    def lags(self) -> np.ndarray:
        """``tau(0..size-1)``."""
        if self.symbol is not None:
            tau = np.zeros(self.size)
            head = np.asarray(self.symbol[: self.size])
            tau[: head.size] = head
            return tau
        return generator_symbol(self.generator, self.size)


def generator_symbol(f: Callable[[np.ndarray], np.ndarray], size: int) -> np.ndarray:
    """Fourier coefficients ``tau(0..size-1)`` of an even ``f`` by the same
    Gauss-Legendre rule (and accuracy check) as the wavelet autocovariance."""
    lags = np.arange(size)

    def integrate(nodes):
        x, w = half_period_nodes(nodes)
        fx = np.asarray(f(x), dtype=float)
        if fx.shape != x.shape or not np.all(np.isfinite(fx)):
            raise QuadratureError("generator returned non-finite or mis-shaped values")
        return even_fourier_integral(x, w, fx, lags) / (2.0 * np.pi)

    coarse, fine = integrate(QUAD_NODES), integrate(QUAD_CHECK_NODES)
    err = float(np.max(np.abs(coarse - fine)))
    scale = max(abs(fine[0]), float(np.max(np.abs(fine))))
    if err > QUAD_RTOL * scale:
        raise QuadratureError(f"symbol quadrature error {err:.2e} exceeds {QUAD_RTOL:g} x tau(0)")
    return fine


def toeplitz_from_lags(tau: np.ndarray) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    idx = np.arange(tau.size)
    return tau[np.abs(idx[:, None] - idx[None, :])]


def build_toeplitz(spec: ToeplitzSpec) -> np.ndarray:
    """Entry ``(i, k)`` is ``tau(i - k)``."""
    return toeplitz_from_lags(spec.lags())


class GrayBounds(NamedTuple):
    lower: float
    upper: float


def gray_bounds(spec: ToeplitzSpec, grid: int = GRAY_GRID, refine: bool = True) -> GrayBounds:
    """Approximate ``(ess inf f, ess sup f)`` on a uniform grid of ``grid + 1``
    points spanning ``[-pi, pi]`` (0 included for even ``grid``).

    With ``refine``, each grid extremum is polished by a bounded scalar search
    over its two neighbouring cells.
    """
    if spec.generator is None:
        raise DomainError("Gray bounds need the generator form of the Toeplitz spec")
    if grid < GRAY_GRID:
        raise DomainError(f"grid must have at least {GRAY_GRID} points, got {grid}")
    f = spec.generator
    x = np.linspace(-np.pi, np.pi, grid + 1)
    fx = np.asarray(f(x), dtype=float)
    lo, hi = float(fx.min()), float(fx.max())
    if refine:
        lo = min(lo, _polish(f, x, int(np.argmin(fx)), 1.0))
        hi = max(hi, -_polish(f, x, int(np.argmax(fx)), -1.0))
    return GrayBounds(lo, hi)


def _polish(f, x, i, sign) -> float:
    a, b = x[max(i - 1, 0)], x[min(i + 1, x.size - 1)]
    res = minimize_scalar(lambda t: sign * float(np.asarray(f(np.array([t])))[0]),
                          bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    return float(res.fun)


def wavelet_symbol(hurst: float, octave: int, family="db2") -> Callable[[np.ndarray], np.ndarray]:
    """``2 pi f_H``: the generator whose symbol is the wavelet autocovariance."""
    family = get_family(family)

    def f(x):
        return 2.0 * np.pi * wavelet_spectral_density(hurst, np.asarray(x, dtype=float), octave, family)

    return f


@dataclass(frozen=True)
class ConditionalCovariance:
    hurst: float
    octave: int
    size: int
    sigma: np.ndarray
    root: np.ndarray
    eigenvalues: np.ndarray


def check_decay(tau: np.ndarray, constant: float = DECAY_CONSTANT,
                exponent: float = DECAY_EXPONENT) -> None:
    """Empirical Wiener-class check ``|tau(l)| <= tau(0) C / (1+|l|)^exponent``."""
    lags = np.arange(tau.size)
    bound = tau[0] * constant / (1.0 + lags) ** exponent
    bad = np.flatnonzero(np.abs(tau) > bound)
    if bad.size:
        l = int(bad[0])
        raise QuadratureError(
            f"symbol decay check failed at lag {l}: |tau| = {abs(tau[l]):.3e} > {bound[l]:.3e}"
        )


def conditional_covariance(hurst: float, octave: int, size: int, family="db2") -> ConditionalCovariance:
    """``Sigma_H`` (Toeplitz in the wavelet autocovariance) and its symmetric
    square root ``Gamma_H``.

    Raises :class:`RankError` if ``Sigma_H`` is numerically singular, which
    would contradict its full rank and points at a quadrature failure.
    """
    if size < 1:
        raise DomainError(f"size must be >= 1, got {size}")
    tau = wavelet_autocovariances(hurst, octave, np.arange(size), family)
    check_decay(tau)
    sigma = toeplitz_from_lags(tau)
    dec = eigen.eigh(sigma)
    lam = dec.eigenvalues
    floor = size * np.finfo(float).eps * lam[-1]
    if lam[0] <= floor:
        raise RankError(
            f"Sigma_H is not positive definite (H={hurst}, octave {octave}, size {size}): "
            f"smallest eigenvalue {lam[0]:.3e} <= {floor:.3e}"
        )
    v = dec.eigenvectors
    root = (v * np.sqrt(lam)) @ v.T
    resid = np.linalg.norm(root @ root - sigma) / np.linalg.norm(sigma)
    if resid > ROOT_RTOL:
        raise RankError(f"square root residual {resid:.2e} exceeds {ROOT_RTOL:g}")
    for arr in (sigma, root, lam):
        arr.setflags(write=False)
    return ConditionalCovariance(float(hurst), int(octave), int(size), sigma, root, lam)
