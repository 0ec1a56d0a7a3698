"""Exact fBm synthesis and mixed-Hurst ensembles.

Fractional Gaussian noise is drawn by circulant embedding (Davies and Harte);
fBm is its cumulative sum on the grid ``t = 1..n`` with ``B_H(0) = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .eigen import singular_values
from .errors import DomainError, SynthesisError, ValidationError
from .rng import derive

CLAMP_RTOL = 1e-8
MASS_TOL = 1e-12
# Synthesis supports H in (0, 1), but laws with atoms this close to the
# boundary are refused (downstream quadrature and regression degrade there).
HURST_FLOOR = 0.01
HURST_CEIL = 0.99


def _check_hurst(hurst: float) -> None:
    if not 0.0 < hurst < 1.0:
        raise DomainError(f"Hurst exponent must lie in (0, 1), got {hurst}")


def fgn_autocovariance(hurst: float, k) -> np.ndarray | float:
    """``gamma_H(k) = (|k+1|^2H - 2|k|^2H + |k-1|^2H) / 2``."""
    _check_hurst(hurst)
    scalar = np.ndim(k) == 0
    k = np.abs(np.asarray(k, dtype=float))
    two_h = 2.0 * hurst
    g = 0.5 * ((k + 1.0) ** two_h - 2.0 * k**two_h + np.abs(k - 1.0) ** two_h)
    # for |k| >= 2 factor out k^2H so the second difference does not cancel
    far = k >= 2.0
    if np.any(far):
        kf = k[far] if k.ndim else k
        g_far = 0.5 * kf**two_h * (np.expm1(two_h * np.log1p(1.0 / kf))
                                    + np.expm1(two_h * np.log1p(-1.0 / kf)))
        if k.ndim:
            g[far] = g_far
        else:
            g = g_far
    return float(g) if scalar else g


@dataclass(frozen=True)
class HurstLaw:
    """Discrete law on (0, 1): strictly increasing ``support`` with ``masses``."""

    support: Tuple[float, ...]
    masses: Tuple[float, ...]

    def __post_init__(self):
        support = tuple(float(h) for h in self.support)
        masses = tuple(float(m) for m in self.masses)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "masses", masses)
        if not support or len(support) != len(masses):
            raise ValidationError("A1: Hurst law needs equally many support points and masses (at least one)")
        for h in support:
            if not 0.0 < h < 1.0:
                raise ValidationError(f"A1: support point {h} is not inside (0, 1)")
            if not HURST_FLOOR <= h <= HURST_CEIL:
                raise ValidationError(
                    f"A1: support point {h} is outside [{HURST_FLOOR}, {HURST_CEIL}]; "
                    "atoms this close to 0 or 1 are not supported"
                )
        if any(b <= a for a, b in zip(support, support[1:])):
            raise ValidationError(f"A1: support must be strictly increasing, got {support}")
        if any(m <= 0.0 for m in masses):
            raise ValidationError(f"A1: masses must be strictly positive, got {masses}")
        if abs(math.fsum(masses) - 1.0) > MASS_TOL:
            raise ValidationError(f"A1: masses sum to {math.fsum(masses)!r}, not 1")

    @classmethod
    def parse(cls, text: str) -> "HurstLaw":
        """Parse ``"H:mass,H:mass,..."``; masses may be fractions such as ``1/3``.

        Pairs are sorted by ``H``.
        """
        pairs = []
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            try:
                h, m = item.split(":")
                pairs.append((float(Fraction(h.strip())), float(Fraction(m.strip()))))
            except (ValueError, ZeroDivisionError):
                raise ValidationError(f"A1: cannot parse Hurst law entry {item!r} (expected H:mass)") from None
        pairs.sort()
        return cls(tuple(h for h, _ in pairs), tuple(m for _, m in pairs))

    @classmethod
    def uniform(cls, support: Sequence[float]) -> "HurstLaw":
        support = sorted(support)
        return cls(tuple(support), tuple([1.0 / len(support)] * len(support)))

    @classmethod
    def point(cls, hurst: float) -> "HurstLaw":
        return cls((hurst,), (1.0,))

    def varpi(self) -> float:
        return self.support[0]

    def format(self) -> str:
        return ",".join(f"{h!r}:{m!r}" for h, m in zip(self.support, self.masses))

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self.support), size=size, p=np.asarray(self.masses))
        return np.asarray(self.support)[idx]


@dataclass(frozen=True)
class HurstAssignment:
    values: Tuple[float, ...]
    law: HurstLaw

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        bad = [v for v in self.values if v not in self.law.support]
        if bad:
            raise ValidationError(f"A1: assigned exponents {bad} are not in the law's support")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class MixingSpec:
    kind: str = "identity"
    condition_bound: float = 2.0

    def __post_init__(self):
        if self.kind not in ("identity", "random_conditioned"):
            raise ValidationError(f"unknown mixing kind {self.kind!r}")
        if not (math.isfinite(self.condition_bound) and self.condition_bound >= 1.0):
            raise ValidationError(f"A5: condition bound must be a finite number >= 1, got {self.condition_bound}")

    @classmethod
    def parse(cls, text: str) -> "MixingSpec":
        """``identity`` or ``cond:<bound>``."""
        text = text.strip()
        if text == "identity":
            return cls()
        if text.startswith("cond:"):
            try:
                bound = float(text[5:])
            except ValueError:
                bound = None
            if bound is not None:
                return cls("random_conditioned", bound)
        raise ValidationError(f"mixing must be 'identity' or 'cond:<bound>', got {text!r}")

    def format(self) -> str:
        return "identity" if self.kind == "identity" else f"cond:{self.condition_bound!r}"


class PathMatrix:
    """``p x n`` sample paths; row ``l`` is component ``l`` at times ``1..n``."""

    __slots__ = ("data",)

    def __init__(self, data):
        data = np.array(data, dtype=float)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise ValidationError(f"path matrix must be 2-D, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 2:
            raise ValidationError(f"path matrix needs p >= 1 and n >= 2, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("path matrix has non-finite entries")
        data.setflags(write=False)
        self.data = data

    @property
    def p(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def __repr__(self):
        return f"PathMatrix(p={self.p}, n={self.n})"


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    p: int
    law: HurstLaw
    mixing: MixingSpec = field(default_factory=MixingSpec)
    family: str = "db2"
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError(f"n must be >= 2, got {self.n}")
        if self.p < 1:
            raise ValidationError(f"p must be >= 1, got {self.p}")


class Ensemble(NamedTuple):
    assignment: HurstAssignment
    latent: PathMatrix
    observed: PathMatrix
    mixing: np.ndarray


@lru_cache(maxsize=64)
def _embedding_root(hurst: float, n: int) -> np.ndarray:
    # sqrt(lambda / M) for the circulant of size M = 2m, m >= n - 1 a power of two
    m = 1 << max(1, (n - 1).bit_length())
    lags = np.arange(m + 1)
    gamma = fgn_autocovariance(hurst, lags)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.rfft(row).real
    lam_max = float(lam.max())
    worst = float(lam.min())
    if worst < -CLAMP_RTOL * lam_max:
        raise SynthesisError(
            f"circulant embedding for H={hurst}, n={n} has eigenvalue {worst:.3e} "
            f"(below -{CLAMP_RTOL:g} x max {lam_max:.3e})",
            worst_eigenvalue=worst,
        )
    lam = np.clip(lam, 0.0, None)
    full = np.concatenate([lam, lam[-2:0:-1]])
    root = np.sqrt(full / full.size)
    root.setflags(write=False)
    return root


def _fgn_pairs(hurst: float, n: int, pairs: int, rng: np.random.Generator) -> np.ndarray:
    # each complex FFT yields two independent fGn rows (real and imaginary parts)
    root = _embedding_root(hurst, n)
    z = rng.standard_normal((pairs, 2, root.size))
    w = np.fft.fft(root * (z[:, 0] + 1j * z[:, 1]), axis=1)[:, :n]
    return np.stack([w.real, w.imag], axis=1).reshape(2 * pairs, n)


def synth_fgn(hurst: float, n: int, rng: np.random.Generator, rows: int = 1) -> np.ndarray:
    """``rows x n`` independent fGn samples (a vector when ``rows == 1``)."""
    _check_hurst(hurst)
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    out = _fgn_pairs(hurst, n, (rows + 1) // 2, rng)[:rows]
    return out[0] if rows == 1 else out


def synth_fbm(hurst: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """``B_H(1..n)``: exact fGn by circulant embedding, then cumulative sum."""
    return np.cumsum(synth_fgn(hurst, n, rng))


def realize_mixing(spec: MixingSpec, p: int, rng: np.random.Generator) -> np.ndarray:
    """``I_p``, or ``Q D Q'^T`` with Haar-like orthogonal factors and
    ``D ~ U[1/b, b]`` on the diagonal."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    if spec.kind == "identity":
        return np.eye(p)
    b = spec.condition_bound
    q1 = _random_orthogonal(p, rng)
    q2 = _random_orthogonal(p, rng)
    d = rng.uniform(1.0 / b, b, size=p)
    mix = (q1 * d) @ q2.T
    sv = singular_values(mix)
    slack = 1e-12 * b
    if sv[0] < 1.0 / b - slack or sv[-1] > b + slack:
        raise ValidationError(
            f"A5: realized mixing has singular values [{sv[0]:.6g}, {sv[-1]:.6g}] outside [1/{b}, {b}]"
        )
    return mix


def _random_orthogonal(p: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    return q * np.where(np.diag(r) < 0.0, -1.0, 1.0)


def synth_ensemble(spec: EnsembleSpec, rng: Optional[np.random.Generator] = None) -> Ensemble:
    """Draw exponents from the law, ``p`` independent fBm rows, and ``Y = P X``.

    Draw order: assignment, then paths grouped by exponent in support order,
    then the mixing matrix.  ``rng`` defaults to the stream of ``spec.seed``.
    """
    if rng is None:
        rng = derive(spec.seed)
    values = spec.law.sample(spec.p, rng)
    assignment = HurstAssignment(tuple(values), spec.law)
    x = np.empty((spec.p, spec.n))
    for h in spec.law.support:
        rows = np.flatnonzero(values == h)
        if rows.size:
            x[rows] = np.cumsum(synth_fgn(h, spec.n, rng, rows=rows.size).reshape(rows.size, spec.n), axis=1)
    mix = realize_mixing(spec.mixing, spec.p, rng)
    latent = PathMatrix(x)
    if spec.mixing.kind == "identity":
        observed = PathMatrix(x.copy())
    else:
        observed = PathMatrix(mix @ x)
    return Ensemble(assignment, latent, observed, mix)
