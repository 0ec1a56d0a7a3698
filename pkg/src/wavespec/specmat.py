"""Wavelet random matrices, rescaled log-eigenvalue spectra, the target law
``F_{2H+1}``, and multiscale Hurst estimation from eigenvalue log-regression.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from . import eigen
from .errors import DegenerateSpectrumError, DomainError, RegimeError, ValidationError
from .synth import HurstLaw
from .wavelet import WaveletPyramid

KS_EPSILON = 0.1


@dataclass(frozen=True)
class WaveletMatrix:
    """``W(a 2^j) = (1/n_aj) sum_k D(a 2^j, k) D(a 2^j, k)^T`` over border-free ``k``.

    ``pyramid_octave`` is ``log2(a) + octave``.
    """

    octave: int
    scale: int
    matrix: np.ndarray
    count: int

    @property
    def pyramid_octave(self) -> int:
        return int(round(math.log2(self.scale))) + self.octave

    @property
    def p(self) -> int:
        return self.matrix.shape[0]


def _scale_exponent(scale: int) -> int:
    m = int(scale).bit_length() - 1
    if scale < 1 or 1 << m != scale:
        raise DomainError(f"scale must be a power of two >= 1, got {scale}")
    return m


def wavelet_matrix_from_details(details: np.ndarray, scale: int, octave: int = 0) -> WaveletMatrix:
    d = np.asarray(details, dtype=float)
    p, count = d.shape
    if count < p:
        raise RegimeError(
            f"A4: p < n/(a 2^j) fails at scale {scale}, octave {octave}: "
            f"{count} border-free coefficients for dimension p={p}"
        )
    w = (d @ d.T) / count
    w = 0.5 * (w + w.T)
    w.setflags(write=False)
    return WaveletMatrix(octave, scale, w, count)


def wavelet_matrix(pyramid: WaveletPyramid, octave_total: int, octave: int = 0) -> WaveletMatrix:
    """Wavelet random matrix at pyramid octave ``octave_total``, read as scale
    ``a = 2^(octave_total - octave)`` at fixed octave ``j = octave``."""
    if octave_total < octave or octave < 0:
        raise DomainError(f"need 0 <= octave <= octave_total, got {octave} and {octave_total}")
    scale = 2 ** (octave_total - octave)
    return wavelet_matrix_from_details(pyramid.detail(octave_total), scale, octave)


@dataclass(frozen=True)
class LogSpectrum:
    """Ascending ``ln(lambda_l) / ln(a)`` with the eigenvalues they came from."""

    values: np.ndarray
    eigenvalues: np.ndarray
    scale: int
    octave: int

    def __len__(self):
        return self.values.size

    def cdf(self, upsilon) -> np.ndarray:
        """Empirical CDF (right-continuous)."""
        return np.searchsorted(self.values, upsilon, side="right") / self.values.size


def log_spectrum(w: WaveletMatrix) -> LogSpectrum:
    if w.scale < 2:
        raise DomainError(f"log spectrum needs scale a >= 2, got {w.scale}")
    lam = eigen.eigvalsh(w.matrix)
    bad = np.flatnonzero(lam <= 0.0)
    if bad.size:
        rank = int(bad[-1]) + 1
        raise DegenerateSpectrumError(
            f"eigenvalue lambda_{rank} = {lam[bad[-1]]:.3e} is not positive "
            f"(p={lam.size}, n_aj={w.count}); the A4 regime p < n/(a 2^j) is likely violated",
            rank=rank,
        )
    values = np.log(lam) / math.log(w.scale)
    return LogSpectrum(values, lam, w.scale, w.octave)


@dataclass(frozen=True)
class TargetLaw:
    """``F_{2H+1}``: atoms ``2H + 1`` with the Hurst law's masses."""

    atoms: Tuple[float, ...]
    masses: Tuple[float, ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.atoms, self.atoms[1:])):
            raise ValidationError("target atoms must be strictly increasing")
        if len(self.atoms) != len(self.masses) or not self.atoms:
            raise ValidationError("target law needs equally many atoms and masses")

    @classmethod
    def from_hurst_law(cls, law: HurstLaw) -> "TargetLaw":
        return cls(tuple(2.0 * h + 1.0 for h in law.support), tuple(law.masses))


def target_cdf(law: TargetLaw, upsilon):
    """Right-continuous step CDF of ``law`` at ``upsilon`` (scalar or array)."""
    scalar = np.ndim(upsilon) == 0
    cum = np.concatenate([[0.0], np.cumsum(law.masses)])
    cum[-1] = 1.0
    out = cum[np.searchsorted(np.asarray(law.atoms), np.asarray(upsilon, dtype=float), side="right")]
    return float(out) if scalar else out


def ks_grid(values: np.ndarray, law: TargetLaw, epsilon: float = KS_EPSILON) -> np.ndarray:
    """Atoms shifted by ``+-epsilon``, plus spectrum points at least ``epsilon``
    away from every atom (the target CDF is flat there)."""
    atoms = np.asarray(law.atoms)
    values = np.asarray(values, dtype=float)
    far = np.min(np.abs(values[:, None] - atoms[None, :]), axis=1) >= epsilon
    return np.concatenate([atoms - epsilon, atoms + epsilon, values[far]])


def ks_distance(spectrum: Union[LogSpectrum, Sequence[float]], law: TargetLaw,
                epsilon: float = KS_EPSILON) -> float:
    """``sup |F_emp - F_target|`` over :func:`ks_grid`."""
    values = np.sort(np.asarray(getattr(spectrum, "values", spectrum), dtype=float))
    if values.size == 0:
        raise DomainError("empty spectrum")
    grid = ks_grid(values, law, epsilon)
    emp = np.searchsorted(values, grid, side="right") / values.size
    return float(np.max(np.abs(emp - target_cdf(law, grid))))


# --- regime -----------------------------------------------------------------

class Regime(NamedTuple):
    n: int
    scale: int
    p: int


def check_regime(n: int, scale: int, p: int, octave: int = 0, c: float = 1.0) -> None:
    """Raise :class:`RegimeError` naming the first failed A4 relation."""
    _scale_exponent(scale)
    if scale < 2:
        raise RegimeError(f"A4: scale a must be >= 2, got a={scale}")
    if not scale <= n / 2**octave:
        raise RegimeError(f"A4: a <= n/2^j fails: a={scale}, n={n}, j={octave}")
    if not p < n / (scale * 2**octave):
        raise RegimeError(f"A4: p < n/(a 2^j) fails: p={p}, n/(a 2^j)={n / (scale * 2**octave):g}")
    if not p <= c * math.sqrt(n / scale):
        raise RegimeError(f"A4: p <= c sqrt(n/a) fails: p={p}, c sqrt(n/a)={c * math.sqrt(n / scale):g}")


@dataclass(frozen=True)
class RegimeSchedule:
    """Growing ``(n, a, p)`` triples; validated against A4 at construction."""

    regimes: Tuple[Regime, ...]
    octave: int = 0
    c: float = 1.0

    def __post_init__(self):
        regimes = tuple(Regime(int(n), int(a), int(p)) for n, a, p in self.regimes)
        object.__setattr__(self, "regimes", regimes)
        if not regimes:
            raise RegimeError("A4: schedule is empty")
        for r in regimes:
            check_regime(r.n, r.scale, r.p, self.octave, self.c)
        ratios = [r.p * r.scale / r.n for r in regimes]
        for k in range(1, len(ratios)):
            if not ratios[k] < ratios[k - 1]:
                raise RegimeError(
                    f"A4: p a / n must decrease along the schedule; "
                    f"entry {k} has {ratios[k]:g} after {ratios[k - 1]:g}"
                )

    def __iter__(self):
        return iter(self.regimes)

    def __len__(self):
        return len(self.regimes)


# --- multiscale estimation ------------------------------------------------------

def _regression_weights(octaves: np.ndarray, counts: np.ndarray, weights) -> np.ndarray:
    if isinstance(weights, str):
        if weights == "nj":
            w = counts.astype(float)
        elif weights == "equal":
            w = np.ones(octaves.size)
        else:
            raise DomainError(f"weights must be 'nj', 'equal' or a sequence, got {weights!r}")
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != octaves.shape or np.any(w <= 0.0):
            raise DomainError(f"need {octaves.size} positive weights, got {weights!r}")
    return w / w.sum()


def hurst_from_eigenvalues(eigenvalues: Mapping[int, np.ndarray], counts: Optional[Mapping[int, int]] = None,
                           weights: Union[str, Sequence[float]] = "nj") -> np.ndarray:
    """Per-rank weighted regression of ``log2 lambda_l(W(2^j))`` on ``j``;
    returns ascending ``(slope - 1) / 2``.

    ``eigenvalues[j]`` holds the ascending spectrum at octave ``j``.
    """
    octaves = np.array(sorted(eigenvalues), dtype=int)
    if octaves.size < 2:
        raise DomainError("multiscale regression needs at least two octaves (j2 > j1)")
    if counts is None:
        if isinstance(weights, str) and weights == "nj":
            raise DomainError("weights proportional to n_j need the counts")
        cnt = np.ones(octaves.size)
    else:
        cnt = np.array([counts[j] for j in octaves], dtype=float)
    w = _regression_weights(octaves, cnt, weights)
    y = np.log2(np.stack([np.asarray(eigenvalues[j], dtype=float) for j in octaves]))
    if not np.all(np.isfinite(y)):
        raise DegenerateSpectrumError("non-positive eigenvalue in multiscale regression")
    x = octaves.astype(float)
    xc = x - w @ x
    slopes = (w * xc) @ (y - w @ y) / (w @ xc**2)
    return np.sort((slopes - 1.0) / 2.0)


def multiscale_hurst(pyramid: WaveletPyramid, octave_range: Tuple[int, int],
                     weights: Union[str, Sequence[float]] = "nj") -> np.ndarray:
    """Hurst estimates from the wavelet matrices at octaves ``j1..j2``."""
    j1, j2 = octave_range
    if j2 <= j1:
        raise DomainError(f"octave range needs j2 > j1, got [{j1}, {j2}]")
    eigs: Dict[int, np.ndarray] = {}
    counts: Dict[int, int] = {}
    for j in range(j1, j2 + 1):
        w = wavelet_matrix_from_details(pyramid.detail(j), 2**j)
        eigs[j] = eigen.eigvalsh(w.matrix)
        counts[j] = w.count
    return hurst_from_eigenvalues(eigs, counts, weights)


def hurst_to_upsilon(estimates: Iterable[float]) -> np.ndarray:
    """Affine map ``H -> 2H + 1`` onto the scale of the target law."""
    return 2.0 * np.asarray(list(estimates), dtype=float) + 1.0
