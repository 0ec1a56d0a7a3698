"""Monte Carlo orchestration for the mixed-Hurst spectrum experiments.

Replicate ``r`` of regime ``i`` draws from ``derive(seed, i, r)`` only, and
results are reduced in replicate order, so aggregates do not depend on the
number of worker threads.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

from .errors import RegimeError, ValidationError, WavespecError
from .filters import get_family
from .io import write_json
from .rng import derive
from .specmat import (Regime, RegimeSchedule, TargetLaw, hurst_to_upsilon, ks_distance,
                      log_spectrum, multiscale_hurst, wavelet_matrix)
from .synth import EnsembleSpec, HurstLaw, MixingSpec, synth_ensemble
from .wavelet import border_free_count, mallat_pyramid

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

HURST_BIN_WIDTH = 0.02
UPSILON_BIN_WIDTH = 0.04
UPSILON_RANGE = (0.0, 4.0)
MAX_FAILURE_FRACTION = 0.05
MODE_WINDOW = 5
MODE_HALF_WIDTH = 0.15
BOOTSTRAP_RESAMPLES = 1000


# --- configuration ---------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    law: HurstLaw
    schedule: RegimeSchedule
    replicates: Tuple[int, ...]
    family: str = "db2"
    octave_range: Optional[Tuple[int, int]] = None
    weights: str = "nj"
    mixing: MixingSpec = field(default_factory=MixingSpec)
    seed: int = 0
    name: str = "experiment"
    outputs: Optional[str] = None

    def __post_init__(self):
        reps = self.replicates
        if isinstance(reps, int):
            reps = (reps,) * len(self.schedule)
        reps = tuple(int(r) for r in reps)
        object.__setattr__(self, "replicates", reps)
        if len(reps) != len(self.schedule):
            raise ValidationError(f"{len(reps)} replicate counts for {len(self.schedule)} regimes")
        if any(r < 1 for r in reps):
            raise ValidationError("replicates must be >= 1")
        if not 0 <= self.seed <= 2**64 - 1:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        family = get_family(self.family)
        if self.octave_range is not None:
            object.__setattr__(self, "octave_range", tuple(int(j) for j in self.octave_range))
        for i, regime in enumerate(self.schedule):
            j1, j2 = self.octaves_for(i)
            if j1 < 1 or j2 <= j1:
                raise ValidationError(f"regime {i}: octave range [{j1}, {j2}] needs 1 <= j1 < j2")
            top = max(j2, self.scale_octave(i))
            for j in range(j1, top + 1):
                n_j = border_free_count(regime.n, family.support_length, j)
                if n_j < regime.p:
                    raise RegimeError(
                        f"A4: regime {i} (n={regime.n}, a={regime.scale}, p={regime.p}): octave {j} "
                        f"has {n_j} border-free coefficients, fewer than p"
                    )

    def scale_octave(self, index: int) -> int:
        """Pyramid octave of ``W(a 2^j)`` for regime ``index``."""
        return int(math.log2(self.schedule.regimes[index].scale)) + self.schedule.octave

    def octaves_for(self, index: int) -> Tuple[int, int]:
        """Multiscale octave range; defaults to ``[3, log2 a + j]``."""
        if self.octave_range is not None:
            return self.octave_range
        return (3, self.scale_octave(index))

    def resolved(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "hurst": self.law.format(),
            "mixing": self.mixing.format(),
            "family": self.family if isinstance(self.family, str) else get_family(self.family).name,
            "octave": self.schedule.octave,
            "c": self.schedule.c,
            "weights": self.weights,
            "octave_range": list(self.octave_range) if self.octave_range else None,
            "regimes": [
                {"n": r.n, "a": r.scale, "p": r.p, "replicates": k,
                 "octave_range": list(self.octaves_for(i))}
                for i, (r, k) in enumerate(zip(self.schedule, self.replicates))
            ],
            "log_spectrum_base": "natural log ratio ln(lambda)/ln(a)",
            "regression_log_base": 2,
        }

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "ExperimentConfig":
        regimes = raw.get("regime") or raw.get("regimes")
        if not regimes:
            raise ValidationError("config needs at least one [[regime]] entry")
        default_reps = raw.get("replicates", 1)
        schedule = RegimeSchedule(
            tuple(Regime(int(r["n"]), int(r["a"]), int(r["p"])) for r in regimes),
            octave=int(raw.get("octave", 0)),
            c=float(raw.get("c", 1.0)),
        )
        orange = raw.get("octave_range")
        return cls(
            law=HurstLaw.parse(raw["hurst"]),
            schedule=schedule,
            replicates=tuple(int(r.get("replicates", default_reps)) for r in regimes),
            family=str(raw.get("family", "db2")),
            octave_range=tuple(orange) if orange else None,
            weights=str(raw.get("weights", "nj")),
            mixing=MixingSpec.parse(str(raw.get("mixing", "identity"))),
            seed=int(raw.get("seed", 0)),
            name=str(raw.get("name", "experiment")),
            outputs=raw.get("outputs"),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        """Read a TOML (``.toml``) or JSON config."""
        path = Path(path)
        try:
            if path.suffix == ".toml":
                with open(path, "rb") as fh:
                    raw = tomllib.load(fh)
            else:
                with open(path) as fh:
                    raw = json.load(fh)
        except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
            raise ValidationError(f"{path}: {exc}") from None
        except KeyError as exc:
            raise ValidationError(f"{path}: missing key {exc}") from None
        try:
            return cls.from_mapping(raw)
        except KeyError as exc:
            raise ValidationError(f"{path}: missing key {exc}") from None


# --- replicates ------------------------------------------------------------

@dataclass(frozen=True)
class ReplicateRecord:
    replicate: int
    assignment: Tuple[float, ...] = ()
    eigenvalues: Optional[np.ndarray] = None
    rescaled_log: Optional[np.ndarray] = None
    hurst: Optional[np.ndarray] = None
    ks_direct: float = math.nan
    ks_multiscale: float = math.nan
    error: Optional[str] = None
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.error is None


def run_replicate(config: ExperimentConfig, index: int, replicate: int) -> ReplicateRecord:
    start = time.perf_counter()
    regime = config.schedule.regimes[index]
    try:
        rng = derive(config.seed, index, replicate)
        spec = EnsembleSpec(regime.n, regime.p, config.law, config.mixing, config.family, config.seed)
        ens = synth_ensemble(spec, rng)
        j_scale = config.scale_octave(index)
        j1, j2 = config.octaves_for(index)
        pyramid = mallat_pyramid(ens.observed, config.family, max(j_scale, j2))
        spectrum = log_spectrum(wavelet_matrix(pyramid, j_scale, config.schedule.octave))
        hurst = multiscale_hurst(pyramid, (j1, j2), config.weights)
        target = TargetLaw.from_hurst_law(config.law)
        return ReplicateRecord(
            replicate, ens.assignment.values, spectrum.eigenvalues, spectrum.values, hurst,
            ks_distance(spectrum, target), ks_distance(hurst_to_upsilon(hurst), target),
            seconds=time.perf_counter() - start,
        )
    except WavespecError as exc:
        return ReplicateRecord(replicate, error=f"{type(exc).__name__}: {exc}",
                               seconds=time.perf_counter() - start)


# --- histograms and modes ----------------------------------------------------

@dataclass(frozen=True)
class Histogram:
    """Fixed-width bins on ``[lo, hi)`` plus underflow/overflow masses;
    all masses together sum to 1."""

    lo: float
    width: float
    masses: np.ndarray
    below: float
    above: float

    @property
    def centers(self) -> np.ndarray:
        return self.lo + self.width * (np.arange(self.masses.size) + 0.5)

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.width * np.arange(self.masses.size + 1)

    def to_json(self) -> Dict[str, Any]:
        return {"lo": self.lo, "width": self.width, "masses": self.masses.tolist(),
                "below": self.below, "above": self.above}


def histogram(values, lo: float, hi: float, width: float) -> Histogram:
    values = np.asarray(values, dtype=float)
    bins = int(round((hi - lo) / width))
    if values.size == 0:
        return Histogram(lo, width, np.zeros(bins), 0.0, 0.0)
    idx = np.floor((values - lo) / width).astype(int)
    inside = (idx >= 0) & (idx < bins)
    counts = np.bincount(idx[inside], minlength=bins).astype(float)
    total = float(values.size)
    return Histogram(lo, width, counts / total, float(np.sum(idx < 0)) / total,
                     float(np.sum(idx >= bins)) / total)


@dataclass(frozen=True)
class Mode:
    location: float
    mass: float
    prominence: float


def mode_extract(hist: Histogram, k: int, window: int = MODE_WINDOW,
                 half_width: float = MODE_HALF_WIDTH) -> List[Mode]:
    """Up to ``k`` most prominent local maxima of the smoothed histogram,
    ascending by location.  Fewer than ``k`` are returned when the histogram
    has fewer maxima; the caller reports the shortfall."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    smooth = uniform_filter1d(hist.masses, size=window, mode="constant")
    padded = np.concatenate([[0.0], smooth, [0.0]])
    peaks, props = find_peaks(padded, prominence=0.0)
    peaks -= 1
    order = np.argsort(-props["prominences"], kind="stable")[:k]
    centers = hist.centers
    modes = []
    for i in sorted(peaks[order]):
        loc = float(centers[i])
        mass = float(hist.masses[np.abs(centers - loc) <= half_width + 1e-12].sum())
        prom = float(props["prominences"][list(peaks).index(i)])
        modes.append(Mode(loc, mass, prom))
    return modes


# --- summaries -------------------------------------------------------------

def _quantiles(x) -> Dict[str, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return {"median": math.nan, "q25": math.nan, "q75": math.nan, "iqr": math.nan}
    q25, med, q75 = np.percentile(x, [25, 50, 75])
    return {"median": float(med), "q25": float(q25), "q75": float(q75), "iqr": float(q75 - q25)}


@dataclass
class ConfigSummary:
    index: int
    regime: Regime
    octave_range: Tuple[int, int]
    records: List[ReplicateRecord]
    law: HurstLaw

    @property
    def succeeded(self) -> List[ReplicateRecord]:
        return [r for r in self.records if r.ok]

    @property
    def failures(self) -> List[ReplicateRecord]:
        return [r for r in self.records if not r.ok]

    @property
    def failure_fraction(self) -> float:
        return len(self.failures) / len(self.records)

    def pooled_hurst(self) -> np.ndarray:
        good = self.succeeded
        return np.concatenate([r.hurst for r in good]) if good else np.zeros(0)

    def pooled_rescaled_log(self) -> np.ndarray:
        good = self.succeeded
        return np.concatenate([r.rescaled_log for r in good]) if good else np.zeros(0)

    def hurst_histogram(self) -> Histogram:
        return histogram(self.pooled_hurst(), 0.0, 1.0, HURST_BIN_WIDTH)

    def upsilon_histogram(self) -> Histogram:
        return histogram(self.pooled_rescaled_log(), *UPSILON_RANGE, UPSILON_BIN_WIDTH)

    def ks(self, kind: str = "multiscale") -> np.ndarray:
        attr = "ks_multiscale" if kind == "multiscale" else "ks_direct"
        return np.array([getattr(r, attr) for r in self.succeeded])

    def modes(self) -> List[Mode]:
        return mode_extract(self.hurst_histogram(), len(self.law.support))

    def to_json(self) -> Dict[str, Any]:
        modes = self.modes()
        return {
            "index": self.index,
            "n": self.regime.n,
            "a": self.regime.scale,
            "p": self.regime.p,
            "octave_range": list(self.octave_range),
            "replicates": len(self.records),
            "failed": [{"replicate": r.replicate, "error": r.error} for r in self.failures],
            "hurst_histogram": self.hurst_histogram().to_json(),
            "rescaled_log_histogram": self.upsilon_histogram().to_json(),
            "ks_multiscale": _quantiles(self.ks("multiscale")),
            "ks_direct": _quantiles(self.ks("direct")),
            "modes": [{"location": m.location, "mass": m.mass, "prominence": m.prominence} for m in modes],
            "modes_expected": len(self.law.support),
        }


class ExperimentFailure(WavespecError):
    """More than the tolerated fraction of replicates failed."""

    def __init__(self, message, summary):
        super().__init__(message)
        self.summary = summary


@dataclass
class RunSummary:
    config: ExperimentConfig
    configs: List[ConfigSummary]
    trend: "TrendReport"
    timing: Dict[str, Any]

    def to_json(self) -> Dict[str, Any]:
        """Deterministic content only; wall-clock data lives in ``timing``."""
        return {
            "format_version": 1,
            "config": self.config.resolved(),
            "configs": [c.to_json() for c in self.configs],
            "trend": self.trend.to_json() if self.trend else None,
        }

    def summary_bytes(self) -> bytes:
        return (json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n").encode()


def run_experiment(config: ExperimentConfig, threads: int = 1) -> RunSummary:
    """Run every replicate of every regime and aggregate.

    Raises :class:`ExperimentFailure` (carrying the summary) when more than
    5% of a regime's replicates failed.
    """
    if threads < 1:
        raise ValidationError(f"threads must be >= 1, got {threads}")
    start = time.perf_counter()
    jobs = [(i, r) for i, reps in enumerate(config.replicates) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        records = list(pool.map(lambda job: run_replicate(config, *job), jobs))
    configs = []
    offset = 0
    for i, reps in enumerate(config.replicates):
        configs.append(ConfigSummary(i, config.schedule.regimes[i], config.octaves_for(i),
                                     records[offset:offset + reps], config.law))
        offset += reps
    trend = None
    if len(configs) >= 2:
        trend = convergence_trend([c.ks("multiscale") for c in configs],
                                  [c.ks("direct") for c in configs], seed=config.seed)
    seconds = [r.seconds for r in records]
    timing = {
        "threads": threads,
        "wall_seconds": time.perf_counter() - start,
        "replicate_seconds": {"mean": float(np.mean(seconds)), "max": float(np.max(seconds))},
        "per_config_seconds": [float(sum(r.seconds for r in c.records)) for c in configs],
    }
    summary = RunSummary(config, configs, trend, timing)
    bad = [c for c in configs if c.failure_fraction > MAX_FAILURE_FRACTION]
    if bad:
        c = bad[0]
        raise ExperimentFailure(
            f"regime {c.index} (n={c.regime.n}, a={c.regime.scale}, p={c.regime.p}): "
            f"{len(c.failures)}/{len(c.records)} replicates failed; first: {c.failures[0].error}",
            summary,
        )
    return summary


# --- convergence trend ---------------------------------------------------------

@dataclass(frozen=True)
class TrendReport:
    medians: Tuple[float, ...]
    bands: Tuple[Tuple[float, float], ...]
    non_increasing: bool
    strictly_decreasing: bool
    direct_medians: Tuple[float, ...] = ()
    direct_strictly_decreasing: Optional[bool] = None

    def to_json(self) -> Dict[str, Any]:
        return {
            "median_ks": list(self.medians),
            "band95": [list(b) for b in self.bands],
            "non_increasing": self.non_increasing,
            "strictly_decreasing": self.strictly_decreasing,
            "median_ks_direct": list(self.direct_medians),
            "direct_strictly_decreasing": self.direct_strictly_decreasing,
        }


def _bootstrap_band(x: np.ndarray, rng: np.random.Generator, resamples: int) -> Tuple[float, float]:
    if x.size == 0:
        return (math.nan, math.nan)
    idx = rng.integers(0, x.size, size=(resamples, x.size))
    meds = np.median(x[idx], axis=1)
    lo, hi = np.percentile(meds, [2.5, 97.5])
    return (float(lo), float(hi))


def convergence_trend(ks_per_config: Sequence[Sequence[float]],
                      direct_per_config: Optional[Sequence[Sequence[float]]] = None,
                      seed: int = 0, resamples: int = BOOTSTRAP_RESAMPLES) -> TrendReport:
    """Median KS distance per configuration, monotonicity flags, and 95%
    percentile-bootstrap bands for each median."""
    if len(ks_per_config) < 2:
        raise ValidationError("a trend needs at least two configurations")
    arrays = [np.asarray(k, dtype=float) for k in ks_per_config]
    medians = tuple(float(np.median(a)) if a.size else math.nan for a in arrays)
    bands = tuple(_bootstrap_band(a, derive(seed, 2**32, i), resamples) for i, a in enumerate(arrays))
    diffs = np.diff(medians)
    direct_medians: Tuple[float, ...] = ()
    direct_dec = None
    if direct_per_config is not None:
        direct_medians = tuple(float(np.median(np.asarray(k))) if len(k) else math.nan
                               for k in direct_per_config)
        direct_dec = bool(np.all(np.diff(direct_medians) < 0))
    return TrendReport(medians, bands, bool(np.all(diffs <= 0)), bool(np.all(diffs < 0)),
                       direct_medians, direct_dec)


# --- outputs ---------------------------------------------------------------

CSV_COLUMNS = ("rank", "replicate", "lambda", "rescaled_log", "hurst_estimate")


def write_outputs(summary: RunSummary, outdir) -> Dict[str, Path]:
    """Write summary.json, timing.json, per-config CSVs, trend.csv and histogram.svg."""
    from .svg import histogram_panels

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"summary": out / "summary.json", "timing": out / "timing.json"}
    paths["summary"].write_bytes(summary.summary_bytes())
    write_json(paths["timing"], summary.timing)
    for c in summary.configs:
        p = out / f"config{c.index}_n{c.regime.n}_a{c.regime.scale}_p{c.regime.p}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for rec in c.succeeded:
                for rank in range(rec.eigenvalues.size):
                    w.writerow([rank + 1, rec.replicate, repr(float(rec.eigenvalues[rank])),
                                repr(float(rec.rescaled_log[rank])), repr(float(rec.hurst[rank]))])
        paths[f"config{c.index}"] = p
    paths["trend"] = out / "trend.csv"
    with open(paths["trend"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["config", "n", "a", "p", "median_ks", "band_lo", "band_hi", "median_ks_direct"])
        for c in summary.configs:
            ks = c.ks("multiscale")
            band = summary.trend.bands[c.index] if summary.trend else (math.nan, math.nan)
            direct = c.ks("direct")
            w.writerow([c.index, c.regime.n, c.regime.scale, c.regime.p,
                        repr(float(np.median(ks))) if ks.size else "nan", repr(band[0]), repr(band[1]),
                        repr(float(np.median(direct))) if direct.size else "nan"])
    paths["histogram"] = out / "histogram.svg"
    panels = [(f"(n, a, p) = (2^{int(math.log2(c.regime.n))}, {c.regime.scale}, {c.regime.p})",
               c.hurst_histogram()) for c in summary.configs]
    paths["histogram"].write_text(histogram_panels(panels, summary.config.law.support))
    return paths
