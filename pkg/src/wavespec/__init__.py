"""Mixed-Hurst fractional ensembles, wavelet random matrices and their
rescaled log-eigenvalue spectra."""

__version__ = "0.1.0"

from .errors import (DegenerateSpectrumError, DomainError, InsufficientSampleError, QuadratureError,
                     RankError, RegimeError, SolverError, SynthesisError, ValidationError, WavespecError)
from .rng import derive
from .synth import (EnsembleSpec, HurstAssignment, HurstLaw, MixingSpec, PathMatrix, fgn_autocovariance,
                    realize_mixing, synth_ensemble, synth_fbm, synth_fgn)
from .filters import WaveletFamily, daubechies
from .wavelet import (WaveletPyramid, mallat_pyramid, wavelet_autocovariance, wavelet_autocovariances,
                      wavelet_spectral_density)
from .eigen import EigenDecomposition, SymmetricMatrix, check_weyl, eigh, eigvalsh, singular_values
from .toeplitz import (ConditionalCovariance, ToeplitzSpec, build_toeplitz, conditional_covariance,
                       gray_bounds, wavelet_symbol)
from .specmat import (LogSpectrum, RegimeSchedule, TargetLaw, WaveletMatrix, ks_distance, log_spectrum,
                      multiscale_hurst, target_cdf, wavelet_matrix)
