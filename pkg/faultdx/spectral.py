#
# Time series -> normalized, cut magnitude spectrum
#
import logging
import math

import numpy as np
from scipy import fft as sp_fft
from scipy import signal as sp_signal

from faultdx.core import FaultDxException, Spectrum, TimeSeries
from faultdx.models.spectral import SpectralConfig

log = logging.getLogger(__name__)

MIN_STD = 1e-12


class SpectralException(FaultDxException):
    pass


def _single_sided(samples: np.ndarray) -> np.ndarray:
    n = samples.size
    magnitudes = 2.0 / n * np.abs(sp_fft.rfft(samples))
    magnitudes[0] /= 2
    if n % 2 == 0:
        # Nyquist bin, like DC, has no mirrored twin
        magnitudes[-1] /= 2
    return magnitudes


def fft_magnitude(x: TimeSeries) -> Spectrum:
    """Single-sided amplitude spectrum: a tone of peak amplitude A shows as A at its bin"""

    if len(x) < 2:
        raise SpectralException(f"At least 2 samples are needed, got {len(x)}")

    return Spectrum(
        magnitudes=_single_sided(x.samples),
        df_hz=x.sample_rate_hz / len(x),
        f_start_hz=0.0,
        normalized=False,
    )


def zscore(spec: Spectrum) -> Spectrum:
    if len(spec) < 2:
        raise SpectralException(f"z-score needs at least 2 bins, got {len(spec)}")

    mean = spec.magnitudes.mean()
    std = spec.magnitudes.std()
    if std < MIN_STD:
        raise SpectralException(f"Spectrum is degenerate (std {std:.3g}), cannot normalize")

    return Spectrum(
        magnitudes=(spec.magnitudes - mean) / std,
        df_hz=spec.df_hz,
        f_start_hz=spec.f_start_hz,
        normalized=True,
    )


def cut_length(spec: Spectrum, f_max_hz: float) -> int:
    """Number of bins with frequency <= f_max_hz"""
    count = math.floor((f_max_hz - spec.f_start_hz) / spec.df_hz + 1e-9) + 1
    return min(count, len(spec))


def frequency_cut(spec: Spectrum, f_max_hz: float) -> Spectrum:
    if f_max_hz < spec.f_start_hz + spec.df_hz:
        raise SpectralException(
            f"Cut frequency ({f_max_hz:g} Hz) keeps fewer than two bins "
            f"(start {spec.f_start_hz:g} Hz, df {spec.df_hz:g} Hz)"
        )

    return Spectrum(
        magnitudes=spec.magnitudes[: cut_length(spec, f_max_hz)],
        df_hz=spec.df_hz,
        f_start_hz=spec.f_start_hz,
        normalized=spec.normalized,
    )


def _windowed(x: TimeSeries, cfg: SpectralConfig) -> TimeSeries:
    samples = x.samples
    if cfg.detrend_mean:
        samples = sp_signal.detrend(samples, type="constant")

    if cfg.window == "hann":
        window = sp_signal.get_window("hann", len(x))
        # Coherent-gain correction keeps tone amplitudes comparable to window=none
        samples = samples * window / window.mean()

    return x.with_samples(samples)


def preprocess(x: TimeSeries, cfg: SpectralConfig) -> Spectrum:
    if cfg.f_max_hz > x.nyquist_hz + 1e-9:
        log.debug(f"Cut at {cfg.f_max_hz:g} Hz is above Nyquist ({x.nyquist_hz:g} Hz), no-op cut")

    spectrum = fft_magnitude(_windowed(x, cfg))

    if cfg.normalize_before_cut:
        return frequency_cut(zscore(spectrum), cfg.f_max_hz)

    return zscore(frequency_cut(spectrum, cfg.f_max_hz))
