"""
Short-time spectral front-ends: magnitude spectrogram and log-mel filterbank.
"""
from __future__ import annotations

__all__ = (
    "WindowFunction",
    "FeatureKind",
    "FeatureConfig",
    "FeatureMatrix",
    "frame_count",
    "hz_to_mel",
    "mel_to_hz",
    "mel_filterbank",
    "mel_center_frequencies",
    "spectrogram",
    "logmel",
)

import dataclasses
import enum
import logging
from typing import Any
from typing import Mapping

import numpy
from numpy.lib.stride_tricks import sliding_window_view

from voicefair import cfg
from voicefair.errors import AcousticError
from voicefair.utils import lru_cache
from ._wave import Waveform

logger = logging.getLogger(__name__)


class WindowFunction(enum.Enum):
    hamming = "hamming"
    hann = "hann"

    def array(self, size: int) -> numpy.ndarray:
        if self is WindowFunction.hann:
            return numpy.hanning(size)
        return numpy.hamming(size)


class FeatureKind(enum.Enum):
    spectrogram = "spectrogram"
    logmel = "logmel"


@dataclasses.dataclass(frozen=True)
class FeatureConfig:
    """
    Framing and filterbank parameters shared by both front-ends.

    Args:
        window_ms: analysis window length in milliseconds
        hop_ms: distance between two frame starts in milliseconds
        fft_size: number of DFT points, zero-padding each window
        n_mels: number of triangular mel filters
        fmin_hz: lower edge of the filterbank
        fmax_hz: upper edge of the filterbank
        log_floor: smallest mel energy before the log
        window_fn: tapering window applied to each frame
        preemphasis: first order high-pass coefficient, 0 disables it
        sample_rate: rate the waveforms are expected at
    """

    window_ms: float = 25.0
    hop_ms: float = 10.0
    fft_size: int = 512
    n_mels: int = 40
    fmin_hz: float = 0.0
    fmax_hz: float = 8000.0
    log_floor: float = 1e-10
    window_fn: WindowFunction = WindowFunction.hamming
    preemphasis: float = 0.0
    sample_rate: int = cfg.target_sample_rate

    def __post_init__(self):
        if self.hop_ms <= 0 or self.window_ms < self.hop_ms:
            raise AcousticError(
                f"expected window_ms >= hop_ms > 0, got {self.window_ms} and {self.hop_ms}"
            )
        if self.window_samples < 1 or self.hop_samples < 1:
            raise AcousticError(
                f"window of {self.window_ms} ms / hop of {self.hop_ms} ms is shorter "
                f"than one sample at {self.sample_rate} Hz"
            )
        if self.fft_size < self.window_samples:
            raise AcousticError(
                f"fft_size {self.fft_size} is smaller than the window of "
                f"{self.window_samples} samples"
            )
        if not 0 <= self.fmin_hz < self.fmax_hz <= self.sample_rate / 2:
            raise AcousticError(
                f"expected 0 <= fmin_hz < fmax_hz <= {self.sample_rate / 2}, "
                f"got {self.fmin_hz} and {self.fmax_hz}"
            )
        if self.n_mels < 1:
            raise AcousticError(f"n_mels must be a positive integer, got {self.n_mels}")
        if self.log_floor <= 0:
            raise AcousticError(f"log_floor must be positive, got {self.log_floor}")
        if not 0 <= self.preemphasis < 1:
            raise AcousticError(f"preemphasis must be in [0, 1), got {self.preemphasis}")

    @property
    def window_samples(self) -> int:
        return int(round(self.window_ms * self.sample_rate / 1000))

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop_ms * self.sample_rate / 1000))

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> FeatureConfig:
        """
        Build a config from overrides, typically the ``features`` section of a run
        configuration.
        """
        fields = {field.name for field in dataclasses.fields(cls)}
        unknown = set(mapping) - fields
        if unknown:
            raise AcousticError(f"unknown feature parameter(s) {sorted(unknown)}")
        values = dict(mapping)
        if "window_fn" in values:
            try:
                values["window_fn"] = WindowFunction(values["window_fn"])
            except ValueError as excp:
                raise AcousticError(str(excp)) from excp
        return cls(**values)


@dataclasses.dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """
    frames x bins grid of features.
    """

    data: numpy.ndarray
    kind: FeatureKind

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]


def frame_count(n_samples: int, window: int, hop: int) -> int:
    """
    Number of full windows fitting in the signal, 0 if it is shorter than a window.
    """
    if n_samples < window:
        return 0
    return (n_samples - window) // hop + 1


def hz_to_mel(frequency):
    return 2595.0 * numpy.log10(1.0 + numpy.asarray(frequency, dtype=float) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (numpy.asarray(mel, dtype=float) / 2595.0) - 1.0)


def _mel_points(feature_config: FeatureConfig) -> numpy.ndarray:
    return mel_to_hz(
        numpy.linspace(
            hz_to_mel(feature_config.fmin_hz),
            hz_to_mel(feature_config.fmax_hz),
            feature_config.n_mels + 2,
        )
    )


def mel_center_frequencies(feature_config: FeatureConfig) -> numpy.ndarray:
    """
    Center frequency in Hz of every band of :func:`mel_filterbank`.
    """
    return _mel_points(feature_config)[1:-1]


@lru_cache(copy=True)
def mel_filterbank(feature_config: FeatureConfig) -> numpy.ndarray:
    """
    Triangular filters equally spaced on the HTK mel scale ``2595 * log10(1 + f/700)``.

    Band ``m`` rises from the center of band ``m-1`` to its own center then falls to
    the center of band ``m+1``, with a peak weight of 1.

    Returns:
        array of shape (n_mels, fft_size // 2 + 1)
    """
    points = _mel_points(feature_config)
    frequencies = numpy.fft.rfftfreq(
        feature_config.fft_size, d=1.0 / feature_config.sample_rate
    )
    lower = points[:-2, numpy.newaxis]
    center = points[1:-1, numpy.newaxis]
    upper = points[2:, numpy.newaxis]

    rising = (frequencies - lower) / (center - lower)
    falling = (upper - frequencies) / (upper - center)
    weights = numpy.maximum(0.0, numpy.minimum(rising, falling))

    empty = numpy.flatnonzero(weights.sum(axis=1) == 0)
    if empty.size:
        logger.warning(
            f"[mel_filterbank] {empty.size} band(s) cover no DFT bin, "
            f"consider a larger fft_size or fewer n_mels"
        )
    return weights


def _frames(wave: Waveform, feature_config: FeatureConfig) -> numpy.ndarray:
    if wave.sample_rate != feature_config.sample_rate:
        raise AcousticError(
            f"waveform at {wave.sample_rate} Hz but features configured for "
            f"{feature_config.sample_rate} Hz"
        )
    window = feature_config.window_samples
    if wave.samples.size < window:
        raise AcousticError(
            f"waveform of {wave.samples.size} samples is shorter than one window "
            f"of {window} samples"
        )

    samples = wave.samples
    if feature_config.preemphasis:
        samples = numpy.append(
            samples[0], samples[1:] - feature_config.preemphasis * samples[:-1]
        )

    frames = sliding_window_view(samples, window)[:: feature_config.hop_samples]
    return frames * feature_config.window_fn.array(window)


def spectrogram(
    wave: Waveform,
    feature_config: FeatureConfig = FeatureConfig(),
) -> FeatureMatrix:
    """
    Magnitude of the short-time Fourier transform.

    Returns:
        matrix of ``frame_count(len(wave), window, hop)`` rows and
        ``fft_size // 2 + 1`` columns.

    Raises:
        AcousticError: if the waveform is shorter than one window.
    """
    frames = _frames(wave, feature_config)
    magnitude = numpy.abs(numpy.fft.rfft(frames, n=feature_config.fft_size, axis=1))
    return FeatureMatrix(data=magnitude, kind=FeatureKind.spectrogram)


def logmel(
    wave: Waveform,
    feature_config: FeatureConfig = FeatureConfig(),
) -> FeatureMatrix:
    """
    Natural log of the mel filterbank energies of the power spectrum, floored at
    ``log_floor``.

    Returns:
        matrix of ``frame_count(len(wave), window, hop)`` rows and ``n_mels`` columns.

    Raises:
        AcousticError: if the waveform is shorter than one window.
    """
    power = spectrogram(wave, feature_config).data ** 2
    energies = power @ mel_filterbank(feature_config).T
    data = numpy.log(numpy.maximum(energies, feature_config.log_floor))
    return FeatureMatrix(data=data, kind=FeatureKind.logmel)


