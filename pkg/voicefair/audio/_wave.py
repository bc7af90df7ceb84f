from __future__ import annotations

__all__ = (
    "SUPPORTED_SUBTYPES",
    "Waveform",
    "load_wav",
    "resample",
)

import dataclasses
import logging
from pathlib import Path
from typing import Union

import numpy
import soundfile

from voicefair import cfg
from voicefair.errors import AcousticError

logger = logging.getLogger(__name__)

SUPPORTED_SUBTYPES = frozenset(("PCM_U8", "PCM_S8", "PCM_16", "PCM_24", "PCM_32"))
"""
soundfile subtypes accepted by :func:`load_wav`.
"""

# older soundfile releases only raise RuntimeError
_SOUNDFILE_ERROR = getattr(soundfile, "SoundFileError", RuntimeError)


@dataclasses.dataclass(frozen=True, eq=False)
class Waveform:
    """
    Mono audio signal with samples in [-1, 1].
    """

    samples: numpy.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise AcousticError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 1:
            raise AcousticError(
                f"samples must be a 1D array, got shape {self.samples.shape}"
            )
        if not self.samples.size:
            raise AcousticError("waveform has no sample")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """
        Duration in seconds.
        """
        return self.samples.size / self.sample_rate


def resample(wave: Waveform, sample_rate: int) -> Waveform:
    """
    Linearly interpolate the waveform at a new sample rate.

    The output holds ``round(n * sample_rate / wave.sample_rate)`` samples.
    """
    if sample_rate == wave.sample_rate:
        return wave

    n_out = int(round(wave.samples.size * sample_rate / wave.sample_rate))
    if n_out < 1:
        raise AcousticError(
            f"waveform of {wave.samples.size} samples is too short to resample "
            f"from {wave.sample_rate} Hz to {sample_rate} Hz"
        )
    time_in = numpy.arange(wave.samples.size) / wave.sample_rate
    time_out = numpy.arange(n_out) / sample_rate
    samples = numpy.interp(time_out, time_in, wave.samples)
    return Waveform(samples=samples, sample_rate=sample_rate)


def load_wav(
    path: Union[str, Path],
    sample_rate: int = cfg.target_sample_rate,
) -> Waveform:
    """
    Decode a PCM audio file as a mono waveform at the given sample rate.

    Channels are averaged; a file at another rate is resampled with linear
    interpolation.

    Args:
        path: filesystem path of the audio file
        sample_rate: rate of the returned waveform

    Raises:
        AcousticError: missing file, unreadable or non-PCM file, zero-length audio.
    """
    path = Path(path)
    if not path.is_file():
        raise AcousticError(f"audio file not found: {path}")

    try:
        info = soundfile.info(str(path))
    except (RuntimeError, _SOUNDFILE_ERROR) as excp:
        raise AcousticError(f"cannot decode '{path}': {excp}") from excp

    if info.subtype not in SUPPORTED_SUBTYPES:
        raise AcousticError(
            f"unsupported encoding {info.subtype} for '{path}', "
            f"expected one of {sorted(SUPPORTED_SUBTYPES)}"
        )
    if info.frames == 0:
        raise AcousticError(f"'{path}' holds no audio sample")

    data, file_rate = soundfile.read(str(path), dtype="float64", always_2d=True)
    wave = Waveform(samples=data.mean(axis=1), sample_rate=int(file_rate))

    if wave.sample_rate != sample_rate:
        logger.warning(
            f"[load_wav] resampling '{path.name}' from {wave.sample_rate} Hz "
            f"to {sample_rate} Hz"
        )
        wave = resample(wave, sample_rate)
    return wave
