"""WAV file I/O mapped to float64 AudioBuffers.

Channel 0 of a 2-channel file is the top microphone, channel 1 the bottom.
"""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .dsp import AudioBuffer

_INT_SCALE = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


def read_wav(path) -> AudioBuffer:
    """Read a PCM16/PCM32/float WAV file into an AudioBuffer."""
    rate, data = wavfile.read(path)
    data = np.asarray(data)
    if data.ndim == 1:
        data = data[:, None]
    if data.dtype in _INT_SCALE:
        samples = data / _INT_SCALE[data.dtype]
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype} in {path}")
    return AudioBuffer(samples.T, int(rate))


def write_wav(path, buffer: AudioBuffer, sample_format: str = "float32") -> None:
    """Write an AudioBuffer as 32-bit float (default), 64-bit float, or 16-bit PCM WAV."""
    data = buffer.samples.T
    if sample_format == "float32":
        wavfile.write(path, buffer.sample_rate, data.astype(np.float32))
    elif sample_format == "float64":
        wavfile.write(path, buffer.sample_rate, data.astype(np.float64))
    elif sample_format == "pcm16":
        clipped = np.clip(data, -1.0, 32767.0 / 32768.0)
        wavfile.write(path, buffer.sample_rate, np.round(clipped * 32768.0).astype(np.int16))
    else:
        raise ValueError(f"unsupported sample_format {sample_format!r}")
