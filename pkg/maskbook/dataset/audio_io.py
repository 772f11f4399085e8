import os

import numpy as np
from scipy.io import wavfile

from ..stft import Waveform
from ..utils import get_logger, MaskbookError

logger = get_logger(__name__)

PCM16_SCALE = 32768.
WAV_SUBTYPES = ('float32', 'PCM_16')


class WavFormatError(MaskbookError, ValueError):
    pass


def read_wav(path):
    """Mono 16-bit PCM (scaled by 1/32768) or 32-bit float WAV as a float64 Waveform."""
    if not os.path.exists(path):
        raise FileNotFoundError('WAV file {} not found'.format(path))
    try:
        sample_rate, data = wavfile.read(path)
    except ValueError as error:
        raise WavFormatError('cannot read {}: {}'.format(path, error))
    if data.ndim != 1:
        raise WavFormatError('{} has {} channels, only mono is supported'.format(path, data.shape[1]))
    if data.size == 0:
        raise WavFormatError('{} holds no samples'.format(path))
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise WavFormatError('{}: unsupported sample format {}'.format(path, data.dtype))
    return Waveform(samples, int(sample_rate))


def write_wav(path, waveform, subtype='float32'):
    """Writes float32 (bit-exact for float32-representable samples) or 16-bit PCM without dithering."""
    samples = waveform.samples.detach().cpu().numpy()
    if subtype == 'float32':
        data = samples.astype(np.float32)
    elif subtype == 'PCM_16':
        data = np.clip(np.round(samples * PCM16_SCALE), -PCM16_SCALE, PCM16_SCALE - 1).astype(np.int16)
    else:
        raise ValueError('unsupported WAV subtype {!r}, expected one of {}'.format(subtype, WAV_SUBTYPES))
    if os.path.dirname(path):
        os.makedirs(os.path.dirname(path), exist_ok=True)
    wavfile.write(path, int(waveform.sample_rate), data)
    return path
