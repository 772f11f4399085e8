"""
Binary spectrogram / real mask files.

Layout (little-endian): magic b'MSKB', uint16 version, uint32 T, uint32 F,
uint8 dtype (0 real, 1 complex), then T*F float64 values row-major, complex
values stored as interleaved (re, im) pairs.
"""
import os
import struct

import numpy as np
import torch

from .. import constants
from ..oracle_masks import RealMask
from ..stft import Spectrogram
from ..utils import MaskbookError

HEADER = struct.Struct('<4sHIIB')
DTYPE_REAL, DTYPE_COMPLEX = 0, 1


class SpectrogramFormatError(MaskbookError, ValueError):
    pass


def save_spectrogram(path, value):
    if isinstance(value, Spectrogram):
        data, code = value.bins, DTYPE_COMPLEX
    elif isinstance(value, RealMask):
        data, code = value.values, DTYPE_REAL
    elif isinstance(value, torch.Tensor):
        data, code = value, DTYPE_COMPLEX if value.is_complex() else DTYPE_REAL
    else:
        raise ValueError('cannot save object of type {}'.format(type(value).__name__))
    data = data.detach().cpu()
    if data.dim() != 2:
        raise ValueError('only (T, F) arrays can be saved, got shape {}'.format(tuple(data.shape)))
    n_frame, n_bin = data.shape
    if n_frame == 0 or n_bin == 0:
        raise ValueError('refusing to save an empty spectrogram')
    if code == DTYPE_COMPLEX:
        payload = torch.view_as_real(data.to(torch.complex128).contiguous()).numpy()
    else:
        payload = data.to(torch.float64).numpy()
    if os.path.dirname(path):
        os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, 'wb') as f:
        f.write(HEADER.pack(constants.SPEC_MAGIC, constants.SPEC_VERSION, n_frame, n_bin, code))
        f.write(np.ascontiguousarray(payload, dtype='<f8').tobytes())
    return path


def load_spectrogram(path, config=None):
    """Spectrogram for complex files, RealMask for real ones."""
    if not os.path.exists(path):
        raise FileNotFoundError('spectrogram file {} not found'.format(path))
    with open(path, 'rb') as f:
        raw = f.read()
    if len(raw) < HEADER.size:
        raise SpectrogramFormatError('{} is truncated: no complete header'.format(path))
    magic, version, n_frame, n_bin, code = HEADER.unpack_from(raw)
    if magic != constants.SPEC_MAGIC:
        raise SpectrogramFormatError('{}: bad magic {!r}'.format(path, magic))
    if version != constants.SPEC_VERSION:
        raise SpectrogramFormatError('{}: unsupported version {}'.format(path, version))
    if code not in (DTYPE_REAL, DTYPE_COMPLEX):
        raise SpectrogramFormatError('{}: unknown dtype code {}'.format(path, code))
    if n_frame == 0 or n_bin == 0:
        raise SpectrogramFormatError('{}: empty spectrogram (T={}, F={})'.format(path, n_frame, n_bin))
    count = n_frame * n_bin * (2 if code == DTYPE_COMPLEX else 1)
    expected = HEADER.size + 8 * count
    if len(raw) != expected:
        raise SpectrogramFormatError('{}: expected {} bytes, found {}'.format(path, expected, len(raw)))
    values = np.frombuffer(raw, dtype='<f8', count=count, offset=HEADER.size).astype(np.float64)
    if code == DTYPE_COMPLEX:
        bins = torch.view_as_complex(torch.from_numpy(values.reshape(n_frame, n_bin, 2).copy()))
        return Spectrogram(bins, config)
    return RealMask(torch.from_numpy(values.reshape(n_frame, n_bin).copy()))
