"""
STFT analysis / synthesis with perfect reconstruction.

Frames are taken after zero-padding ``win_length - hop`` samples at the start and
enough zeros at the end that every input sample is covered by a full set of
overlapping frames. The synthesis window is the canonical dual of the analysis
window, so ``istft(stft(x))`` returns ``x`` up to rounding.
All arithmetic is float64 / complex128 and differentiable through torch autograd.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import torch

from . import constants
from .utils import get_logger, to_tensor

logger = get_logger(__name__)


@dataclass
class Waveform:
    samples: torch.Tensor
    sample_rate: int = constants.DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = to_tensor(self.samples, torch.float64)
        if int(self.sample_rate) <= 0:
            raise ValueError('sample_rate must be positive, got {}'.format(self.sample_rate))
        if not torch.isfinite(self.samples).all():
            raise ValueError('waveform contains NaN or Inf samples')

    def __len__(self):
        return self.samples.shape[-1]


@dataclass(frozen=True)
class StftConfig:
    win_length: int = constants.DEFAULT_WIN_LENGTH
    hop: int = constants.DEFAULT_HOP
    dft_size: int = constants.DEFAULT_DFT_SIZE
    window: str = constants.DEFAULT_WINDOW
    sample_rate: int = constants.DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        if not 0 < self.hop <= self.win_length <= self.dft_size:
            raise ValueError('expected 0 < hop <= win_length <= dft_size, got hop={} win_length={} dft_size={}'.format(
                self.hop, self.win_length, self.dft_size))
        if self.window not in constants.WINDOW_KINDS:
            raise ValueError('unsupported window kind {!r}, expected one of {}'.format(self.window, constants.WINDOW_KINDS))
        if self.sample_rate <= 0:
            raise ValueError('sample_rate must be positive')

    @property
    def n_bins(self):
        return self.dft_size // 2 + 1

    @property
    def pad(self):
        return self.win_length - self.hop

    def analysis_window(self):
        return make_window(self.window, self.win_length)

    def synthesis_window(self):
        return synthesis_window(self.analysis_window(), self.hop)


@dataclass
class Spectrogram:
    bins: torch.Tensor
    config: Optional[StftConfig] = field(default=None)

    def __post_init__(self):
        self.bins = to_tensor(self.bins, torch.complex128)
        if self.bins.dim() < 2:
            raise ValueError('spectrogram needs at least 2 dimensions (T, F), got shape {}'.format(tuple(self.bins.shape)))
        if not torch.isfinite(self.bins).all():
            raise ValueError('spectrogram contains NaN or Inf bins')
        if self.config is not None and self.bins.shape[-1] != self.config.n_bins:
            raise ValueError('spectrogram has {} frequency bins but config expects {}'.format(
                self.bins.shape[-1], self.config.n_bins))

    @property
    def shape(self):
        return tuple(self.bins.shape)

    @property
    def n_frames(self):
        return self.bins.shape[-2]


def make_window(kind, length):
    """Analysis window of ``length`` samples; periodic variants so that hop-shifted sums are flat."""
    if length <= 0:
        raise ValueError('window length must be positive, got {}'.format(length))
    if kind == 'sqrt_hann':
        window = torch.hann_window(length, periodic=True, dtype=torch.float64).sqrt()
    elif kind == 'hann':
        window = torch.hann_window(length, periodic=True, dtype=torch.float64)
    elif kind == 'hamming':
        window = torch.hamming_window(length, periodic=True, dtype=torch.float64)
    elif kind == 'rect':
        window = torch.ones(length, dtype=torch.float64)
    else:
        raise ValueError('unsupported window kind {!r}, expected one of {}'.format(kind, constants.WINDOW_KINDS))
    if not (window.abs() > 0).any():
        raise ValueError('window {!r} of length {} has no energy'.format(kind, length))
    return window


def synthesis_window(analysis, hop):
    """Dual window: overlap-add of analysis * synthesis sums to 1 on the fully overlapped region."""
    length = analysis.shape[-1]
    squared = analysis ** 2
    denominator = torch.stack([squared[n % hop::hop].sum() for n in range(length)])
    if (denominator <= constants.COLA_TOL).any():
        raise ValueError('window of length {} with hop {} cannot be inverted by overlap-add'.format(length, hop))
    return analysis / denominator


def n_frames(length, config):
    if length <= 0:
        raise ValueError('cannot transform an empty waveform')
    return math.ceil((length + config.win_length - 1) / config.hop)


def _frame_positions(n_frame, config):
    starts = torch.arange(n_frame) * config.hop
    return starts[:, None] + torch.arange(config.win_length)[None, :]


def stft(waveform, config=None):
    """Returns a Spectrogram of shape (..., T, F); leading dimensions are treated as a batch."""
    if isinstance(waveform, Waveform):
        if config is None:
            config = StftConfig(sample_rate=waveform.sample_rate)
        samples = waveform.samples
    else:
        samples = to_tensor(waveform, torch.float64)
    config = config or StftConfig()
    length = samples.shape[-1]
    n_frame = n_frames(length, config)
    total = (n_frame - 1) * config.hop + config.win_length
    padded = torch.nn.functional.pad(samples, (config.pad, total - config.pad - length))
    frames = padded.unfold(-1, config.win_length, config.hop) * config.analysis_window()
    bins = torch.fft.rfft(frames, n=config.dft_size, dim=-1)
    return Spectrogram(bins, config)


def default_length(n_frame, config):
    return (n_frame - 1) * config.hop + config.win_length - 2 * config.pad


def istft(spectrogram, config=None, target_length=None):
    """Inverse of :func:`stft`; output is cropped or zero-padded to ``target_length`` samples."""
    if isinstance(spectrogram, Spectrogram):
        config = config or spectrogram.config
        bins = spectrogram.bins
    else:
        bins = to_tensor(spectrogram, torch.complex128)
    config = config or StftConfig()
    if bins.dim() < 2 or bins.shape[-1] != config.n_bins:
        raise ValueError('spectrogram of shape {} does not match config with {} bins'.format(tuple(bins.shape), config.n_bins))
    n_frame = bins.shape[-2]
    if target_length is None:
        target_length = default_length(n_frame, config)
    # irfft drops the imaginary parts of the DC and Nyquist bins, i.e. enforces conjugate symmetry
    frames = torch.fft.irfft(bins, n=config.dft_size, dim=-1)[..., :config.win_length] * config.synthesis_window()
    total = (n_frame - 1) * config.hop + config.win_length
    positions = _frame_positions(n_frame, config).reshape(-1)
    batch_shape = frames.shape[:-2]
    signal = torch.zeros(*batch_shape, total, dtype=frames.dtype, device=frames.device)
    signal = signal.index_add(-1, positions.to(frames.device), frames.reshape(*batch_shape, -1))
    signal = signal[..., config.pad:]
    if signal.shape[-1] >= target_length:
        return signal[..., :target_length]
    return torch.nn.functional.pad(signal, (0, target_length - signal.shape[-1]))
