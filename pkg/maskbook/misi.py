"""
Multiple input spectrogram inversion: joint phase retrieval for all sources of a
mixture. Magnitudes stay fixed; each iteration spreads the mixture error evenly
over the sources and re-reads the phases from the re-analysed signals.
The loop is plain torch, so it can be unfolded inside an autograd graph.
"""
from dataclasses import dataclass, replace

import torch

from . import constants
from .oracle_masks import wrap_angle
from .stft import Spectrogram, StftConfig, Waveform, stft, istft, n_frames
from .utils import get_logger, to_tensor

logger = get_logger(__name__)


@dataclass
class MisiState:
    magnitudes: torch.Tensor
    phases: torch.Tensor
    mixture: torch.Tensor
    config: StftConfig
    iteration: int = 0

    @property
    def n_sources(self):
        return self.magnitudes.shape[0]

    def synthesize(self):
        """Per-source waveforms istft(A e^{j phi}) and the mixture residual delta."""
        spectra = self.magnitudes.to(torch.complex128) * torch.exp(1j * self.phases.to(torch.complex128))
        sources = istft(spectra, self.config, target_length=self.mixture.shape[-1])
        residual = self.mixture - sources.sum(0)
        return sources, residual

    def outputs(self):
        sources, residual = self.synthesize()
        return sources + residual / self.n_sources


def _stack(values, dtype):
    if isinstance(values, (list, tuple)):
        return torch.stack([v.bins if isinstance(v, Spectrogram) else to_tensor(v, dtype) for v in values])
    return to_tensor(values, dtype)


def init_state(magnitudes, init_phases, x_time, config=None):
    config = config or StftConfig()
    magnitudes = _stack(magnitudes, torch.float64)
    phases = _stack(init_phases, torch.float64)
    mixture = x_time.samples if isinstance(x_time, Waveform) else to_tensor(x_time, torch.float64)
    if magnitudes.dim() != 3 or magnitudes.shape[0] < 1:
        raise ValueError('MISI needs I >= 1 magnitude spectrograms of shape (T, F), got {}'.format(tuple(magnitudes.shape)))
    if magnitudes.shape != phases.shape:
        raise ValueError('magnitudes {} and phases {} differ in shape'.format(tuple(magnitudes.shape), tuple(phases.shape)))
    if magnitudes.shape[-1] != config.n_bins:
        raise ValueError('spectrograms have {} bins, config expects {}'.format(magnitudes.shape[-1], config.n_bins))
    if n_frames(mixture.shape[-1], config) != magnitudes.shape[1]:
        raise ValueError('mixture of {} samples does not give {} frames'.format(mixture.shape[-1], magnitudes.shape[1]))
    return MisiState(magnitudes, wrap_angle(phases), mixture, config)


def misi_step(state, eps=constants.PHASE_DEGENERACY_EPS):
    """One iteration; bins whose re-analysed value vanishes keep their previous phase."""
    sources, residual = state.synthesize()
    spectra = stft(sources + residual / state.n_sources, state.config).bins
    degenerate = spectra.abs() < eps
    safe = torch.where(degenerate, torch.ones_like(spectra), spectra)
    phases = torch.where(degenerate, state.phases, torch.angle(safe))
    return replace(state, phases=phases, iteration=state.iteration + 1)


def misi(magnitudes, init_phases, x_time, K, config=None, redistribute_at_zero=False):
    """
    Returns an (I, L) tensor of source estimates after K iterations.
    For K > 0 the estimates sum to the mixture; K = 0 is the plain masked iSTFT
    unless ``redistribute_at_zero`` is set.
    """
    if K < 0:
        raise ValueError('MISI iterations must be >= 0, got {}'.format(K))
    state = init_state(magnitudes, init_phases, x_time, config)
    if K == 0 and not redistribute_at_zero:
        sources, _ = state.synthesize()
        return sources
    for _ in range(K):
        state = misi_step(state)
    logger.debug('MISI: {} sources, {} iterations'.format(state.n_sources, state.iteration))
    return state.outputs()
