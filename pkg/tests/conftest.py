import math

import pytest
import torch

from maskbook.stft import StftConfig


@pytest.fixture
def small_config():
    return StftConfig(win_length=32, hop=8, dft_size=32)


@pytest.fixture
def two_tones():
    """Two sinusoids in well separated bands and their sum, 0.1 s at 8 kHz."""
    t = torch.arange(800, dtype=torch.float64) / 8000
    sources = torch.stack([torch.sin(2 * math.pi * 440 * t), 0.5 * torch.sin(2 * math.pi * 2500 * t)])
    return sources, sources.sum(0)


def random_spectra(shape, seed=0):
    generator = torch.Generator().manual_seed(seed)
    real = torch.randn(*shape, generator=generator, dtype=torch.float64)
    imag = torch.randn(*shape, generator=generator, dtype=torch.float64)
    return torch.complex(real, imag)
