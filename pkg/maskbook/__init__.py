from .stft import Waveform, Spectrogram, StftConfig, stft, istft
from .oracle_masks import RealMask, ComplexMask, MaskKind, oracle_mask
from .codebook import Magbook, Phasebook, Combook, load_codebook, save_codebook
from .misi import misi

__version__ = '0.1.0'
