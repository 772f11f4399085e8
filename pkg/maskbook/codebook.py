"""
Magbook / phasebook / combook representations and the argmax, sampling and
interpolation schemes turning per-bin softmax probabilities into mask values.
"""
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from . import constants
from .oracle_masks import wrap_angle, mask_values
from .stft import Spectrogram
from .utils import get_logger, to_tensor, check_same_shape

logger = get_logger(__name__)

SINGLE_PRECISION = (torch.float16, torch.bfloat16, torch.float32, torch.complex64)


def _single_precision(atoms):
    if isinstance(atoms, torch.Tensor):
        return atoms.dtype in SINGLE_PRECISION
    if isinstance(atoms, np.ndarray):
        return atoms.dtype.kind in 'fc' and atoms.dtype.itemsize < (8 if atoms.dtype.kind == 'f' else 16)
    return False


@dataclass
class Codebook:
    atoms: torch.Tensor
    check: bool = field(default=True, repr=False, compare=False)

    kind = None
    dtype = torch.float64

    def __post_init__(self):
        if _single_precision(self.atoms):
            raise ValueError('{} atoms must be double precision, got {}'.format(self.kind, self.atoms.dtype))
        self.atoms = to_tensor(self.atoms, self.dtype).reshape(-1)
        if self.atoms.numel() < 1:
            raise ValueError('{} needs at least one atom'.format(self.kind))
        if not torch.isfinite(self.atoms).all():
            raise ValueError('{} atoms must be finite'.format(self.kind))
        if self.check and self.atoms.numel() >= 2:
            self._validate()

    def _validate(self):
        pass

    def __len__(self):
        return self.atoms.numel()

    @property
    def size(self):
        return self.atoms.numel()

    def complex_atoms(self):
        """Atoms as points of the complex plane."""
        return self.atoms.to(torch.complex128)


@dataclass
class Magbook(Codebook):
    kind = 'magbook'

    def _validate(self):
        if torch.all(self.atoms == self.atoms[0]):
            raise ValueError('magbook atoms must not all be equal')


@dataclass
class Phasebook(Codebook):
    kind = 'phasebook'

    def __post_init__(self):
        super().__post_init__()
        self.atoms = wrap_angle(self.atoms)

    def _validate(self):
        units = torch.exp(1j * self.atoms.to(torch.complex128))
        distance = (units[:, None] - units[None, :]).abs() + torch.eye(len(units), dtype=torch.float64)
        if (distance < 1e-12).any():
            raise ValueError('phasebook atoms must be pairwise distinct modulo 2 pi')

    def complex_atoms(self):
        return torch.exp(1j * self.atoms.to(torch.complex128))


@dataclass
class Combook(Codebook):
    kind = 'combook'
    dtype = torch.complex128

    def _validate(self):
        distance = (self.atoms[:, None] - self.atoms[None, :]).abs() + torch.eye(len(self.atoms), dtype=torch.float64)
        if (distance < 1e-12).any():
            raise ValueError('combook atoms must be pairwise distinct')


CODEBOOK_TYPES = {'magbook': Magbook, 'phasebook': Phasebook, 'combook': Combook}


def uniform_magbook(M=3, r_max=constants.DEFAULT_R_MAX):
    """Evenly spaced magnitudes on [0, r_max]; M=3, r_max=2 gives the convex softmax {0, 1, 2}."""
    if M < 2:
        raise ValueError('uniform magbook needs M >= 2, got {}'.format(M))
    return Magbook(torch.linspace(0., r_max, M, dtype=torch.float64))


@dataclass
class MaskProbabilities:
    probs: torch.Tensor
    codebook: Codebook

    def __post_init__(self):
        self.probs = to_tensor(self.probs, torch.float64)
        check_simplex(self.probs, self.codebook)


def check_simplex(probs, codebook=None, tol=constants.SIMPLEX_TOL):
    if codebook is not None and probs.shape[-1] != len(codebook):
        raise ValueError('probabilities over {} atoms do not match a {} of size {}'.format(
            probs.shape[-1], codebook.kind, len(codebook)))
    if not torch.isfinite(probs).all():
        raise ValueError('probabilities must be finite')
    if (probs < -tol).any():
        raise ValueError('probabilities must be nonnegative')
    if ((probs.sum(-1) - 1.).abs() > tol).any():
        raise ValueError('probabilities must sum to 1 over the codebook axis')


def _probs(probs, codebook):
    if isinstance(probs, MaskProbabilities):
        return probs.probs
    probs = to_tensor(probs, torch.float64)
    check_simplex(probs, codebook)
    return probs


def infer_argmax(probs, codebook):
    """Atom of maximal probability per bin; ties resolve to the lowest index."""
    probs = _probs(probs, codebook)
    index = torch.argmax(probs, dim=-1)
    return codebook.atoms[index]


def infer_sample(probs, codebook, rng_seed=0):
    """Independent categorical draw per bin, reproducible for a given seed."""
    probs = _probs(probs, codebook)
    generator = torch.Generator().manual_seed(int(rng_seed))
    flat = torch.clamp(probs.reshape(-1, probs.shape[-1]), min=0.)
    index = torch.multinomial(flat, 1, replacement=True, generator=generator).reshape(probs.shape[:-1])
    return codebook.atoms[index]


def phase_interpolation(probs, atoms, eps=constants.PHASE_DEGENERACY_EPS):
    """
    angle(sum_j p_j e^{j theta_j}); returns (theta, degenerate) where degenerate marks
    bins whose weighted sum has modulus below eps. Those bins get theta = 0.
    """
    z = (probs.to(torch.complex128) * torch.exp(1j * atoms.to(torch.complex128))).sum(-1)
    degenerate = z.abs() < eps
    z_safe = torch.where(degenerate, torch.ones_like(z), z)
    theta = torch.where(degenerate, torch.zeros_like(z.real), torch.angle(z_safe))
    return wrap_angle(theta), degenerate


def infer_interpolate(probs, codebook, flags=None):
    """
    Expected value of the atoms; phasebooks interpolate on the unit circle.
    Degenerate phase bins (set to 0) are counted under 'phase_degenerate' in ``flags``.
    """
    probs = _probs(probs, codebook)
    if isinstance(codebook, Phasebook):
        theta, degenerate = phase_interpolation(probs, codebook.atoms)
        count = int(degenerate.sum())
        if count:
            logger.warning('phase interpolation degenerate on {} bins, set to 0'.format(count))
            if flags is not None:
                flags['phase_degenerate'] = flags.get('phase_degenerate', 0) + count
        return theta
    if isinstance(codebook, Combook):
        return (probs.to(torch.complex128) * codebook.atoms).sum(-1)
    return (probs * codebook.atoms).sum(-1)


def compose_complex_mask(magnitudes, phases):
    magnitudes, phases = to_tensor(magnitudes, torch.float64), to_tensor(phases, torch.float64)
    check_same_shape(magnitudes, phases, names=('magnitudes', 'phases'))
    return magnitudes * torch.exp(1j * phases.to(torch.complex128))


def apply_mask(mask, X):
    """Bin-wise product of a (real or complex) mask with the mixture spectrogram."""
    config = X.config if isinstance(X, Spectrogram) else None
    bins = X.bins if isinstance(X, Spectrogram) else to_tensor(X, torch.complex128)
    values = mask_values(mask)
    check_same_shape(values, bins, names=('mask', 'X'))
    return Spectrogram(values.to(torch.complex128) * bins, config)


def save_codebook(path, codebook):
    """Plain text: a ``# kind`` header, then one atom per line (complex atoms as 're im')."""
    lines = ['# {}'.format(codebook.kind)]
    for atom in codebook.atoms.tolist():
        if isinstance(atom, complex):
            lines.append('{:.17g} {:.17g}'.format(atom.real, atom.imag))
        else:
            lines.append('{:.17g}'.format(atom))
    with open(path, 'w') as f:
        f.write('\n'.join(lines) + '\n')
    return path


def load_codebook(path, kind=None):
    atoms = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith('#'):
                kind = kind or line[1:].strip()
                continue
            parts = line.split()
            if len(parts) == 2:
                atoms.append(complex(float(parts[0]), float(parts[1])))
            elif len(parts) == 1:
                atoms.append(float(parts[0]))
            else:
                raise ValueError('cannot parse codebook line {!r} in {}'.format(line, path))
    if kind not in CODEBOOK_TYPES:
        raise ValueError('unknown codebook kind {!r} in {}'.format(kind, path))
    if kind != 'combook' and any(isinstance(atom, complex) for atom in atoms):
        raise ValueError('{} {} holds complex atoms'.format(kind, path))
    return CODEBOOK_TYPES[kind](torch.tensor(atoms, dtype=CODEBOOK_TYPES[kind].dtype))
