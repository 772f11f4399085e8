"""
Oracle time-frequency masks computed from reference source, interference and mixture spectrograms.
"""
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import torch

from . import constants
from .stft import Spectrogram
from .utils import get_logger, to_tensor, check_same_shape

logger = get_logger(__name__)


class MaskKind(str, Enum):
    IBM = 'IBM'
    IRM = 'IRM'
    WF = 'WF'
    IAM = 'IAM'
    PSF = 'PSF'
    TPSF = 'TPSF'
    ICM = 'ICM'

    @property
    def is_complex(self):
        return self is MaskKind.ICM

    @property
    def uses_r_max(self):
        return self.value in constants.R_MAX_MASK_KINDS


@dataclass
class RealMask:
    values: torch.Tensor
    r_max: float = constants.UNBOUNDED
    guarded: int = 0


@dataclass
class ComplexMask:
    values: torch.Tensor
    guarded: int = 0


def mask_values(mask, dtype=None):
    """Values of a RealMask / ComplexMask, or the mask itself as a tensor."""
    if isinstance(mask, (RealMask, ComplexMask)):
        return mask.values if dtype is None else mask.values.to(dtype)
    return to_tensor(mask, dtype)


def _bins(value):
    if value is None:
        return None
    if isinstance(value, Spectrogram):
        return value.bins
    return to_tensor(value, torch.complex128)


def wrap_angle(theta):
    """Maps angles into (-pi, pi]."""
    return theta - 2 * math.pi * torch.ceil((theta - math.pi) / (2 * math.pi))


def zero_mixture(X, eps=constants.ZERO_MIXTURE_EPS):
    return X.abs() < eps


def safe_ratio(S, X, eps=constants.ZERO_MIXTURE_EPS):
    """s / x with 0 on zero-mixture bins."""
    guard = zero_mixture(X, eps)
    X_safe = torch.where(guard, torch.ones_like(X), X)
    return torch.where(guard, torch.zeros_like(S), S / X_safe), guard


def phase_difference(S, X):
    """theta = angle(s / x) in (-pi, pi]; 0 on zero-mixture bins."""
    S, X = _bins(S), _bins(X)
    check_same_shape(S, X, names=('S', 'X'))
    guard = zero_mixture(X)
    theta = wrap_angle(torch.angle(S * X.conj()))
    theta = torch.where(guard, torch.zeros_like(theta), theta)
    if guard.any():
        logger.debug('phase_difference: {} zero-mixture bins set to 0'.format(int(guard.sum())))
    return theta


def clamp_magnitude(C, r_max):
    """Clamps |c| to r_max, keeping the phase."""
    if math.isinf(r_max):
        return C
    magnitude = C.abs()
    scale = torch.where(magnitude > r_max, r_max / torch.clamp(magnitude, min=r_max), torch.ones_like(magnitude))
    return C * scale


def oracle_mask(kind, S, N=None, X=None, r_max=constants.DEFAULT_R_MAX):
    """
    Oracle mask of the given kind for target S.
    Either N (interference) or X (mixture) may be omitted; the missing one is derived from X = S + N.
    Returns a RealMask for IBM/IRM/WF/IAM/PSF/TPSF and a ComplexMask for ICM.
    """
    kind = MaskKind(kind)
    if r_max is None:
        r_max = constants.UNBOUNDED
    if r_max <= 0:
        raise ValueError('r_max must be positive, got {}'.format(r_max))
    S, N, X = _bins(S), _bins(N), _bins(X)
    if N is None and X is None:
        raise ValueError('oracle_mask needs the interference N or the mixture X')
    check_same_shape(S, N, X, names=('S', 'N', 'X'))
    if X is None:
        X = S + N
    elif N is None:
        N = X - S
    else:
        scale = max(float(X.abs().max()), 1.)
        if not torch.allclose(X, S + N, rtol=0, atol=1e-6 * scale):
            raise ValueError('mixture X differs from S + N')

    guard = zero_mixture(X)
    guarded = int(guard.sum())
    abs_s, abs_n, abs_x = S.abs(), N.abs(), X.abs()
    abs_x_safe = torch.where(guard, torch.ones_like(abs_x), abs_x)

    if kind is MaskKind.IBM:
        # ties |s| == |n| resolve to 0
        return RealMask((abs_s > abs_n).to(torch.float64), 1., 0)
    if kind is MaskKind.IRM:
        denominator = abs_s + abs_n
        zero = denominator < constants.ZERO_MIXTURE_EPS
        values = torch.where(zero, torch.zeros_like(abs_s), abs_s / torch.where(zero, torch.ones_like(denominator), denominator))
        return RealMask(values, 1., int(zero.sum()))
    if kind is MaskKind.WF:
        denominator = abs_s ** 2 + abs_n ** 2
        zero = denominator < constants.ZERO_MIXTURE_EPS ** 2
        values = torch.where(zero, torch.zeros_like(abs_s), abs_s ** 2 / torch.where(zero, torch.ones_like(denominator), denominator))
        return RealMask(values, 1., int(zero.sum()))
    if kind is MaskKind.IAM:
        values = torch.where(guard, torch.zeros_like(abs_s), abs_s / abs_x_safe)
        return RealMask(torch.clamp(values, 0., r_max), r_max, guarded)
    if kind in (MaskKind.PSF, MaskKind.TPSF):
        # |s| cos(theta) / |x| = Re(s conj(x)) / |x|^2
        values = torch.where(guard, torch.zeros_like(abs_s), (S * X.conj()).real / abs_x_safe ** 2)
        if kind is MaskKind.TPSF:
            return RealMask(torch.clamp(values, 0., 1.), 1., guarded)
        return RealMask(values, constants.UNBOUNDED, guarded)
    ratio, _ = safe_ratio(S, X)
    return ComplexMask(clamp_magnitude(ratio, r_max), guarded)


def dominance_labels(sources):
    """One-hot (T*F) x S matrix marking the loudest source of every bin; ties go to the lowest index."""
    stacked = torch.stack([_bins(source) for source in sources], dim=-1)
    winners = stacked.abs().reshape(-1, stacked.shape[-1]).argmax(dim=-1)
    return torch.nn.functional.one_hot(winners, stacked.shape[-1]).to(torch.float64)


def mask_histogram(values, bins=50, value_range=None, weights=None):
    """Histogram (optionally energy-weighted, e.g. by |x|^2) of mask values or phase differences."""
    values = to_tensor(values).detach().reshape(-1).cpu().numpy()
    if weights is not None:
        weights = to_tensor(weights).detach().reshape(-1).cpu().numpy()
    density, edges = np.histogram(values, bins=bins, range=value_range, weights=weights, density=True)
    return density, edges
