import torch

from .. import constants
from ..codebook_opt import magnitude_assign, phasebook_assign
from ..oracle_masks import safe_ratio
from ..stft import Spectrogram
from ..utils import get_logger, to_tensor, check_same_shape

logger = get_logger(__name__)


def _bins(value):
    return value.bins if isinstance(value, Spectrogram) else to_tensor(value, torch.complex128)


def magnitude_ref_index(magbook, S, X, theta):
    """Index of the atom closest to Re((s/x) e^{-j theta}), i.e. minimising |m e^{j theta} x - s|."""
    if len(magbook) == 0:
        raise ValueError('empty magbook')
    S, X = _bins(S), _bins(X)
    theta = to_tensor(theta, torch.float64)
    if theta.dim() == 0:
        theta = torch.full(S.shape, float(theta), dtype=torch.float64)
    check_same_shape(S, X, theta, names=('S', 'X', 'theta'))
    return magnitude_assign(magbook.atoms, S, X, theta)


def phase_ref_index(phasebook, S, X):
    return phasebook_assign(phasebook, _bins(S), _bins(X))


def combook_ref_index(combook, S, X):
    """Atom nearest to s/x, which minimises |c x - s| per bin."""
    ratio, _ = safe_ratio(_bins(S), _bins(X))
    distance = (ratio[..., None] - combook.atoms).abs()
    return torch.argmin(distance, dim=-1)


def reference_indices(magbook, phasebook, S, X, policy='fixed-reference', theta_estimate=None):
    """
    Oracle (magnitude, phase) index maps for cross-entropy training.
    ``policy`` picks the phase the magnitude references are computed under:
    'zero', the phasebook reference ('fixed-reference') or the network's
    current phase estimate ('current-estimate').
    """
    if policy not in constants.REFERENCE_PHASE_POLICIES:
        raise ValueError('unknown reference phase policy {!r}, expected one of {}'.format(
            policy, constants.REFERENCE_PHASE_POLICIES))
    S, X = _bins(S), _bins(X)
    phase_index = phase_ref_index(phasebook, S, X) if phasebook is not None else None
    if policy == 'zero':
        theta = torch.zeros(S.shape, dtype=torch.float64)
    elif policy == 'fixed-reference':
        if phase_index is None:
            raise ValueError("policy 'fixed-reference' needs a phasebook")
        theta = phasebook.atoms[phase_index]
    else:
        if theta_estimate is None:
            raise ValueError("policy 'current-estimate' needs theta_estimate")
        theta = to_tensor(theta_estimate, torch.float64).detach()
    return magnitude_ref_index(magbook, S, X, theta), phase_index


def cross_entropy_loss(probs, ref_indices, flags=None, reduction='sum'):
    """-sum log p(ref); probabilities at the reference below 1e-30 are floored and flagged."""
    probs = to_tensor(probs, torch.float64)
    ref_indices = torch.as_tensor(ref_indices, dtype=torch.long)
    if probs.shape[:-1] != ref_indices.shape:
        raise ValueError('probabilities {} do not match reference indices {}'.format(
            tuple(probs.shape), tuple(ref_indices.shape)))
    if ref_indices.numel() and (ref_indices.min() < 0 or ref_indices.max() >= probs.shape[-1]):
        raise ValueError('reference index out of range for {} atoms'.format(probs.shape[-1]))
    picked = torch.gather(probs, -1, ref_indices[..., None])[..., 0]
    floored = picked < constants.CE_LOG_FLOOR
    if floored.any():
        logger.warning('cross entropy: {} bins with zero reference probability floored'.format(int(floored.sum())))
        if flags is not None:
            flags['ce_floor'] = flags.get('ce_floor', 0) + int(floored.sum())
    loss = -torch.log(torch.clamp(picked, min=constants.CE_LOG_FLOOR))
    return loss if reduction == 'none' else loss.sum()
