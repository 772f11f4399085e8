from itertools import permutations

import torch

from .. import constants
from ..stft import Waveform
from ..utils import to_tensor


def _samples(value):
    return value.samples if isinstance(value, Waveform) else to_tensor(value, torch.float64)


def si_sdr_tensor(estimate, reference, cap=constants.SISDR_CAP_DB):
    """
    Differentiable SI-SDR over the last axis, clamped to [-cap, cap] dB.
    alpha = <e, r> / |r|^2, value = 10 log10(|alpha r|^2 / |alpha r - e|^2).
    """
    estimate, reference = _samples(estimate), _samples(reference)
    if estimate.shape != reference.shape:
        raise ValueError('estimate {} and reference {} differ in shape'.format(tuple(estimate.shape), tuple(reference.shape)))
    ref_energy = (reference ** 2).sum(-1)
    if (ref_energy == 0).any():
        raise ValueError('SI-SDR is undefined for a zero reference')
    alpha = (estimate * reference).sum(-1, keepdim=True) / ref_energy[..., None]
    target = alpha * reference
    target_energy = (target ** 2).sum(-1)
    residual_energy = ((target - estimate) ** 2).sum(-1)
    tiny = residual_energy <= (constants.SISDR_RESIDUAL_TOL ** 2) * target_energy
    empty = target_energy == 0
    ratio = target_energy / torch.where(tiny | empty, torch.ones_like(residual_energy), residual_energy)
    value = 10 * torch.log10(torch.where(empty, torch.ones_like(ratio), ratio))
    value = torch.where(tiny & ~empty, torch.full_like(value, cap), value)
    value = torch.where(empty, torch.full_like(value, -cap), value)
    return torch.clamp(value, -cap, cap)


def si_sdr(estimate, reference):
    """SI-SDR in dB as a float; +120 for (scaled) perfect estimates, -120 for zero estimates."""
    return float(si_sdr_tensor(estimate, reference).detach())


def best_permutation(score_matrix):
    """
    perm maximising sum_r score_matrix[r][perm[r]] (reference r <- estimate perm[r]);
    the identity is kept unless another permutation is strictly better.
    """
    n_source = len(score_matrix)
    best_total, best_perm = None, None
    for perm in permutations(range(n_source)):
        total = sum(score_matrix[r][e] for r, e in enumerate(perm))
        if best_total is None or total > best_total:
            best_total, best_perm = total, perm
    return best_perm, best_total
