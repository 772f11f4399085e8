"""
Regression objectives on masks, spectra and resynthesised waveforms.
All reductions are sums over bins (or samples); ``reduction='none'`` keeps the per-bin terms.
"""
import torch

from .. import constants
from ..misi import misi
from ..codebook import Codebook
from ..oracle_masks import oracle_mask, phase_difference, safe_ratio, mask_values
from ..stft import Spectrogram, StftConfig, istft, n_frames
from ..utils import to_tensor, check_same_shape


def _bins(value):
    return value.bins if isinstance(value, Spectrogram) else to_tensor(value, torch.complex128)


def _atoms(codebook):
    return codebook.atoms if isinstance(codebook, Codebook) else to_tensor(codebook)


def reduce_norm(residual, norm='L1', reduction='sum'):
    """|r| for L1, |r|^2 for (squared) L2; complex residuals use the modulus."""
    if norm == 'L1':
        terms = residual.abs()
    elif norm == 'L2':
        terms = residual.abs() ** 2
    else:
        raise ValueError('unknown norm {!r}, expected one of {}'.format(norm, constants.LOSS_NORMS))
    if reduction == 'none':
        return terms
    if reduction != 'sum':
        raise ValueError("reduction must be 'sum' or 'none'")
    return terms.sum()


def spectral_loss(kind, norm, m_out, X, S, m_ref=None, reduction='sum'):
    """MA / MSA / PSA losses of a real mask estimate."""
    X, S = _bins(X), _bins(S)
    m_out = mask_values(m_out, torch.float64)
    check_same_shape(m_out, X, S, names=('m_out', 'X', 'S'))
    if kind == 'MA':
        if m_ref is None:
            m_ref = oracle_mask('IAM', S, X=X, r_max=constants.UNBOUNDED)
        m_ref = mask_values(m_ref, torch.float64)
        check_same_shape(m_out, m_ref, names=('m_out', 'm_ref'))
        residual = m_out - m_ref
    elif kind == 'MSA':
        residual = m_out * X.abs() - S.abs()
    elif kind == 'PSA':
        residual = m_out * X.abs() - S.abs() * torch.cos(phase_difference(S, X))
    else:
        raise ValueError('unknown spectral loss {!r}, expected one of {}'.format(kind, constants.SPECTRAL_LOSS_KINDS))
    return reduce_norm(residual, norm, reduction)


def complex_loss(kind, norm, c_out, X, S, c_ref=None, reduction='sum'):
    """CMA / CSA losses of a complex mask estimate."""
    X, S = _bins(X), _bins(S)
    c_out = mask_values(c_out, torch.complex128).to(torch.complex128)
    check_same_shape(c_out, X, S, names=('c_out', 'X', 'S'))
    if kind == 'CMA':
        if c_ref is None:
            c_ref, _ = safe_ratio(S, X)
        c_ref = mask_values(c_ref, torch.complex128).to(torch.complex128)
        residual = c_out - c_ref
    elif kind == 'CSA':
        residual = c_out * X - S
    else:
        raise ValueError('unknown complex loss {!r}, expected one of {}'.format(kind, constants.COMPLEX_LOSS_KINDS))
    return reduce_norm(residual, norm, reduction)


def expected_csa_loss(mag_probs, phase_probs, magbook, phasebook, X, S, norm='L1', reduction='sum'):
    """
    CSA loss averaged exactly over independent per-bin draws from the magnitude
    and phase softmaxes: sum_i sum_j p(m_i) p(theta_j) |m_i e^{j theta_j} x - s|.
    """
    X, S = _bins(X), _bins(S)
    mag_probs, phase_probs = to_tensor(mag_probs, torch.float64), to_tensor(phase_probs, torch.float64)
    if mag_probs.shape[:-1] != X.shape or phase_probs.shape[:-1] != X.shape:
        raise ValueError('probabilities {} / {} do not match spectrogram {}'.format(
            tuple(mag_probs.shape), tuple(phase_probs.shape), tuple(X.shape)))
    mag_atoms = _atoms(magbook)
    phase_atoms = _atoms(phasebook)
    # candidates (M, P): m_i e^{j theta_j}
    candidates = mag_atoms[:, None].to(torch.complex128) * torch.exp(1j * phase_atoms[None, :].to(torch.complex128))
    residual = candidates * X[..., None, None] - S[..., None, None]
    weights = mag_probs[..., :, None] * phase_probs[..., None, :]
    terms = (weights * reduce_norm(residual, norm, 'none')).sum((-2, -1))
    return terms if reduction == 'none' else terms.sum()


def expected_combook_csa_loss(probs, combook, X, S, norm='L1', reduction='sum'):
    """sum_k p(c_k) |c_k x - s| for a combook head."""
    X, S = _bins(X), _bins(S)
    probs = to_tensor(probs, torch.float64)
    if probs.shape[:-1] != X.shape:
        raise ValueError('probabilities {} do not match spectrogram {}'.format(tuple(probs.shape), tuple(X.shape)))
    atoms = _atoms(combook)
    residual = atoms.to(torch.complex128) * X[..., None] - S[..., None]
    terms = (probs * reduce_norm(residual, norm, 'none')).sum(-1)
    return terms if reduction == 'none' else terms.sum()


def polar(Z, eps=constants.GRAD_DEGENERACY_EPS):
    """(|z|, angle z) with angle 0 and no gradient flow on bins where |z| < eps."""
    degenerate = Z.abs() < eps
    safe = torch.where(degenerate, torch.ones_like(Z), Z)
    return Z.abs(), torch.where(degenerate, torch.zeros_like(Z.real), torch.angle(safe))


def wa_loss(mask_or_estimate, X, s_time, norm='L1', misi_iters=0, x_time=None, config=None,
            is_spectrum=False, reduction='sum'):
    """
    Waveform approximation on istft(c x), or on the MISI output after ``misi_iters``
    unfolded iterations. For misi_iters > 0, masks (or spectra) of all sources
    are stacked on the leading axis, matching ``s_time`` of shape (I, L).
    """
    if misi_iters < 0:
        raise ValueError('misi_iters must be >= 0')
    if isinstance(X, Spectrogram):
        config = config or X.config
    config = config or StftConfig()
    X = _bins(X)
    s_time = to_tensor(s_time, torch.float64)
    length = s_time.shape[-1]
    if n_frames(length, config) != X.shape[-2]:
        raise ValueError('reference of {} samples does not match {} frames'.format(length, X.shape[-2]))
    estimate = mask_values(mask_or_estimate, torch.complex128).to(torch.complex128)
    spectra = estimate if is_spectrum else estimate * X
    if spectra.shape[-2:] != X.shape:
        raise ValueError('estimate {} does not match spectrogram {}'.format(tuple(spectra.shape), tuple(X.shape)))
    if misi_iters == 0:
        waveforms = istft(spectra, config, target_length=length)
    else:
        if spectra.dim() != 3:
            raise ValueError('MISI needs stacked source estimates of shape (I, T, F)')
        if x_time is None:
            x_time = istft(X, config, target_length=length)
        magnitudes, phases = polar(spectra)
        waveforms = misi(magnitudes, phases, x_time, misi_iters, config)
    if waveforms.shape != s_time.shape:
        raise ValueError('estimate {} and reference {} differ in length'.format(tuple(waveforms.shape), tuple(s_time.shape)))
    return reduce_norm(waveforms - s_time, norm, reduction)
