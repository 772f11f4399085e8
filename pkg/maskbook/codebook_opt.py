"""
Offline codebook optimisation on oracle targets.

Every routine minimises the weighted squared error sum_{t,f} |c_{t,f} x_{t,f} - s_{t,f}|^2
(= sum |x|^2 |c - s/x|^2) by alternating assignment and value updates, so the
objective trace is non-increasing step by step.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import torch

from . import constants
from .codebook import Magbook, Phasebook, Combook
from .oracle_masks import oracle_mask, phase_difference, wrap_angle, zero_mixture, clamp_magnitude, safe_ratio
from .stft import Spectrogram
from .utils import get_logger, to_tensor, check_same_shape

logger = get_logger(__name__)


@dataclass
class AssignmentMap:
    indices: List[torch.Tensor]
    codebook_size: int

    def __post_init__(self):
        for index in self.indices:
            if index.numel() and (index.min() < 0 or index.max() >= self.codebook_size):
                raise ValueError('assignment index out of range for codebook of size {}'.format(self.codebook_size))

    @classmethod
    def split(cls, flat, shapes, codebook_size):
        """Cuts corpus-flat indices back into one T x F matrix per utterance."""
        sizes = [int(torch.Size(shape).numel()) for shape in shapes]
        chunks = torch.split(flat.reshape(-1), sizes)
        return cls([chunk.reshape(shape) for chunk, shape in zip(chunks, shapes)], codebook_size)


@dataclass
class OptReport:
    trace: list = field(default_factory=list)
    epochs_run: int = 0
    converged: bool = False
    atoms_history: list = field(default_factory=list)
    assignments: Optional[AssignmentMap] = None
    magbook_assignments: Optional[AssignmentMap] = None

    def record(self, epoch, step, objective):
        self.trace.append({'epoch': epoch, 'step': step, 'objective': float(objective)})
        logger.debug('epoch {} {}: objective {:.6e}'.format(epoch, step, float(objective)))

    def record_atoms(self, epoch, name, atoms):
        for index, atom in enumerate(atoms.detach().reshape(-1).tolist()):
            row = {'epoch': epoch, 'codebook': name, 'index': index}
            if isinstance(atom, complex):
                row.update({'real': atom.real, 'imag': atom.imag})
            else:
                row.update({'real': atom, 'imag': 0.})
            self.atoms_history.append(row)

    @property
    def objectives(self):
        return [row['objective'] for row in self.trace]

    def is_monotone(self, rtol=1e-9):
        values = self.objectives
        return all(b <= a + rtol * max(abs(a), 1.) for a, b in zip(values[:-1], values[1:]))


def _bins(value):
    if isinstance(value, Spectrogram):
        return value.bins
    return to_tensor(value, torch.complex128)


def _flatten_corpus(corpus, magnitudes=None):
    """Concatenates (S, X) pairs of a corpus into flat bin vectors."""
    corpus = list(corpus)
    if len(corpus) == 0:
        raise ValueError('codebook optimisation needs a non-empty corpus')
    S_all, X_all, m_all = [], [], []
    for index, (S, X) in enumerate(corpus):
        S, X = _bins(S), _bins(X)
        check_same_shape(S, X, names=('S', 'X'))
        S_all.append(S.reshape(-1))
        X_all.append(X.reshape(-1))
        if magnitudes is not None:
            m = to_tensor(magnitudes[index], torch.float64)
            check_same_shape(m, S, names=('M_est', 'S'))
            m_all.append(m.reshape(-1))
    S, X = torch.cat(S_all), torch.cat(X_all)
    m = torch.cat(m_all) if magnitudes is not None else None
    return S, X, m


def _corpus_shapes(corpus):
    return [tuple(_bins(S).shape) for S, _ in corpus]


def _corpus_magnitudes(corpus, m_source, magnitudes, r_max):
    if m_source == 'oracle-iam':
        return [oracle_mask('IAM', S, X=X, r_max=r_max).values for S, X in corpus]
    if m_source == 'provided':
        if magnitudes is None or len(magnitudes) != len(corpus):
            raise ValueError('provided magnitude estimates must align with the corpus')
        return magnitudes
    raise ValueError("M_source must be 'oracle-iam' or 'provided', got {!r}".format(m_source))


def uniform_phasebook(P):
    """{2 p pi / P} mapped into (-pi, pi]; always contains 0."""
    if P < 2:
        raise ValueError('uniform phasebook needs P >= 2, got {}'.format(P))
    return Phasebook(wrap_angle(2 * torch.pi * torch.arange(P, dtype=torch.float64) / P))


def uniform_combook(C, radius=1.):
    """0 plus C - 1 points evenly spread on the circle of the given radius (C >= 2)."""
    if C < 2:
        raise ValueError('uniform combook needs C >= 2, got {}'.format(C))
    ring = radius * torch.exp(2j * torch.pi * torch.arange(C - 1, dtype=torch.float64) / (C - 1))
    return Combook(torch.cat([torch.zeros(1, dtype=torch.complex128), ring]))


def masked_error(values, S, X):
    """sum |c x - s|^2 for per-bin complex mask values c."""
    return ((values * X - S).abs() ** 2).sum()


def phasebook_objective(phasebook, assignments, S, X, M_est):
    atoms = phasebook.atoms if isinstance(phasebook, Phasebook) else phasebook
    S, X = _bins(S), _bins(X)
    values = to_tensor(M_est, torch.float64) * torch.exp(1j * atoms[assignments].to(torch.complex128))
    return masked_error(values, S, X)


def _phase_scores(atoms, phi):
    return torch.cos(atoms[None, :] - phi.reshape(-1)[:, None]).reshape(*phi.shape, -1)


def phasebook_assign(phasebook, S, X):
    """Per bin, the atom maximising cos(theta_j - angle(s/x)); lowest index on ties."""
    if len(phasebook) == 0:
        raise ValueError('empty phasebook')
    phi = phase_difference(S, X)
    return torch.argmax(_phase_scores(phasebook.atoms, phi), dim=-1)


def _weighted_phase_assign(atoms, phi, m):
    # argmin |m e^{j theta} x - s| = argmax m cos(theta - phi), also for negative m
    sign = torch.where(m < 0, -torch.ones_like(m), torch.ones_like(m))
    return torch.argmax(sign[..., None] * _phase_scores(atoms, phi), dim=-1)


def _phasebook_values(atoms, assignments, S, X, m):
    # |x|^2 (s/x) m = m s conj(x)
    weighted = (m * S * X.conj()).reshape(-1)
    z = torch.zeros(len(atoms), dtype=torch.complex128).index_add(0, assignments.reshape(-1), weighted)
    used = z.abs() > 0
    return torch.where(used, torch.angle(torch.where(used, z, torch.ones_like(z))), atoms)


def phasebook_update(phasebook, assignments, S, X, M_est):
    """M-step: atom j <- angle(sum over its bins of m |x|^2 s/x); unused atoms are left unchanged."""
    if isinstance(S, (list, tuple)):
        S, X, m = _flatten_corpus(zip(S, X), M_est)
        assignments = torch.cat([a.reshape(-1) for a in assignments])
    else:
        S, X, m = _bins(S), _bins(X), to_tensor(M_est, torch.float64)
    atoms = _phasebook_values(phasebook.atoms, assignments, S, X, m)
    return Phasebook(atoms, check=False)


def optimize_phasebook(init, corpus, M_source='oracle-iam', epochs=constants.DEFAULT_EM_EPOCHS,
                       magnitudes=None, r_max=constants.DEFAULT_R_MAX):
    """EM over the corpus; stops early once an E-step leaves the assignments unchanged."""
    if epochs < 0:
        raise ValueError('epochs must be >= 0')
    corpus = list(corpus)
    if len(corpus) == 0:
        raise ValueError('codebook optimisation needs a non-empty corpus')
    magnitudes = _corpus_magnitudes(corpus, M_source, magnitudes, r_max)
    S, X, m = _flatten_corpus(corpus, magnitudes)
    phi = phase_difference(S, X)

    report = OptReport()
    atoms = init.atoms.clone()
    assignments = torch.argmax(_phase_scores(atoms, phi), dim=-1)
    report.record(0, 'init', phasebook_objective(atoms, assignments, S, X, m))
    report.record_atoms(0, 'phasebook', atoms)
    previous = None
    for epoch in range(1, epochs + 1):
        assignments = torch.argmax(_phase_scores(atoms, phi), dim=-1)
        report.record(epoch, 'assign', phasebook_objective(atoms, assignments, S, X, m))
        report.epochs_run = epoch
        if previous is not None and torch.equal(assignments, previous):
            report.converged = True
            break
        atoms = _phasebook_values(atoms, assignments, S, X, m)
        report.record(epoch, 'update', phasebook_objective(atoms, assignments, S, X, m))
        report.record_atoms(epoch, 'phasebook', atoms)
        previous = assignments
    report.assignments = AssignmentMap.split(torch.argmax(_phase_scores(atoms, phi), dim=-1), _corpus_shapes(corpus), len(atoms))
    logger.info('phasebook EM: {} epochs, objective {:.6e} -> {:.6e}'.format(
        report.epochs_run, report.objectives[0], report.objectives[-1]))
    return Phasebook(atoms, check=False), report


def _projected_real(S, X, theta):
    """Re((s/x) e^{-j theta}); 0 on zero-mixture bins."""
    guard = zero_mixture(X)
    abs_x2 = torch.where(guard, torch.ones_like(X.real), X.abs() ** 2)
    value = (S * X.conj() * torch.exp(-1j * theta.to(torch.complex128))).real / abs_x2
    return torch.where(guard, torch.zeros_like(value), value)


def magnitude_assign(magbook_atoms, S, X, theta):
    """argmin_i |m_i - Re((s/x) e^{-j theta})|; lowest index on ties."""
    target = _projected_real(S, X, theta)
    return torch.argmin((magbook_atoms[None, :] - target.reshape(-1)[:, None]).abs(), dim=-1).reshape(target.shape)


def _magbook_values(atoms, assignments, S, X, theta):
    numerator = (S * X.conj() * torch.exp(-1j * theta.to(torch.complex128))).real
    weights = X.abs() ** 2
    num = torch.zeros(len(atoms), dtype=torch.float64).index_add(0, assignments.reshape(-1), numerator.reshape(-1))
    den = torch.zeros(len(atoms), dtype=torch.float64).index_add(0, assignments.reshape(-1), weights.reshape(-1))
    used = den > 0
    return torch.where(used, num / torch.where(used, den, torch.ones_like(den)), atoms)


def joint_objective(mag_atoms, phase_atoms, mag_assign, phase_assign, S, X):
    values = mag_atoms[mag_assign] * torch.exp(1j * phase_atoms[phase_assign].to(torch.complex128))
    return masked_error(values, S, X)


def optimize_magbook_phasebook(init_m, init_p, corpus, epochs=constants.DEFAULT_EM_EPOCHS):
    """
    Coordinate descent looping over magbook values, magbook assignments,
    phasebook assignments and phasebook values.
    """
    if epochs < 0:
        raise ValueError('epochs must be >= 0')
    corpus = list(corpus)
    S, X, _ = _flatten_corpus(corpus)
    phi = phase_difference(S, X)
    mag, phase = init_m.atoms.clone(), init_p.atoms.clone()

    report = OptReport()
    phase_assign = torch.argmax(_phase_scores(phase, phi), dim=-1)
    mag_assign = magnitude_assign(mag, S, X, phase[phase_assign])
    report.record(0, 'init', joint_objective(mag, phase, mag_assign, phase_assign, S, X))
    report.record_atoms(0, 'magbook', mag)
    report.record_atoms(0, 'phasebook', phase)
    for epoch in range(1, epochs + 1):
        previous = (mag_assign.clone(), phase_assign.clone())
        mag = _magbook_values(mag, mag_assign, S, X, phase[phase_assign])
        report.record(epoch, 'magbook_values', joint_objective(mag, phase, mag_assign, phase_assign, S, X))
        mag_assign = magnitude_assign(mag, S, X, phase[phase_assign])
        report.record(epoch, 'magbook_assign', joint_objective(mag, phase, mag_assign, phase_assign, S, X))
        phase_assign = _weighted_phase_assign(phase, phi, mag[mag_assign])
        report.record(epoch, 'phasebook_assign', joint_objective(mag, phase, mag_assign, phase_assign, S, X))
        phase = _phasebook_values(phase, phase_assign, S, X, mag[mag_assign])
        report.record(epoch, 'phasebook_values', joint_objective(mag, phase, mag_assign, phase_assign, S, X))
        report.record_atoms(epoch, 'magbook', mag)
        report.record_atoms(epoch, 'phasebook', phase)
        report.epochs_run = epoch
        if torch.equal(previous[0], mag_assign) and torch.equal(previous[1], phase_assign):
            report.converged = True
            break
    shapes = _corpus_shapes(corpus)
    report.assignments = AssignmentMap.split(phase_assign, shapes, len(phase))
    report.magbook_assignments = AssignmentMap.split(mag_assign, shapes, len(mag))
    logger.info('magbook/phasebook descent: {} epochs, objective {:.6e} -> {:.6e}'.format(
        report.epochs_run, report.objectives[0], report.objectives[-1]))
    return Magbook(mag, check=False), Phasebook(phase, check=False), report


def combook_points(corpus, r_max=constants.DEFAULT_R_MAX):
    """Clamped ratios s/x with weights |x|^2, flattened over the corpus."""
    S, X, _ = _flatten_corpus(corpus)
    ratio, _ = safe_ratio(S, X)
    return clamp_magnitude(ratio, r_max), X.abs() ** 2


def _nearest(atoms, points):
    return torch.argmin((points[:, None] - atoms[None, :]).abs(), dim=-1)


def combook_objective(atoms, assignments, points, weights):
    return (weights * (points - atoms[assignments]).abs() ** 2).sum()


def optimize_combook(init, corpus, epochs=constants.DEFAULT_EM_EPOCHS, r_max=constants.DEFAULT_R_MAX):
    """Weighted k-means on the clamped complex ratios; empty clusters re-seed to the farthest points."""
    if epochs < 0:
        raise ValueError('epochs must be >= 0')
    corpus = list(corpus)
    all_points, weights = combook_points(corpus, r_max)
    keep = weights > 0
    points = all_points[keep]
    weights = weights[keep]
    if points.numel() == 0:
        raise ValueError('corpus has no bins with nonzero mixture energy')
    atoms = init.atoms.clone()

    report = OptReport()
    assignments = _nearest(atoms, points)
    report.record(0, 'init', combook_objective(atoms, assignments, points, weights))
    report.record_atoms(0, 'combook', atoms)
    previous = None
    for epoch in range(1, epochs + 1):
        assignments = _nearest(atoms, points)
        report.record(epoch, 'assign', combook_objective(atoms, assignments, points, weights))
        report.epochs_run = epoch
        if previous is not None and torch.equal(assignments, previous):
            report.converged = True
            break
        numerator = torch.zeros(len(atoms), dtype=torch.complex128).index_add(0, assignments, weights.to(torch.complex128) * points)
        mass = torch.zeros(len(atoms), dtype=torch.float64).index_add(0, assignments, weights)
        used = mass > 0
        atoms = torch.where(used, numerator / torch.where(used, mass, torch.ones_like(mass)), atoms)
        empty = torch.nonzero(~used).reshape(-1)
        if empty.numel():
            distance = (points - atoms[assignments]).abs() ** 2
            farthest = torch.argsort(distance, descending=True, stable=True)[:empty.numel()]
            atoms = atoms.clone()
            atoms[empty[:farthest.numel()]] = points[farthest]
            logger.debug('epoch {}: re-seeded {} empty combook clusters'.format(epoch, empty.numel()))
        report.record(epoch, 'update', combook_objective(atoms, assignments, points, weights))
        report.record_atoms(epoch, 'combook', atoms)
        previous = assignments
    report.assignments = AssignmentMap.split(_nearest(atoms, all_points), _corpus_shapes(corpus), len(atoms))
    logger.info('combook k-means: {} epochs, objective {:.6e} -> {:.6e}'.format(
        report.epochs_run, report.objectives[0], report.objectives[-1]))
    return Combook(atoms, check=False), report


def random_codebook(kind, size, corpus, seed=0, r_max=constants.DEFAULT_R_MAX):
    """Initial codebook whose atoms are drawn from the oracle targets of the corpus."""
    S, X, _ = _flatten_corpus(corpus)
    valid = ~zero_mixture(X)
    S, X = S[valid], X[valid]
    if kind == 'magbook':
        candidates = torch.clamp(S.abs() / X.abs(), 0., r_max)
    elif kind == 'phasebook':
        candidates = phase_difference(S, X)
    elif kind == 'combook':
        candidates = clamp_magnitude(S / X, r_max)
    else:
        raise ValueError('unknown codebook kind {!r}'.format(kind))
    generator = torch.Generator().manual_seed(int(seed))
    order = torch.randperm(candidates.numel(), generator=generator)
    atoms = []
    for index in order.tolist():
        value = candidates[index]
        if all((value - atom).abs() > 1e-9 for atom in atoms):
            atoms.append(value)
        if len(atoms) == size:
            break
    if len(atoms) < size:
        raise ValueError('corpus holds fewer than {} distinct {} values'.format(size, kind))
    codebook_type = {'magbook': Magbook, 'phasebook': Phasebook, 'combook': Combook}[kind]
    return codebook_type(torch.stack(atoms))
