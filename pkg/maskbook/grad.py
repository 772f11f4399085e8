"""
End-to-end differentiable pipeline:
logits -> softmax -> interpolation over codebooks -> complex mask -> (iSTFT -> unfolded MISI) -> loss.

Gradients come from torch autograd through exactly the functions used at inference.
Free per-bin logits stand in for a separation network; ``fit_logits`` trains them
with plain gradient descent under a backtracking line search.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
from scipy.optimize import nnls
from scipy.spatial import ConvexHull, QhullError

from . import constants
from .codebook import Magbook, Phasebook, Combook, phase_interpolation
from .evaluation import si_sdr_tensor
from .loss_funcs import spectral_loss, complex_loss, expected_csa_loss, expected_combook_csa_loss, \
                    reduce_norm, permutation_min
from .loss_funcs.spectral_loss import polar
from .misi import misi
from .oracle_masks import oracle_mask, safe_ratio
from .stft import Spectrogram, StftConfig, Waveform, stft, istft
from .utils import get_logger, to_tensor, MaskbookError

logger = get_logger(__name__)

HEAD_CODEBOOKS = {
    'magphase': ('magbook', 'phasebook'),
    'magbook': ('magbook',),
    'combook': ('combook',),
}


class FitDivergedError(MaskbookError, RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class CodebookSet:
    """
    Codebooks feeding one estimation head:
    'magphase' (magbook + phasebook), 'magbook' (magnitude with the noisy mixture phase) or 'combook'.
    With ``relu`` the effective magbook atoms are max(atom, 0).
    """
    head: str = 'magphase'
    magbook: Optional[Magbook] = None
    phasebook: Optional[Phasebook] = None
    combook: Optional[Combook] = None
    trainable_atoms: bool = False
    relu: bool = False

    def __post_init__(self):
        if self.head not in HEAD_CODEBOOKS:
            raise ValueError('unknown head {!r}, expected one of {}'.format(self.head, list(HEAD_CODEBOOKS)))
        for name in self.names:
            if getattr(self, name) is None:
                raise ValueError('{} head needs a {}'.format(self.head, name))

    @property
    def names(self):
        return HEAD_CODEBOOKS[self.head]

    def atoms(self):
        return {name: getattr(self, name).atoms for name in self.names}

    def sizes(self):
        return {name: len(getattr(self, name)) for name in self.names}


@dataclass
class LogitField:
    """Per-bin logits of shape (I, T, F, K) for every head codebook, plus optional trained atoms."""
    logits: dict
    trainable: dict = field(default_factory=dict)
    atoms: dict = field(default_factory=dict)

    def __post_init__(self):
        self.logits = {name: to_tensor(value, torch.float64) for name, value in self.logits.items()}
        for name, value in self.logits.items():
            if value.dim() != 4:
                raise ValueError('logits {} must have shape (I, T, F, K), got {}'.format(name, tuple(value.shape)))
            if not torch.isfinite(value).all():
                raise ValueError('logits {} are not finite'.format(name))
            self.trainable.setdefault(name, True)

    @classmethod
    def random(cls, shape, codebooks, seed=0, scale=1.):
        generator = torch.Generator().manual_seed(int(seed))
        logits = {name: scale * torch.randn(*shape, size, generator=generator, dtype=torch.float64)
                  for name, size in codebooks.sizes().items()}
        atoms = {name: value.clone() for name, value in codebooks.atoms().items()} if codebooks.trainable_atoms else {}
        return cls(logits, atoms=atoms)

    @classmethod
    def uniform(cls, shape, codebooks):
        logits = {name: torch.zeros(*shape, size, dtype=torch.float64) for name, size in codebooks.sizes().items()}
        atoms = {name: value.clone() for name, value in codebooks.atoms().items()} if codebooks.trainable_atoms else {}
        return cls(logits, atoms=atoms)

    def probs(self, name):
        return torch.softmax(self.logits[name], dim=-1)

    def parameters(self):
        params = {'logits/' + name: value for name, value in self.logits.items() if self.trainable[name]}
        params.update({'atoms/' + name: value for name, value in self.atoms.items()})
        return params

    def replace_parameters(self, params):
        logits = dict(self.logits)
        atoms = dict(self.atoms)
        for key, value in params.items():
            group, name = key.split('/')
            (logits if group == 'logits' else atoms)[name] = value.detach().clone()
        return LogitField(logits, dict(self.trainable), atoms)


@dataclass
class LossSpec:
    kind: str = 'CSA'
    norm: str = 'L2'
    misi_iters: int = 0
    pit: bool = True
    r_max: float = constants.DEFAULT_R_MAX

    def __post_init__(self):
        if self.kind not in constants.GRAD_LOSS_KINDS:
            raise ValueError('unsupported loss {!r}, expected one of {}'.format(self.kind, constants.GRAD_LOSS_KINDS))
        if self.norm not in constants.LOSS_NORMS:
            raise ValueError('unknown norm {!r}'.format(self.norm))
        if self.misi_iters < 0:
            raise ValueError('misi_iters must be >= 0')
        if self.kind != 'WA-MISI' and self.misi_iters:
            raise ValueError('misi_iters only applies to WA-MISI')
        if not self.r_max > 0:
            raise ValueError('r_max must be positive')

    @classmethod
    def parse(cls, text, norm='L2', r_max=constants.DEFAULT_R_MAX):
        """'CSA', 'WA' or 'WA-MISI-<K>'."""
        if text.startswith('WA-MISI'):
            iters = text[len('WA-MISI'):].lstrip('-')
            return cls('WA-MISI', norm, int(iters) if iters else 1, r_max=r_max)
        return cls(text, norm, r_max=r_max)

    @property
    def time_domain(self):
        return self.kind in ('WA', 'WA-MISI')


@dataclass
class Problem:
    """Mixture spectrogram X (T, F) with source references: spectra S (I, T, F) and, optionally, waveforms (I, L)."""
    X: torch.Tensor
    S: torch.Tensor
    s_time: Optional[torch.Tensor] = None
    x_time: Optional[torch.Tensor] = None
    config: StftConfig = field(default_factory=StftConfig)

    @property
    def n_sources(self):
        return self.S.shape[0]


def make_problem(X, s_refs=None, S_refs=None, x_time=None, config=None):
    if isinstance(X, Spectrogram):
        config = config or X.config
        X = X.bins
    config = config or StftConfig()
    X = to_tensor(X, torch.complex128)
    s_time = None
    if s_refs is not None:
        s_time = torch.stack([s.samples if isinstance(s, Waveform) else to_tensor(s, torch.float64) for s in s_refs])
        if S_refs is None:
            S_refs = stft(s_time, config).bins
    if S_refs is None:
        raise ValueError('reference waveforms or spectra are required')
    S = torch.stack([s.bins if isinstance(s, Spectrogram) else to_tensor(s, torch.complex128) for s in S_refs])
    if S.shape[1:] != X.shape:
        raise ValueError('reference spectra {} do not match mixture {}'.format(tuple(S.shape), tuple(X.shape)))
    if x_time is not None:
        x_time = x_time.samples if isinstance(x_time, Waveform) else to_tensor(x_time, torch.float64)
    elif s_time is not None:
        x_time = s_time.sum(0)
    return Problem(X, S, s_time, x_time, config)


def _effective_atoms(name, raw, codebooks):
    if name == 'magbook' and codebooks.relu:
        return torch.relu(raw)
    return raw


def interpolate_masks(logits, atoms, codebooks, flags=None):
    """
    Interpolated masks of all sources. Returns (complex mask (I, T, F), magnitude (I, T, F)).
    Phase bins with |sum_j p_j e^{j theta_j}| < 1e-8 get phase 0 and no gradient.
    """
    probs = {name: torch.softmax(value, dim=-1) for name, value in logits.items()}
    atoms = {name: _effective_atoms(name, value, codebooks) for name, value in atoms.items()}
    if codebooks.head == 'combook':
        mask = (probs['combook'].to(torch.complex128) * atoms['combook'].to(torch.complex128)).sum(-1)
        return mask, mask.abs()
    magnitude = (probs['magbook'] * atoms['magbook']).sum(-1)
    if codebooks.head == 'magbook':
        return magnitude.to(torch.complex128), magnitude
    theta, degenerate = phase_interpolation(probs['phasebook'], atoms['phasebook'], eps=constants.GRAD_DEGENERACY_EPS)
    if degenerate.any():
        count = int(degenerate.sum())
        logger.debug('{} degenerate phase interpolation bins excluded from the gradient'.format(count))
        if flags is not None:
            flags['phase_degenerate'] = flags.get('phase_degenerate', 0) + count
    return magnitude * torch.exp(1j * theta.to(torch.complex128)), magnitude


def resynthesize(masks, problem, misi_iters=0):
    """Source waveforms from masks: istft(c x), or the output of ``misi_iters`` MISI iterations."""
    if problem.x_time is None:
        raise ValueError('time-domain losses need reference waveforms')
    length = problem.x_time.shape[-1]
    spectra = masks * problem.X
    if misi_iters == 0:
        return istft(spectra, problem.config, target_length=length)
    magnitudes, phases = polar(spectra)
    return misi(magnitudes, phases, problem.x_time, misi_iters, problem.config)


def evaluate_loss(logits, atoms, codebooks, problem, loss_spec, flags=None):
    """Returns (loss, perm, masks, waveforms); waveforms only for time-domain losses."""
    masks, magnitude = interpolate_masks(logits, atoms, codebooks, flags)
    X, S, norm = problem.X, problem.S, loss_spec.norm
    waveforms = None
    kind = loss_spec.kind
    if kind in ('MSA', 'PSA'):
        pair = lambda e, r: spectral_loss(kind, norm, magnitude[e], X, S[r])
    elif kind == 'CMA':
        # ICM reference with |s/x| clamped to r_max
        refs = [oracle_mask('ICM', S[r], X=X, r_max=loss_spec.r_max) for r in range(problem.n_sources)]
        pair = lambda e, r: complex_loss(kind, norm, masks[e], X, S[r], c_ref=refs[r])
    elif kind == 'CSA':
        pair = lambda e, r: complex_loss(kind, norm, masks[e], X, S[r])
    elif kind == 'eCSA':
        probs = {name: torch.softmax(value, dim=-1) for name, value in logits.items()}
        eff = {name: _effective_atoms(name, value, codebooks) for name, value in atoms.items()}
        if codebooks.head == 'combook':
            pair = lambda e, r: expected_combook_csa_loss(probs['combook'][e], eff['combook'], X, S[r], norm)
        elif codebooks.head == 'magbook':
            zero_phase = torch.zeros(1, dtype=torch.float64)
            ones = torch.ones(*X.shape, 1, dtype=torch.float64)
            pair = lambda e, r: expected_csa_loss(probs['magbook'][e], ones, eff['magbook'], zero_phase, X, S[r], norm)
        else:
            pair = lambda e, r: expected_csa_loss(probs['magbook'][e], probs['phasebook'][e],
                                                  eff['magbook'], eff['phasebook'], X, S[r], norm)
    else:
        if problem.s_time is None:
            raise ValueError('{} needs reference waveforms'.format(kind))
        waveforms = resynthesize(masks, problem, loss_spec.misi_iters)
        pair = lambda e, r: reduce_norm(waveforms[e] - problem.s_time[r], norm)
    indices = list(range(problem.n_sources))
    if loss_spec.pit:
        loss, perm = permutation_min(pair, indices, indices)
    else:
        loss, perm = sum(pair(i, i) for i in indices), tuple(indices)
    return loss, perm, masks, waveforms


def _leaves(params):
    return {key: value.detach().clone().requires_grad_(True) for key, value in params.items()}


def _split(params, logit_field, codebooks):
    logits = {name: logit_field.logits[name] for name in logit_field.logits}
    atoms = dict(codebooks.atoms())
    atoms.update(logit_field.atoms)
    for key, value in params.items():
        group, name = key.split('/')
        (logits if group == 'logits' else atoms)[name] = value
    return logits, atoms


def value_and_grad(logit_field, codebooks, problem, loss_spec, params=None, flags=None):
    """Loss and gradients w.r.t. every trainable parameter of the field (keys 'logits/<name>', 'atoms/<name>')."""
    params = _leaves(params if params is not None else logit_field.parameters())
    logits, atoms = _split(params, logit_field, codebooks)
    loss, perm, _, _ = evaluate_loss(logits, atoms, codebooks, problem, loss_spec, flags)
    if not params:
        return loss.detach(), {}, perm
    grads = torch.autograd.grad(loss, list(params.values()), allow_unused=True)
    grads = {key: torch.zeros_like(value) if grad is None else grad
             for (key, value), grad in zip(params.items(), grads)}
    return loss.detach(), grads, perm


def forward_backward(logit_field, codebooks, X, x_time, s_refs, loss_spec, S_refs=None, config=None, flags=None):
    """Loss value and gradients for one mixture; see :func:`value_and_grad`."""
    problem = make_problem(X, s_refs, S_refs, x_time, config)
    loss, grads, _ = value_and_grad(logit_field, codebooks, problem, loss_spec, flags=flags)
    return loss, grads


@dataclass
class OptimizerConfig:
    step_size: float = 1.
    iterations: int = 200
    seed: int = 0
    shrink: float = 0.5
    grow: float = 1.5
    armijo: float = 1e-4
    min_step: float = 1e-14
    init_scale: float = 1.
    init: str = 'oracle'
    log_every: int = 100

    def __post_init__(self):
        if self.step_size <= 0 or self.iterations < 0:
            raise ValueError('step_size must be positive and iterations >= 0')
        if not 0 < self.shrink < 1 or self.grow < 1:
            raise ValueError('expected 0 < shrink < 1 and grow >= 1')
        if self.init not in constants.FIT_INITS:
            raise ValueError('unknown init {!r}, expected one of {}'.format(self.init, constants.FIT_INITS))


def initial_field(init, codebooks, problem, optimizer_cfg):
    """'oracle' (logits at the representation bound), 'random' (Gaussian, init_scale) or 'uniform' (zeros)."""
    shape = tuple(problem.S.shape)
    if init == 'oracle':
        return _oracle_field(codebooks, problem)
    if init == 'random':
        return LogitField.random(shape, codebooks, optimizer_cfg.seed, optimizer_cfg.init_scale)
    if init == 'uniform':
        return LogitField.uniform(shape, codebooks)
    raise ValueError('unknown init {!r}, expected one of {}'.format(init, constants.FIT_INITS))


def _trace_sisdr(logits, atoms, codebooks, problem, perm):
    if problem.s_time is None:
        return math.nan
    with torch.no_grad():
        masks, _ = interpolate_masks(logits, atoms, codebooks)
        waveforms = resynthesize(masks, problem)
        return float(torch.stack([si_sdr_tensor(waveforms[e], problem.s_time[r]) for r, e in enumerate(perm)]).mean())


def fit_logits(init, codebooks, X, s_refs, loss_spec, optimizer_cfg=None, x_time=None, S_refs=None,
               config=None, flags=None):
    """
    Gradient descent on the chosen loss with backtracking (Armijo) line search.
    ``init`` is a LogitField or the name of an initialisation (``optimizer_cfg.init`` when None).
    Returns (LogitField, trace); the trace holds one row per iteration (iter, loss, sisdr, step)
    and its losses never increase.
    """
    optimizer_cfg = optimizer_cfg or OptimizerConfig()
    problem = make_problem(X, s_refs, S_refs, x_time, config)
    if not isinstance(init, LogitField):
        init = initial_field(init or optimizer_cfg.init, codebooks, problem, optimizer_cfg)
    params = {key: value.detach().clone() for key, value in init.parameters().items()}
    step = optimizer_cfg.step_size
    trace = []

    def objective(candidate):
        logits, atoms = _split(candidate, init, codebooks)
        with torch.no_grad():
            loss, _, _, _ = evaluate_loss(logits, atoms, codebooks, problem, loss_spec)
        return float(loss)

    for iteration in range(optimizer_cfg.iterations):
        loss, grads, perm = value_and_grad(init, codebooks, problem, loss_spec, params, flags)
        loss = float(loss)
        if not math.isfinite(loss):
            raise FitDivergedError('loss became {} at iteration {}'.format(loss, iteration), trace)
        logits, atoms = _split(params, init, codebooks)
        trace.append({'iter': iteration, 'loss': loss, 'sisdr': _trace_sisdr(logits, atoms, codebooks, problem, perm),
                      'step': step})
        if iteration % optimizer_cfg.log_every == 0:
            logger.info('fit iter {}: loss {:.6e} step {:.3e}'.format(iteration, loss, step))
        grad_norm2 = sum(float((g ** 2).sum()) for g in grads.values())
        if grad_norm2 == 0.:
            break
        accepted = False
        while step >= optimizer_cfg.min_step:
            candidate = {key: params[key] - step * grads[key] for key in params}
            value = objective(candidate)
            if math.isfinite(value) and value <= loss - optimizer_cfg.armijo * step * grad_norm2:
                params, accepted = candidate, True
                step *= optimizer_cfg.grow
                break
            step *= optimizer_cfg.shrink
        if not accepted:
            logger.info('fit: line search stalled at iteration {}'.format(iteration))
            break
    return init.replace_parameters(params), trace


@dataclass
class GradCheckReport:
    errors: dict
    step: float
    tol: float

    @property
    def max_error(self):
        return max(self.errors.values()) if self.errors else 0.

    @property
    def passed(self):
        return self.max_error < self.tol


def grad_check(op_closure, params, step=1e-5, tol=1e-5):
    """
    Central differences against the analytic gradients returned by
    ``op_closure(params) -> (loss, grads)``. Relative error per element uses the
    floor 1e-3 * max|analytic| of that parameter. For complex parameters the
    numeric gradient is dL/dRe + j dL/dIm, the convention of torch autograd.
    """
    if step <= 0:
        raise ValueError('step must be positive')
    params = {key: to_tensor(value).detach().clone() for key, value in params.items()}
    _, analytic = op_closure(params)
    errors = {}
    for key, value in params.items():
        grad = analytic[key].detach()
        numeric = torch.zeros_like(value)
        flat = numeric.reshape(-1)
        directions = (1., 1j) if value.is_complex() else (1.,)
        for index in range(value.numel()):
            for direction in directions:
                shifted = []
                for sign in (1., -1.):
                    perturbed = dict(params)
                    bumped = value.clone().reshape(-1)
                    bumped[index] += sign * step * direction
                    perturbed[key] = bumped.reshape(value.shape)
                    loss, _ = op_closure(perturbed)
                    shifted.append(float(loss))
                flat[index] += direction * (shifted[0] - shifted[1]) / (2 * step)
        floor = max(1e-3 * float(grad.abs().max()) if grad.numel() else 0., 1e-300)
        scale = torch.clamp(torch.maximum(grad.abs(), numeric.abs()), min=floor)
        errors[key] = float(((grad - numeric).abs() / scale).max()) if grad.numel() else 0.
        logger.debug('grad check {}: max relative error {:.3e}'.format(key, errors[key]))
    return GradCheckReport(errors, step, tol)


def _in_hull(points, vertices):
    """Strict containment of complex points in the convex hull of complex vertices (3+ non-collinear)."""
    try:
        hull = ConvexHull(np.stack([vertices.real, vertices.imag], -1))
    except (QhullError, ValueError):
        return None
    xy = np.stack([points.real, points.imag], -1)
    return (xy @ hull.equations[:, :2].T + hull.equations[:, 2] < 0).all(-1), hull


def project_to_hull(points, vertices):
    """Nearest points of the convex hull of ``vertices`` (complex) to ``points`` (complex numpy arrays)."""
    points, vertices = np.asarray(points, dtype=complex), np.asarray(vertices, dtype=complex).reshape(-1)
    found = _in_hull(points.reshape(-1), vertices) if len(vertices) >= 3 else None
    if found is None:
        inside = np.zeros(points.size, dtype=bool)
        edges = [(a, b) for a in vertices for b in vertices]
    else:
        inside, hull = found
        edges = [(vertices[i], vertices[j]) for i, j in hull.simplices]
    flat = points.reshape(-1)
    best = np.full(flat.shape, vertices[0])
    best_distance = np.abs(flat - vertices[0])
    for a, b in edges:
        direction = b - a
        length2 = abs(direction) ** 2
        t = np.zeros(flat.shape) if length2 == 0 else np.clip(((flat - a) * np.conj(direction)).real / length2, 0., 1.)
        candidate = a + t * direction
        distance = np.abs(flat - candidate)
        closer = distance < best_distance
        best, best_distance = np.where(closer, candidate, best), np.where(closer, distance, best_distance)
    return np.where(inside, flat, best).reshape(points.shape)


def project_phase(theta, atoms):
    """Nearest angle reachable by angle(sum_j p_j e^{j theta_j}) over the probability simplex."""
    theta, atoms = np.asarray(theta, dtype=float), np.asarray(atoms, dtype=float).reshape(-1)
    units = np.exp(1j * atoms)
    if len(atoms) >= 3:
        found = _in_hull(np.zeros(1, dtype=complex), units)
        if found is not None and found[0][0]:
            return theta
    center = units.sum()
    if abs(center) < 1e-12:
        # antipodal pair: only the atoms themselves are reachable
        distance = np.abs(np.angle(np.exp(1j * (theta[..., None] - atoms))))
        return atoms[np.argmin(distance, -1)]
    mu = np.angle(center)
    offsets = np.angle(np.exp(1j * (atoms - mu)))
    lo, hi = offsets.min(), offsets.max()
    relative = np.angle(np.exp(1j * (theta - mu)))
    to_lo = np.abs(np.angle(np.exp(1j * (relative - lo))))
    to_hi = np.abs(np.angle(np.exp(1j * (relative - hi))))
    clamped = np.where((relative >= lo) & (relative <= hi), relative, np.where(to_lo < to_hi, lo, hi))
    return np.angle(np.exp(1j * (clamped + mu)))


def _numpy_atoms(codebooks):
    return {name: _effective_atoms(name, value, codebooks).detach().numpy() for name, value in codebooks.atoms().items()}


def _oracle_targets(codebooks, problem):
    """
    Oracle ICM of every source projected onto what the head can express by interpolation:
    magnitude into [min m, max m] and phase onto the reachable arc, or the combook's convex hull.
    Returns ({codebook name: per-bin target}, complex masks).
    """
    ratio, _ = safe_ratio(problem.S, problem.X[None])
    ratio = ratio.numpy()
    atoms = _numpy_atoms(codebooks)
    if codebooks.head == 'combook':
        masks = project_to_hull(ratio, atoms['combook'])
        return {'combook': masks}, masks
    low, high = atoms['magbook'].min(), atoms['magbook'].max()
    if codebooks.head == 'magbook':
        magnitude = np.clip(ratio.real, low, high)
        return {'magbook': magnitude}, magnitude.astype(complex)
    magnitude = np.clip(np.abs(ratio), low, high)
    theta = project_phase(np.angle(ratio), atoms['phasebook'])
    return {'magbook': magnitude, 'phasebook': theta}, magnitude * np.exp(1j * theta)


def _segment_weights(values, atoms):
    """Convex weights on the two real atoms around each value, values within [min, max] of the atoms."""
    n_atom = len(atoms)
    if n_atom == 1:
        return np.ones(values.shape + (1,))
    order = np.argsort(atoms)
    ordered = atoms[order]
    upper = np.clip(np.searchsorted(ordered, values), 1, n_atom - 1)
    lower = upper - 1
    span = ordered[upper] - ordered[lower]
    t = np.divide(values - ordered[lower], span, out=np.zeros(values.shape), where=span > 0)
    t = np.clip(t, 0., 1.)
    columns = np.arange(n_atom)
    return (1. - t)[..., None] * (order[lower][..., None] == columns) + t[..., None] * (order[upper][..., None] == columns)


def _arc_weights(theta, atoms):
    """
    Convex weights on the phase atoms on either side of each angle with
    angle(sum_j w_j e^{j theta_j}) = theta; angles outside every arc shorter than pi snap to the nearest atom.
    """
    behind = np.mod(theta[..., None] - atoms, 2 * np.pi)
    ahead = np.mod(atoms - theta[..., None], 2 * np.pi)
    lower, upper = np.argmin(behind, -1), np.argmin(ahead, -1)
    d_lower = np.take_along_axis(behind, lower[..., None], -1)[..., 0]
    d_upper = np.take_along_axis(ahead, upper[..., None], -1)[..., 0]
    w_lower, w_upper = np.sin(d_upper), np.sin(d_lower)
    spanned = (d_lower + d_upper < np.pi) & (w_lower + w_upper > 0)
    total = np.where(spanned, w_lower + w_upper, 1.)
    w_lower = np.where(spanned, w_lower / total, (d_lower <= d_upper).astype(float))
    w_upper = np.where(spanned, w_upper / total, (d_lower > d_upper).astype(float))
    columns = np.arange(len(atoms))
    return w_lower[..., None] * (lower[..., None] == columns) + w_upper[..., None] * (upper[..., None] == columns)


def _hull_weights(points, atoms):
    """Convex weights of complex points inside the hull of the combook atoms (nonnegative least squares)."""
    scale = max(float(np.abs(atoms).max()), 1.)
    design = np.stack([atoms.real, atoms.imag, np.full(len(atoms), scale)])
    flat = points.reshape(-1)
    weights = np.empty((flat.size, len(atoms)))
    for index, point in enumerate(flat):
        weights[index], _ = nnls(design, np.array([point.real, point.imag, scale]))
    total = weights.sum(-1, keepdims=True)
    weights = np.where(total > 0, weights / np.where(total > 0, total, 1.), 1. / len(atoms))
    return weights.reshape(points.shape + (len(atoms),))


def _oracle_field(codebooks, problem, floor=constants.ORACLE_LOGIT_FLOOR):
    targets, _ = _oracle_targets(codebooks, problem)
    atoms = _numpy_atoms(codebooks)
    solvers = {'magbook': _segment_weights, 'phasebook': _arc_weights, 'combook': _hull_weights}
    logits = {name: torch.log(torch.as_tensor(np.maximum(solvers[name](values, atoms[name]), floor), dtype=torch.float64))
              for name, values in targets.items()}
    trained = {name: value.clone() for name, value in codebooks.atoms().items()} if codebooks.trainable_atoms else {}
    return LogitField(logits, atoms=trained)


def oracle_logits(codebooks, X, s_refs=None, S_refs=None, config=None):
    """
    LogitField whose interpolated masks reproduce the projected oracle masks of :func:`oracle_bound`
    up to the probability floor ``ORACLE_LOGIT_FLOOR``.
    """
    return _oracle_field(codebooks, make_problem(X, s_refs, S_refs, config=config))


def oracle_bound(codebooks, X, s_refs, config=None):
    """
    Oracle ICM of every source projected onto what the head can express by interpolation
    (magnitude into [min m, max m] and phase onto the reachable arc, or the combook's
    convex hull), resynthesised with istft. Returns (per-source SI-SDR list, masks, waveforms).
    """
    problem = make_problem(X, s_refs, config=config)
    _, masks = _oracle_targets(codebooks, problem)
    masks = torch.as_tensor(masks, dtype=torch.complex128)
    waveforms = resynthesize(masks, problem)
    scores = [float(si_sdr_tensor(waveforms[i], problem.s_time[i])) for i in range(problem.n_sources)]
    logger.info('oracle representation bound: mean SI-SDR {:.2f} dB'.format(float(np.mean(scores))))
    return scores, masks, waveforms
