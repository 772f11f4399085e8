import math

import numpy as np
import pytest
import torch

from maskbook.codebook import Combook, Phasebook, uniform_magbook
from maskbook.codebook_opt import uniform_phasebook
from maskbook.grad import CodebookSet, LogitField, LossSpec, OptimizerConfig, GradCheckReport, make_problem, \
    interpolate_masks, value_and_grad, forward_backward, fit_logits, grad_check, project_to_hull, project_phase, \
    oracle_bound, oracle_logits
from maskbook.dataset import SynthSpec, synth_records
from maskbook.experiments.gradcheck import check_loss, random_problem
from maskbook.stft import StftConfig, stft

TINY = StftConfig(win_length=16, hop=4, dft_size=16)
SQUARE = Combook(torch.tensor([0, 1, 1j, -1, -1j], dtype=torch.complex128))


def tiny_problem(seed=0, length=17):
    sources = torch.randn(2, length, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)
    mixture = sources.sum(0)
    return make_problem(stft(mixture, TINY), sources, x_time=mixture, config=TINY)


def test_loss_spec_parsing():
    spec = LossSpec.parse('WA-MISI-2', 'L1')
    assert (spec.kind, spec.misi_iters, spec.norm) == ('WA-MISI', 2, 'L1')
    assert spec.time_domain and not LossSpec.parse('CSA').time_domain
    with pytest.raises(ValueError):
        LossSpec('XYZ')
    with pytest.raises(ValueError):
        LossSpec('CSA', misi_iters=2)


def test_codebook_set_needs_head_codebooks():
    with pytest.raises(ValueError):
        CodebookSet('magphase', uniform_magbook())
    with pytest.raises(ValueError):
        CodebookSet('polar', uniform_magbook())
    assert CodebookSet('combook', combook=SQUARE).sizes() == {'combook': 5}


def test_one_hot_logits_at_oracle_atoms():
    X = stft(torch.randn(40, generator=torch.Generator().manual_seed(1), dtype=torch.float64), TINY).bins
    index = torch.randint(0, 5, (2, *X.shape), generator=torch.Generator().manual_seed(2))
    S = SQUARE.atoms[index] * X
    problem = make_problem(X, S_refs=S, config=TINY)
    field = LogitField({'combook': 60. * torch.nn.functional.one_hot(index, 5).to(torch.float64)})
    codebooks = CodebookSet('combook', combook=SQUARE)
    loss, grads, perm = value_and_grad(field, codebooks, problem, LossSpec('CSA', 'L2'))
    assert loss.item() < 1e-30
    assert grads['logits/combook'].abs().max().item() < 1e-20
    assert perm == (0, 1)


def test_pit_swaps_references():
    problem = tiny_problem()
    codebooks = CodebookSet('magphase', uniform_magbook(), uniform_phasebook(8))
    field = LogitField.random((2, *problem.X.shape), codebooks, seed=3)
    swapped = make_problem(problem.X, problem.s_time.flip(0), x_time=problem.x_time, config=TINY)
    loss, _, perm = value_and_grad(field, codebooks, problem, LossSpec('CSA'))
    loss_swapped, _, perm_swapped = value_and_grad(field, codebooks, swapped, LossSpec('CSA'))
    assert loss.item() == pytest.approx(loss_swapped.item())
    assert perm_swapped == tuple(reversed(perm))


def test_degenerate_phase_bins_are_flagged():
    problem = tiny_problem()
    codebooks = CodebookSet('magphase', uniform_magbook(), Phasebook(torch.tensor([0., math.pi], dtype=torch.float64)))
    field = LogitField.uniform((2, *problem.X.shape), codebooks)
    flags = {}
    masks, magnitude = interpolate_masks(field.logits, codebooks.atoms(), codebooks, flags)
    assert flags['phase_degenerate'] == masks.numel()
    assert torch.allclose(masks.real, magnitude)
    _, grads = forward_backward(field, codebooks, problem.X, problem.x_time, problem.s_time, LossSpec('CSA'),
                                config=TINY)
    assert grads['logits/phasebook'].abs().max().item() == 0.


def test_relu_magbook():
    codebooks = CodebookSet('magbook', uniform_magbook(3, 2.), relu=True)
    atoms = {'magbook': torch.tensor([-1., 1., 2.], dtype=torch.float64)}
    logits = {'magbook': torch.tensor([[[[50., 0., 0.]]]], dtype=torch.float64)}
    masks, _ = interpolate_masks(logits, atoms, codebooks)
    assert masks.abs().max().item() < 1e-20


def test_grad_check_linear_and_negative_control():
    a = torch.randn(6, generator=torch.Generator().manual_seed(4), dtype=torch.float64)
    linear = lambda params: ((a * params['w']).sum(), {'w': a})
    report = grad_check(linear, {'w': torch.ones(6, dtype=torch.float64)})
    assert report.passed and report.max_error < 1e-6
    corrupted = lambda params: ((a * params['w']).sum(), {'w': a + 0.1})
    assert not grad_check(corrupted, {'w': torch.ones(6, dtype=torch.float64)}).passed
    assert GradCheckReport({}, 1e-5, 1e-5).passed


def test_grad_check_complex_parameter():
    target = torch.tensor([1 + 2j, -0.5j, 3.], dtype=torch.complex128)

    def closure(params):
        w = params['w'].clone().requires_grad_(True)
        loss = ((w - target).abs() ** 2).sum()
        return loss.detach(), {'w': torch.autograd.grad(loss, w)[0]}

    report = grad_check(closure, {'w': torch.zeros(3, dtype=torch.complex128)})
    assert report.passed


@pytest.mark.parametrize('loss_name', ['MSA', 'PSA', 'CMA', 'CSA', 'eCSA', 'WA', 'WA-MISI-1', 'WA-MISI-2'])
def test_pipeline_gradients(loss_name):
    problem = tiny_problem(5)
    codebooks = CodebookSet('magphase', uniform_magbook(), uniform_phasebook(8), trainable_atoms=True)
    field = LogitField.random((2, *problem.X.shape), codebooks, seed=6)
    spec = LossSpec.parse(loss_name, 'L2')
    spec.pit = False

    def closure(params):
        loss, grads, _ = value_and_grad(field, codebooks, problem, spec, params)
        return loss, grads

    report = grad_check(closure, field.parameters())
    assert set(report.errors) == {'logits/magbook', 'logits/phasebook', 'atoms/magbook', 'atoms/phasebook'}
    assert report.passed, report.errors


def test_fit_decreases_loss():
    problem = tiny_problem(7, length=40)
    codebooks = CodebookSet('combook', combook=SQUARE)
    field, trace = fit_logits(None, codebooks, problem.X, problem.s_time, LossSpec('CSA', 'L2'),
                              OptimizerConfig(iterations=25, seed=1, init='random'), x_time=problem.x_time,
                              config=TINY)
    losses = [row['loss'] for row in trace]
    assert all(b <= a for a, b in zip(losses[:-1], losses[1:]))
    assert losses[-1] < losses[0]
    assert set(trace[0]) == {'iter', 'loss', 'sisdr', 'step'}
    assert field.logits['combook'].shape == (2, *problem.X.shape, 5)


def test_fit_without_iterations_returns_init():
    problem = tiny_problem()
    codebooks = CodebookSet('combook', combook=SQUARE)
    init = LogitField.random((2, *problem.X.shape), codebooks, seed=2)
    field, trace = fit_logits(init, codebooks, problem.X, problem.s_time, LossSpec('WA'),
                              OptimizerConfig(iterations=0), x_time=problem.x_time, config=TINY)
    assert trace == []
    assert torch.equal(field.logits['combook'], init.logits['combook'])


def test_project_to_hull():
    square = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j])
    points = np.array([0.2 + 0.3j, 3 + 0j, 2 + 2j])
    projected = project_to_hull(points, square)
    assert np.allclose(projected, [0.2 + 0.3j, 1 + 0j, 1 + 1j])
    # two atoms: the segment between them
    assert np.allclose(project_to_hull(np.array([0.5 + 1j]), np.array([0j, 1 + 0j])), [0.5])


def test_project_phase():
    full = uniform_phasebook(4).atoms.numpy()
    theta = np.array([0.3, -2.9, 3.1])
    assert np.allclose(project_phase(theta, full), theta)
    quarter = np.array([0., math.pi / 2])
    assert np.allclose(project_phase(np.array([math.pi / 8, math.pi, -0.2]), quarter), [math.pi / 8, math.pi / 2, 0.])


def test_oracle_bound():
    problem = tiny_problem(8, length=64)
    wide = Combook(1e6 * torch.tensor([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j], dtype=torch.complex128))
    scores, masks, waveforms = oracle_bound(CodebookSet('combook', combook=wide), problem.X, problem.s_time, TINY)
    assert min(scores) > 100.
    assert waveforms.shape == problem.s_time.shape
    narrow, _, _ = oracle_bound(CodebookSet('magbook', uniform_magbook(2, 1.)), problem.X, problem.s_time, TINY)
    assert max(narrow) < min(scores)


@pytest.mark.parametrize('loss_name', ['MSA', 'PSA', 'CMA', 'CSA', 'eCSA', 'WA', 'WA-MISI-2'])
def test_forward_backward_every_loss(loss_name):
    problem = tiny_problem(10)
    codebooks = CodebookSet('magphase', uniform_magbook(), uniform_phasebook(4))
    field = LogitField.random((2, *problem.X.shape), codebooks, seed=11)
    loss, grads = forward_backward(field, codebooks, problem.X, problem.x_time, problem.s_time,
                                   LossSpec.parse(loss_name), config=TINY)
    assert math.isfinite(loss.item())
    assert set(grads) == {'logits/magbook', 'logits/phasebook'}
    assert all(torch.isfinite(grad).all() for grad in grads.values())


def test_wa_misi_without_iterations_is_wa():
    problem = tiny_problem(9)
    codebooks = CodebookSet('magphase', uniform_magbook(), uniform_phasebook(8))
    field = LogitField.random((2, *problem.X.shape), codebooks, seed=12)
    loss, grads, _ = value_and_grad(field, codebooks, problem, LossSpec('WA', 'L2'))
    loss_misi, grads_misi, _ = value_and_grad(field, codebooks, problem, LossSpec.parse('WA-MISI-0', 'L2'))
    assert loss_misi.item() == pytest.approx(loss.item(), rel=1e-12)
    for key in grads:
        assert torch.allclose(grads_misi[key], grads[key])


def test_cma_gradients_on_ill_conditioned_problem():
    problem = random_problem(17, TINY, 2, seed=0)
    codebooks = CodebookSet('magphase', uniform_magbook(3), uniform_phasebook(8), trainable_atoms=True)
    report = check_loss('CMA', problem, codebooks, seed=0)
    assert report.passed, report.errors
    with pytest.raises(ValueError):
        LossSpec('CMA', r_max=0.)


@pytest.mark.parametrize('head', ['magphase', 'magbook', 'combook'])
def test_oracle_logits_reproduce_projected_masks(head):
    problem = tiny_problem(13, length=40)
    codebooks = CodebookSet(head, uniform_magbook(), uniform_phasebook(8), SQUARE)
    _, bound_masks, _ = oracle_bound(codebooks, problem.X, problem.s_time, TINY)
    field = oracle_logits(codebooks, problem.X, problem.s_time, config=TINY)
    masks, _ = interpolate_masks(field.logits, codebooks.atoms(), codebooks)
    assert torch.allclose(masks, bound_masks, atol=1e-6)


def test_fit_reaches_representation_bound():
    record = synth_records(SynthSpec(count=1, duration=0.25), seed=0)[0]
    config = StftConfig()
    X = stft(record.mixture.samples, config)
    codebooks = CodebookSet('magphase', uniform_magbook(3), uniform_phasebook(8))
    bound, _, _ = oracle_bound(codebooks, X, record.source_matrix(), config)
    _, trace = fit_logits(None, codebooks, X, record.source_matrix(), LossSpec('WA', 'L1'),
                          OptimizerConfig(iterations=20), x_time=record.mixture.samples, config=config)
    assert trace[0]['sisdr'] == pytest.approx(np.mean(bound), abs=0.01)
    assert trace[-1]['sisdr'] >= np.mean(bound) - 1.
    losses = [row['loss'] for row in trace]
    assert all(b <= a for a, b in zip(losses[:-1], losses[1:]))
