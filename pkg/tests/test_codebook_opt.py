import math

import pytest
import torch

from maskbook.codebook import Magbook, Combook, uniform_magbook
from maskbook.codebook_opt import uniform_phasebook, uniform_combook, phasebook_assign, phasebook_update, \
    phasebook_objective, optimize_phasebook, optimize_magbook_phasebook, optimize_combook, random_codebook, \
    AssignmentMap
from maskbook.oracle_masks import oracle_mask

from conftest import random_spectra


def rotated(phi, shape=(8, 16), seed=0):
    """(S, X) pair whose phase difference angle(s/x) equals phi on every bin."""
    X = random_spectra(shape, seed)
    return X * 0.7 * torch.exp(1j * torch.as_tensor(phi, dtype=torch.float64)), X


def test_uniform_phasebook():
    assert torch.allclose(uniform_phasebook(2).atoms, torch.tensor([0., math.pi], dtype=torch.float64))
    assert torch.allclose(uniform_phasebook(4).atoms,
                          torch.tensor([0., math.pi / 2, math.pi, -math.pi / 2], dtype=torch.float64))
    with pytest.raises(ValueError):
        uniform_phasebook(1)


def test_uniform_combook():
    combook = uniform_combook(5)
    assert combook.atoms[0] == 0
    assert torch.allclose(combook.atoms[1:].abs(), torch.ones(4, dtype=torch.float64))


def test_assign_nearest_phase():
    phasebook = uniform_phasebook(4)
    S, X = rotated(0.6 * math.pi, (1, 1))
    assert phasebook_assign(phasebook, S, X).item() == 1
    S, X = rotated(math.pi / 2, (1, 1))
    assert phasebook_assign(phasebook, S, X).item() == 1


def test_update_single_bin():
    phi = 0.4
    S, X = rotated(phi, (1, 1))
    updated = phasebook_update(uniform_phasebook(4), torch.zeros(1, 1, dtype=torch.long), S, X, torch.ones(1, 1))
    assert updated.atoms[0].item() == pytest.approx(phi)
    # unused atoms stay where they were
    assert torch.allclose(updated.atoms[1:], uniform_phasebook(4).atoms[1:])


def test_update_symmetric_pair():
    X = torch.ones(1, 2, dtype=torch.complex128)
    S = torch.exp(1j * torch.tensor([[0.3, -0.3]], dtype=torch.float64))
    updated = phasebook_update(uniform_phasebook(2), torch.zeros(1, 2, dtype=torch.long), S, X, torch.ones(1, 2))
    assert abs(updated.atoms[0].item()) < 1e-12


def test_em_single_cluster():
    phi = 1.1
    phasebook, report = optimize_phasebook(uniform_phasebook(2), [rotated(phi)], epochs=10)
    assert (phasebook.atoms - phi).abs().min().item() < 1e-9
    assert report.converged
    assert report.is_monotone()


def test_em_monotone_on_skewed_phases():
    generator = torch.Generator().manual_seed(0)
    corpus = []
    for seed in range(4):
        phi = 0.6 * torch.randn(40, 64, generator=generator, dtype=torch.float64)
        corpus.append(rotated(phi, (40, 64), seed))
    phasebook, report = optimize_phasebook(uniform_phasebook(8), corpus, epochs=40)
    assert report.is_monotone()
    assert report.objectives[-1] < report.objectives[0]
    assert report.trace[0]['step'] == 'init'
    # atoms migrate towards the dense region around 0
    assert int((phasebook.atoms.abs() < math.pi / 2).sum()) >= 5


def test_provided_magnitudes():
    S, X = rotated(0.2)
    with pytest.raises(ValueError):
        optimize_phasebook(uniform_phasebook(4), [(S, X)], M_source='provided')
    _, report = optimize_phasebook(uniform_phasebook(4), [(S, X)], M_source='provided',
                                   magnitudes=[torch.full(S.shape, 0.7, dtype=torch.float64)])
    assert report.objectives[-1] < 1e-20


def test_objective_matches_definition():
    S, X = rotated(0.5, (3, 3))
    atoms = uniform_phasebook(4)
    assignments = phasebook_assign(atoms, S, X)
    m = torch.full((3, 3), 0.7, dtype=torch.float64)
    expected = ((m * torch.exp(1j * atoms.atoms[assignments]) * X - S).abs() ** 2).sum()
    assert phasebook_objective(atoms, assignments, S, X, m).item() == pytest.approx(expected.item())


def test_joint_identity_corpus():
    X = random_spectra((10, 12), 3)
    magbook, phasebook, report = optimize_magbook_phasebook(uniform_magbook(3), uniform_phasebook(4), [(X, X)], epochs=5)
    assert (magbook.atoms - 1.).abs().min().item() < 1e-12
    assert phasebook.atoms.abs().min().item() < 1e-12
    assert report.objectives[-1] < 1e-20
    assert report.is_monotone()


def test_joint_monotone_on_random_corpus():
    corpus = [(random_spectra((12, 20), seed), random_spectra((12, 20), seed + 10)) for seed in range(3)]
    _, _, report = optimize_magbook_phasebook(uniform_magbook(4), uniform_phasebook(8), corpus, epochs=15)
    assert report.is_monotone()
    steps = {row['step'] for row in report.trace}
    assert {'magbook_values', 'magbook_assign', 'phasebook_assign', 'phasebook_values'} <= steps
    assert [tuple(index.shape) for index in report.assignments.indices] == [(12, 20)] * 3
    assert report.magbook_assignments.codebook_size == 4


def make_combook(*atoms):
    return Combook(torch.tensor(atoms, dtype=torch.complex128))


def two_value_corpus(values=(0.5, -0.8j)):
    X = random_spectra((6, 10), 4)
    ratio = torch.full(X.shape, values[0], dtype=torch.complex128)
    ratio[:, 5:] = values[1]
    return [(ratio * X, X)]


def test_combook_two_clusters():
    combook, report = optimize_combook(make_combook(0.1 + 0j, -0.2j), two_value_corpus(), epochs=10)
    assert torch.allclose(combook.atoms, torch.tensor([0.5, -0.8j], dtype=torch.complex128), atol=1e-12)
    assert report.converged and report.is_monotone()
    indices = report.assignments.indices[0]
    assert indices.shape == (6, 10)
    assert (indices[:, :5] == 0).all() and (indices[:, 5:] == 1).all()


def test_combook_single_atom_is_weighted_mean():
    corpus = two_value_corpus()
    S, X = corpus[0]
    weights = X.abs() ** 2
    expected = ((S / X) * weights).sum() / weights.sum()
    combook, _ = optimize_combook(make_combook(0j), corpus, epochs=5)
    assert combook.atoms[0].item() == pytest.approx(expected.item())


def test_combook_reseeds_empty_cluster():
    combook, _ = optimize_combook(make_combook(0.5 + 0j, 10 + 10j, -0.8j), two_value_corpus(), epochs=10)
    assert all(torch.isfinite(combook.atoms.abs()))
    assert combook.atoms.abs().max() <= 2.


def test_random_codebook():
    corpus = [rotated(torch.linspace(-3, 3, 128).reshape(8, 16))]
    first = random_codebook('phasebook', 6, corpus, seed=1)
    assert len(first) == 6
    assert torch.equal(first.atoms, random_codebook('phasebook', 6, corpus, seed=1).atoms)
    assert isinstance(random_codebook('magbook', 1, corpus), Magbook)
    with pytest.raises(ValueError):
        random_codebook('combook', 3, two_value_corpus())


def test_empty_corpus():
    with pytest.raises(ValueError):
        optimize_phasebook(uniform_phasebook(4), [])


def test_assignment_map_range():
    flat = torch.tensor([0, 1, 2, 1, 0, 2])
    split = AssignmentMap.split(flat, [(2, 2), (1, 2)], 3)
    assert torch.equal(split.indices[1], torch.tensor([[0, 2]]))
    with pytest.raises(ValueError):
        AssignmentMap([torch.tensor([0, 3])], 3)


def test_update_is_best_on_a_dense_grid():
    S, X = random_spectra((6, 9), 20), random_spectra((6, 9), 21)
    m = oracle_mask('IAM', S, X=X, r_max=2.).values
    phasebook = uniform_phasebook(4)
    assignments = phasebook_assign(phasebook, S, X)
    updated = phasebook_update(phasebook, assignments, S, X, m)
    grid = torch.linspace(-math.pi, math.pi, 3601, dtype=torch.float64)
    for j in range(len(phasebook)):
        selected = assignments == j
        if not selected.any():
            continue
        s, x, mj = S[selected], X[selected], m[selected]
        error = lambda theta: ((mj[:, None] * torch.exp(1j * theta)[None, :] * x[:, None] - s[:, None]).abs() ** 2).sum(0)
        best = error(updated.atoms[j:j + 1]).item()
        assert best <= error(grid).min().item() + 1e-12


def test_nested_uniform_phasebooks_do_not_increase_the_error():
    S, X = random_spectra((10, 17), 22), random_spectra((10, 17), 23)
    m = oracle_mask('IAM', S, X=X, r_max=2.).values
    errors = []
    for P in (2, 4, 8):
        phasebook = uniform_phasebook(P)
        errors.append(phasebook_objective(phasebook, phasebook_assign(phasebook, S, X), S, X, m).item())
    assert errors[1] <= errors[0] + 1e-12
    assert errors[2] <= errors[1] + 1e-12
