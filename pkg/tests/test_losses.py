import itertools
import math

import pytest
import torch

from maskbook.codebook import Combook, uniform_magbook
from maskbook.codebook_opt import uniform_phasebook
from maskbook.loss_funcs import magnitude_ref_index, phase_ref_index, combook_ref_index, reference_indices, \
    cross_entropy_loss, reduce_norm, spectral_loss, complex_loss, expected_csa_loss, expected_combook_csa_loss, \
    wa_loss, dc_whitened_kmeans_loss, chimera_loss, permutation_min
from maskbook.oracle_masks import oracle_mask, safe_ratio, dominance_labels
from maskbook.stft import stft

from conftest import random_spectra


def test_magnitude_reference():
    X = random_spectra((2, 3))
    assert (magnitude_ref_index(uniform_magbook(), X, X, 0.) == 1).all()
    assert (magnitude_ref_index(uniform_magbook(), torch.zeros_like(X), X, 0.) == 0).all()


def test_reference_policies():
    X = random_spectra((2, 3), 1)
    S = 1j * X
    magbook, phasebook = uniform_magbook(), uniform_phasebook(4)
    mag, phase = reference_indices(magbook, phasebook, S, X, 'fixed-reference')
    assert (phase == 1).all() and (mag == 1).all()
    # under a zero phase, Re(s/x) = 0 picks the zero atom
    mag, _ = reference_indices(magbook, phasebook, S, X, 'zero')
    assert (mag == 0).all()
    mag, _ = reference_indices(magbook, phasebook, S, X, 'current-estimate', torch.full((2, 3), math.pi / 2))
    assert (mag == 1).all()
    with pytest.raises(ValueError):
        reference_indices(magbook, phasebook, S, X, 'current-estimate')
    with pytest.raises(ValueError):
        reference_indices(magbook, phasebook, S, X, 'oracle')
    assert (phase_ref_index(phasebook, S, X) == 1).all()


def test_combook_reference():
    X = random_spectra((2, 2), 2)
    combook = Combook(torch.tensor([0, 1, 1j], dtype=torch.complex128))
    assert (combook_ref_index(combook, 0.9j * X, X) == 2).all()


def test_cross_entropy():
    refs = torch.tensor([0, 2, 1])
    one_hot = torch.nn.functional.one_hot(refs, 3).to(torch.float64)
    assert cross_entropy_loss(one_hot, refs).item() == 0.
    uniform = torch.full((3, 3), 1 / 3, dtype=torch.float64)
    assert cross_entropy_loss(uniform, refs).item() == pytest.approx(3 * math.log(3))
    flags = {}
    value = cross_entropy_loss(one_hot, torch.tensor([1, 2, 1]), flags)
    assert value.item() == pytest.approx(-math.log(1e-30))
    assert flags['ce_floor'] == 1


def test_spectral_losses():
    S, N = random_spectra((4, 5), 3), random_spectra((4, 5), 4)
    X = S + N
    iam = oracle_mask('IAM', S, X=X, r_max=math.inf)
    assert spectral_loss('MSA', 'L1', iam, X, S).item() == pytest.approx(0., abs=1e-12)
    assert spectral_loss('MA', 'L2', iam, X, S).item() == pytest.approx(0., abs=1e-20)
    psf = oracle_mask('PSF', S, X=X)
    assert spectral_loss('PSA', 'L1', psf, X, S).item() == pytest.approx(0., abs=1e-12)
    zero = torch.zeros(4, 5, dtype=torch.float64)
    assert spectral_loss('MSA', 'L1', zero, X, S).item() == pytest.approx(S.abs().sum().item())
    with pytest.raises(ValueError):
        spectral_loss('MXA', 'L1', zero, X, S)


def test_complex_losses():
    S, X = random_spectra((4, 5), 5), random_spectra((4, 5), 6)
    ratio, _ = safe_ratio(S, X)
    assert complex_loss('CSA', 'L1', ratio, X, S).item() == pytest.approx(0., abs=1e-12)
    assert complex_loss('CMA', 'L2', ratio, X, S).item() == pytest.approx(0., abs=1e-20)
    zero = torch.zeros(4, 5, dtype=torch.complex128)
    assert complex_loss('CSA', 'L1', zero, X, S).item() == pytest.approx(S.abs().sum().item())
    assert complex_loss('CSA', 'L2', zero, X, S, reduction='none').shape == (4, 5)


def test_expected_csa_matches_csa_for_one_hot():
    S, X = random_spectra((3, 4), 7), random_spectra((3, 4), 8)
    magbook, phasebook = uniform_magbook(), uniform_phasebook(4)
    mag_index = torch.randint(0, 3, (3, 4), generator=torch.Generator().manual_seed(0))
    phase_index = torch.randint(0, 4, (3, 4), generator=torch.Generator().manual_seed(1))
    mag_probs = torch.nn.functional.one_hot(mag_index, 3).to(torch.float64)
    phase_probs = torch.nn.functional.one_hot(phase_index, 4).to(torch.float64)
    mask = magbook.atoms[mag_index] * torch.exp(1j * phasebook.atoms[phase_index])
    expected = complex_loss('CSA', 'L1', mask, X, S)
    value = expected_csa_loss(mag_probs, phase_probs, magbook, phasebook, X, S)
    assert value.item() == pytest.approx(expected.item())
    combook = Combook(torch.tensor([0, 1, 1j], dtype=torch.complex128))
    value = expected_combook_csa_loss(mag_probs, combook, X, S, 'L2')
    assert value.item() == pytest.approx(complex_loss('CSA', 'L2', combook.atoms[mag_index], X, S).item())


def test_expected_csa_bounds_interpolated_csa():
    S, X = random_spectra((3, 4), 9), random_spectra((3, 4), 10)
    combook = Combook(torch.tensor([0, 1, 1j, -1], dtype=torch.complex128))
    probs = torch.softmax(torch.randn(3, 4, 4, generator=torch.Generator().manual_seed(2), dtype=torch.float64), -1)
    interpolated = (probs * combook.atoms).sum(-1)
    # Jensen: the expected loss is never below the loss of the expected mask
    assert expected_combook_csa_loss(probs, combook, X, S).item() >= complex_loss('CSA', 'L1', interpolated, X, S).item()


def test_wa_loss(small_config, two_tones):
    sources, mixture = two_tones
    X, S = stft(mixture, small_config), stft(sources, small_config).bins
    icm = torch.stack([safe_ratio(S[i], X.bins)[0] for i in range(2)])
    assert wa_loss(icm[0], X, sources[0]).item() == pytest.approx(0., abs=1e-8)
    assert wa_loss(torch.zeros_like(icm[0]), X, sources[0]).item() == pytest.approx(sources[0].abs().sum().item())
    assert wa_loss(icm, X, sources, misi_iters=2, x_time=mixture).item() == pytest.approx(0., abs=1e-8)
    with pytest.raises(ValueError):
        wa_loss(icm[0], X, sources[0], misi_iters=2)


def test_reduce_norm():
    residual = torch.tensor([3 + 4j, 0], dtype=torch.complex128)
    assert reduce_norm(residual, 'L1').item() == 5.
    assert reduce_norm(residual, 'L2').item() == 25.
    with pytest.raises(ValueError):
        reduce_norm(residual, 'L3')


def test_whitened_kmeans():
    Y = dominance_labels([random_spectra((4, 5), 11), random_spectra((4, 5), 12)])
    assert dc_whitened_kmeans_loss(Y, Y).item() == pytest.approx(0., abs=1e-9)
    V = torch.randn(20, 20, generator=torch.Generator().manual_seed(3), dtype=torch.float64)
    value = dc_whitened_kmeans_loss(V, Y).item()
    assert 18. - 1e-9 <= value <= 20. + 1e-9


def test_whitened_kmeans_orthogonal_and_ridge():
    Y = torch.tensor([[1., 0.], [1., 0.], [0., 1.], [0., 1.]], dtype=torch.float64)
    # V orthogonal to the column space of Y
    V = torch.tensor([[1.], [-1.], [0.], [0.]], dtype=torch.float64)
    assert dc_whitened_kmeans_loss(V, Y).item() == pytest.approx(1.)
    flags = {}
    V = torch.tensor([[1., 1.], [1., 1.], [0., 0.], [0., 0.]], dtype=torch.float64)
    assert math.isfinite(dc_whitened_kmeans_loss(V, Y, flags).item())
    assert flags['dc_ridge'] == 1
    with pytest.raises(ValueError):
        dc_whitened_kmeans_loss(V, Y * 0.5)


def test_chimera():
    assert chimera_loss(2., 4., 0.) == 4.
    assert chimera_loss(2., 4., 1.) == 2.
    assert chimera_loss(2., 4., 0.5) == 3.
    with pytest.raises(ValueError):
        chimera_loss(2., 4., 1.5)


def test_permutation_min():
    references = [torch.tensor([1., 2.]), torch.tensor([-3., 0.5])]
    distance = lambda e, r: (e - r).abs().sum()
    loss, perm = permutation_min(distance, references[::-1], references)
    assert loss.item() == 0. and perm == (1, 0)
    loss, perm = permutation_min(distance, references[:1], references[:1])
    assert perm == (0,)
    # ties keep the identity
    _, perm = permutation_min(lambda e, r: torch.tensor(1.), references, references)
    assert perm == (0, 1)
    with pytest.raises(ValueError):
        permutation_min(distance, references, references[:1])


def test_expected_csa_matches_sampling():
    S, X = random_spectra((3, 4), 11), random_spectra((3, 4), 12)
    magbook, phasebook = uniform_magbook(), uniform_phasebook(4)
    generator = torch.Generator().manual_seed(3)
    mag_probs = torch.softmax(torch.randn(3, 4, 3, generator=generator, dtype=torch.float64), -1)
    phase_probs = torch.softmax(torch.randn(3, 4, 4, generator=generator, dtype=torch.float64), -1)
    expected = expected_csa_loss(mag_probs, phase_probs, magbook, phasebook, X, S).item()

    torch.manual_seed(0)
    n_draw = 100000
    mag_index = torch.distributions.Categorical(probs=mag_probs).sample((n_draw,))
    phase_index = torch.distributions.Categorical(probs=phase_probs).sample((n_draw,))
    masks = magbook.atoms[mag_index] * torch.exp(1j * phasebook.atoms[phase_index])
    sampled = reduce_norm(masks * X - S, 'L1', 'none').sum((-2, -1)).mean().item()
    assert sampled == pytest.approx(expected, rel=0.01)


def test_whitened_kmeans_ignores_column_recombination():
    generator = torch.Generator().manual_seed(4)
    for _ in range(20):
        V = torch.randn(60, 4, generator=generator, dtype=torch.float64)
        labels = torch.randint(0, 3, (60,), generator=generator)
        Y = torch.nn.functional.one_hot(labels, 3).to(torch.float64)
        A = torch.randn(4, 4, generator=generator, dtype=torch.float64) + 4 * torch.eye(4, dtype=torch.float64)
        assert torch.linalg.matrix_rank(A) == 4
        value = dc_whitened_kmeans_loss(V, Y).item()
        assert dc_whitened_kmeans_loss(V @ A, Y).item() == pytest.approx(value, abs=1e-8)


@pytest.mark.parametrize('n_source', [2, 3])
def test_permutation_min_matches_exhaustive_search(n_source):
    generator = torch.Generator().manual_seed(n_source)
    distance = lambda e, r: (e - r).pow(2).sum()
    for _ in range(25):
        estimates = list(torch.randn(n_source, 6, generator=generator, dtype=torch.float64))
        references = list(torch.randn(n_source, 6, generator=generator, dtype=torch.float64))
        totals = {perm: sum(distance(estimates[e], references[r]).item() for r, e in enumerate(perm))
                  for perm in itertools.permutations(range(n_source))}
        best = min(totals, key=totals.get)
        loss, perm = permutation_min(distance, estimates, references)
        assert perm == best
        assert loss.item() == pytest.approx(totals[best], rel=1e-12)


def test_losses_accept_raw_and_wrapped_masks():
    S, X = random_spectra((4, 5), 13), random_spectra((4, 5), 14)
    iam, icm = oracle_mask('IAM', S, X=X, r_max=2.), oracle_mask('ICM', S, X=X, r_max=2.)
    for kind in ('MA', 'MSA', 'PSA'):
        assert spectral_loss(kind, 'L1', iam, X, S, m_ref=iam).item() == \
            spectral_loss(kind, 'L1', iam.values, X, S, m_ref=iam.values).item()
    for kind in ('CMA', 'CSA'):
        assert complex_loss(kind, 'L2', icm, X, S, c_ref=icm).item() == \
            complex_loss(kind, 'L2', icm.values, X, S, c_ref=icm.values).item()
