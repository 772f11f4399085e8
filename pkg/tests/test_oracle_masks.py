import math

import pytest
import torch

from maskbook import constants
from maskbook.oracle_masks import MaskKind, oracle_mask, phase_difference, wrap_angle, dominance_labels, mask_histogram
from maskbook.codebook import apply_mask

from conftest import random_spectra


def test_equal_energies():
    S = torch.ones(2, 3, dtype=torch.complex128)
    N = torch.ones(2, 3, dtype=torch.complex128)
    assert torch.allclose(oracle_mask('IRM', S, N=N).values, torch.full((2, 3), 0.5, dtype=torch.float64))
    assert torch.allclose(oracle_mask('WF', S, N=N).values, torch.full((2, 3), 0.5, dtype=torch.float64))
    # ties go to 0
    assert oracle_mask('IBM', S, N=N).values.sum() == 0


def test_phase_inversion():
    X = random_spectra((4, 5))
    S = -X
    assert torch.allclose(oracle_mask('PSF', S, X=X).values, -torch.ones(4, 5, dtype=torch.float64))
    assert oracle_mask('TPSF', S, X=X).values.abs().max() == 0


def test_iam_clamp():
    S = torch.full((1, 1), 3., dtype=torch.complex128)
    X = torch.ones(1, 1, dtype=torch.complex128)
    mask = oracle_mask('IAM', S, X=X, r_max=2.)
    assert mask.values.item() == 2.
    assert oracle_mask('IAM', S, X=X, r_max=math.inf).values.item() == 3.


def test_real_masks_ranges():
    S, N = random_spectra((6, 9), 1), random_spectra((6, 9), 2)
    for kind in ('IBM', 'IRM', 'WF', 'TPSF'):
        values = oracle_mask(kind, S, N=N).values
        assert values.min() >= 0 and values.max() <= 1
    assert oracle_mask('IAM', S, N=N, r_max=2.).values.max() <= 2.


def test_icm_reconstructs_source():
    S, X = random_spectra((5, 7), 3), random_spectra((5, 7), 4)
    mask = oracle_mask('ICM', S, X=X, r_max=math.inf)
    assert mask.guarded == 0
    assert torch.allclose(apply_mask(mask, X).bins, S)


def test_zero_mixture_guard():
    S = torch.tensor([[1. + 0j, 2.]], dtype=torch.complex128)
    X = torch.tensor([[0. + 0j, 1.]], dtype=torch.complex128)
    for kind in ('IAM', 'PSF', 'ICM'):
        mask = oracle_mask(kind, S, X=X, r_max=math.inf)
        assert mask.guarded == 1
        assert mask.values[0, 0] == 0
        assert torch.isfinite(mask.values.abs()).all()


def test_inconsistent_mixture():
    S, N = random_spectra((2, 2), 5), random_spectra((2, 2), 6)
    with pytest.raises(ValueError):
        oracle_mask('IRM', S, N=N, X=S)
    with pytest.raises(ValueError):
        oracle_mask('IRM', S)
    with pytest.raises(ValueError):
        oracle_mask('IAM', S, N=N, r_max=0.)
    with pytest.raises(ValueError):
        oracle_mask('XYZ', S, N=N)


def test_phase_difference():
    X = random_spectra((3, 4), 7)
    assert phase_difference(X, X).abs().max() < 1e-12
    assert torch.allclose(phase_difference(1j * X, X), torch.full((3, 4), math.pi / 2, dtype=torch.float64))
    # range is (-pi, pi]
    assert torch.allclose(phase_difference(-X, X), torch.full((3, 4), math.pi, dtype=torch.float64))


def test_wrap_angle():
    theta = torch.tensor([-math.pi, math.pi, 2.5 * math.pi, 0.5], dtype=torch.float64)
    assert torch.allclose(wrap_angle(theta), torch.tensor([math.pi, math.pi, 0.5 * math.pi, 0.5], dtype=torch.float64))


def test_mask_kinds():
    assert MaskKind('ICM').is_complex
    assert MaskKind('IAM').uses_r_max and not MaskKind('PSF').uses_r_max


def test_dominance_labels():
    a = torch.tensor([[2. + 0j, 1.]], dtype=torch.complex128)
    b = torch.tensor([[1. + 0j, 1.]], dtype=torch.complex128)
    labels = dominance_labels([a, b])
    assert labels.tolist() == [[1., 0.], [1., 0.]]


def test_weighted_histogram():
    values = torch.tensor([0.1, 0.1, 0.9])
    density, edges = mask_histogram(values, bins=2, value_range=(0., 1.), weights=torch.tensor([1., 1., 2.]))
    assert len(edges) == 3
    assert density[0] == pytest.approx(density[1])


@pytest.mark.parametrize('kind', constants.MASK_KINDS)
def test_masks_ignore_a_common_phase_rotation(kind):
    S, X = random_spectra((5, 7), 8), random_spectra((5, 7), 9)
    rotation = torch.exp(1j * torch.tensor(2.3, dtype=torch.float64))
    mask = oracle_mask(kind, S, X=X).values
    rotated = oracle_mask(kind, rotation * S, X=rotation * X).values
    assert torch.allclose(rotated, mask, rtol=0, atol=1e-12)
