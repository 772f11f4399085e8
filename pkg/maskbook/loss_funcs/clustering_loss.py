import torch

from .. import constants
from ..utils import get_logger, to_tensor

logger = get_logger(__name__)


def dc_whitened_kmeans_loss(V, Y, flags=None):
    """
    Whitened k-means deep clustering loss
    D - tr((V^T V)^{-1} V^T Y (Y^T Y)^{-1} Y^T V), with V: (TF, D) embeddings and Y: (TF, S) one-hot labels.
    Rank-deficient V^T V gets a ridge of 1e-9 I; sources with no bins are dropped from Y.
    """
    V, Y = to_tensor(V, torch.float64), to_tensor(Y, torch.float64)
    if V.dim() != 2 or Y.dim() != 2 or V.shape[0] != Y.shape[0]:
        raise ValueError('expected V (TF, D) and Y (TF, S) with equal rows, got {} and {}'.format(
            tuple(V.shape), tuple(Y.shape)))
    if not ((Y.sum(-1) - 1.).abs() < 1e-12).all() or not ((Y == 0) | (Y == 1)).all():
        raise ValueError('Y rows must be one-hot')
    D = V.shape[1]
    Y = Y[:, Y.sum(0) > 0]
    VtV = V.T @ V
    if torch.linalg.matrix_rank(VtV.detach()) < D:
        logger.warning('dc loss: V^T V rank deficient, adding ridge {}'.format(constants.DC_RIDGE))
        if flags is not None:
            flags['dc_ridge'] = flags.get('dc_ridge', 0) + 1
        VtV = VtV + constants.DC_RIDGE * torch.eye(D, dtype=torch.float64)
    YtY = Y.T @ Y
    VtY = V.T @ Y
    projected = torch.linalg.solve(VtV, VtY) @ torch.linalg.solve(YtY, VtY.T)
    return D - torch.trace(projected)


def chimera_loss(dc_loss, mi_loss, alpha=constants.DEFAULT_CHIMERA_ALPHA):
    if not 0. <= alpha <= 1.:
        raise ValueError('alpha must lie in [0, 1], got {}'.format(alpha))
    return alpha * dc_loss + (1. - alpha) * mi_loss
