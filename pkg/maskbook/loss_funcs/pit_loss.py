from itertools import permutations

from .. import constants


def permutation_min(loss_fn, estimates, references):
    """
    Minimum of sum_i loss_fn(estimates[perm[i]], references[i]) over all permutations.
    Returns (loss, perm); the identity is tried first and only strictly smaller totals replace it.
    """
    n_source = len(references)
    if len(estimates) != n_source:
        raise ValueError('{} estimates for {} references'.format(len(estimates), n_source))
    if not 1 <= n_source <= constants.MAX_PIT_SOURCES:
        raise ValueError('permutation search supports 1 to {} sources, got {}'.format(constants.MAX_PIT_SOURCES, n_source))
    pairwise = [[loss_fn(estimates[e], references[r]) for e in range(n_source)] for r in range(n_source)]
    best_loss, best_perm = None, None
    for perm in permutations(range(n_source)):
        total = sum(pairwise[r][e] for r, e in enumerate(perm))
        if best_loss is None or float(total) < float(best_loss):
            best_loss, best_perm = total, perm
    return best_loss, best_perm
