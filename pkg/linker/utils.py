"""
Fellegi-Sunter weights and the greedy one-to-one linking method.

Weights use natural logarithms.  Changing the base rescales every weight by the same factor, so
a cutoff carries over between bases once it is rescaled the same way.
"""
import logging
from dataclasses import dataclass

import numpy as np

from comparison.data import Threshold
from comparison.utils import agreement_mask, disagreement_mask, agrees
from linker.data import WeightMatrix
from records.data import AgreementMatrix, MugProfile, LinkSet
from records.errors import WeightDomainError
from records.utils import is_missing

logger = logging.getLogger(__name__)


def _check_domain(variable: str, m: float, u: float, g: float):
    if not (m > 0 and u > 0 and m + g < 1 and u + g < 1):
        raise WeightDomainError(
            f'{variable}: weights need 0 < m, 0 < u, m + g < 1 and u + g < 1 '
            f'(m={m:.6g}, u={u:.6g}, g={g:.6g}); smooth the profile first.'
        )


def field_weight(cell_value: float, theta: float, m: float, u: float, g: float, variable: str = '') -> float:
    """
    ln(m / u) for an agreeing value, ln((1 - m - g) / (1 - u - g)) for a disagreeing one,
    0 for a missing one.
    """
    _check_domain(variable, m, u, g)
    if is_missing(cell_value):
        return 0.0
    if agrees(cell_value, theta):
        return float(np.log(m / u))
    return float(np.log((1 - m - g) / (1 - u - g)))


@dataclass(frozen=True, eq=False)
class FieldWeights:
    """ Agreement and disagreement weight of each variable under one m/u/g profile. """
    agree: np.ndarray
    disagree: np.ndarray

    @classmethod
    def from_profile(cls, mug: MugProfile) -> 'FieldWeights':
        for variable, m, u, g in zip(mug.variables, mug.m, mug.u, mug.g):
            _check_domain(variable, m, u, g)
        return cls(np.log(mug.m / mug.u), np.log((1 - mug.m - mug.g) / (1 - mug.u - mug.g)))


def composite_weights(matrix: AgreementMatrix, threshold: Threshold, mug: MugProfile) -> WeightMatrix:
    """ W[i, j] = sum over variables of the field weights; missing fields add exactly 0. """
    weights = FieldWeights.from_profile(mug)
    values = matrix.values
    agree = agreement_mask(values, threshold)
    disagree = disagreement_mask(values, threshold)
    # missing cells are False in both masks
    total = (np.where(agree, weights.agree, 0.0) + np.where(disagree, weights.disagree, 0.0)).sum(axis=2)
    return WeightMatrix(total)


def greedy_link(weights: WeightMatrix, cutoff: float = 0.0) -> LinkSet:
    """
    Walks the pairs from the largest weight down (ties by ascending (i, j)) and links a pair when
    its weight is above `cutoff` and neither record is linked yet.
    """
    w = weights.values
    n_x, n_y = w.shape
    candidates = np.argwhere(w > cutoff)
    if not len(candidates):
        return LinkSet(n_x, [], [], [], cutoff=cutoff)
    rows, cols = candidates[:, 0], candidates[:, 1]
    order = np.lexsort((cols, rows, -w[rows, cols]))

    x_used = np.zeros(n_x, dtype=bool)
    y_used = np.zeros(n_y, dtype=bool)
    links_x, links_y, links_w = [], [], []
    limit = min(n_x, n_y)
    for i, j in zip(rows[order].tolist(), cols[order].tolist()):
        if x_used[i] or y_used[j]:
            continue
        x_used[i] = y_used[j] = True
        links_x.append(i)
        links_y.append(j)
        links_w.append(w[i, j])
        if len(links_x) == limit:
            break
    return LinkSet(n_x, links_x, links_y, links_w, cutoff=cutoff)


def link(matrix: AgreementMatrix, threshold: Threshold, mug: MugProfile, cutoff: float = 0.0) -> LinkSet:
    return greedy_link(composite_weights(matrix, threshold, mug), cutoff)
