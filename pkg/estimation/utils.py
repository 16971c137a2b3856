"""
Estimation of the m, u and g probabilities of a block and of the Markov kernel parameters that keep
them stationary.

Counting conventions (per variable l, over one block whose leading diagonal holds the matched pairs):

  m = agreeing diagonal cells / all diagonal cells
  u = agreeing off-diagonal cells / all off-diagonal cells
  g = missing cells / all cells

A missing cell counts as 'not agreeing' in m and u, so m, u and g read as parts of one
agree/disagree/missing split.
"""
import logging

import numpy as np

from comparison.data import Threshold
from comparison.utils import agreement_mask
from records.data import AgreementMatrix, MugProfile, TransitionParams
from records.errors import EstimationError, InfeasibleMarginalsError

logger = logging.getLogger(__name__)

# how far outside [0, 1] a computed kernel probability may stray before it counts as infeasible
NUMERICAL_SLACK = 1e-12


def estimate_mug(matrix: AgreementMatrix, threshold: Threshold) -> MugProfile:
    n_x, n_y, _ = matrix.dims
    if n_x == 0:
        raise EstimationError('Cannot estimate m/u/g: the block has no matched pairs.')
    if n_y < n_x:
        raise EstimationError('Cannot estimate m/u/g: fewer Y records than matched pairs.')

    values = matrix.values
    diagonal = np.arange(n_x)
    missing = np.isnan(values)
    all_missing = missing[diagonal, diagonal, :].all(axis=0)
    if all_missing.any():
        names = [var for var, flag in zip(threshold.variables, all_missing) if flag]
        raise EstimationError(f'Cannot estimate m: every matched pair is missing {", ".join(names)}.')

    agree = agreement_mask(values, threshold)
    diagonal_agree = agree[diagonal, diagonal, :].sum(axis=0)
    off_diagonal_agree = agree.sum(axis=(0, 1)) - diagonal_agree
    n_off = n_x * n_y - n_x

    g = missing.sum(axis=(0, 1)) / (n_x * n_y)
    m = diagonal_agree / n_x
    if n_off:
        u = off_diagonal_agree / n_off
    else:
        u = np.zeros_like(m)

    # the diagonal can be less (or more) missing than the block as a whole; keep m + g <= 1
    over = (m + g > 1) | (u + g > 1)
    if over.any():
        logger.debug('clipping m/u to 1 - g for %s', [v for v, f in zip(threshold.variables, over) if f])
    m = np.minimum(m, 1 - g)
    u = np.minimum(u, 1 - g)
    return MugProfile(threshold.variables, m, u, g)


def smoothing_epsilon(n_x: int, n_y: int) -> float:
    n_off = n_x * n_y - n_x
    if n_off <= 0:
        raise EstimationError('Cannot smooth m/u/g: the block has no non-matched pairs.')
    return 1.0 / (2 * n_off)


def smooth_mug(mug: MugProfile, n_x: int, n_y: int) -> MugProfile:
    """
    Pulls m and u off the edges where log(m/u) and the kernel formulas break down:
    both are kept inside [eps, 1 - g - eps] with eps = 1 / (2 * off-diagonal cells).
    """
    eps = smoothing_epsilon(n_x, n_y)
    upper = 1 - mug.g - eps
    if (upper < eps).any():
        names = [var for var, flag in zip(mug.variables, upper < eps) if flag]
        raise EstimationError(f'{", ".join(names)} missing almost everywhere; m/u cannot be smoothed.')
    m = np.clip(mug.m, eps, upper)
    u = np.clip(mug.u, eps, upper)
    return MugProfile(mug.variables, m, u, mug.g)


def _probability(value: float, variable: str, name: str) -> float:
    if 0 <= value <= 1:
        return float(value)
    if -NUMERICAL_SLACK <= value < 0:
        return 0.0
    if 1 < value <= 1 + NUMERICAL_SLACK:
        return 1.0
    raise InfeasibleMarginalsError(
        f'{variable}: {name} = {value:.6g} is not a probability; the m/u/g marginals cannot be held stationary.'
    )


def transition_params(mug: MugProfile) -> TransitionParams:
    """
    Kernel parameters keeping P(matched pair agrees) = m and P(non-matched pair agrees) = u:

      u <= (1 - g) / 2:  p1 = (1 - m - g) / m,                               q1 = q2 = u / (1 - u - g)
      otherwise:         p1 = (1 - m - g)(1 - u - g) / (m (3u + g - 1)),     q1 = q2 = 1
      p2 = p1 m / (1 - m - g),  q3 = 1
    """
    columns = {name: [] for name in ('p1', 'p2', 'q1', 'q2', 'q3')}
    for variable, m, u, g in zip(mug.variables, mug.m, mug.u, mug.g):
        if not (m > 0 and m + g < 1 and u + g < 1):
            raise InfeasibleMarginalsError(
                f'{variable}: need m > 0, m + g < 1 and u + g < 1 (m={m:.6g}, u={u:.6g}, g={g:.6g}).'
            )
        if u <= 0.5 * (1 - g):
            p1 = (1 - m - g) / m
            # p1 * m / (1 - m - g) simplifies to exactly 1 on this branch
            p2 = 1.0
            q = u / (1 - u - g)
        else:
            p1 = (1 - m - g) * (1 - u - g) / (m * (3 * u + g - 1))
            p2 = p1 * m / (1 - m - g)
            q = 1.0
        columns['p1'].append(_probability(p1, variable, 'p1'))
        columns['p2'].append(_probability(p2, variable, 'p2'))
        columns['q1'].append(_probability(q, variable, 'q1'))
        columns['q2'].append(_probability(q, variable, 'q2'))
        columns['q3'].append(1.0)
    return TransitionParams(mug.variables, **columns)


def estimate_block_profile(matrix: AgreementMatrix, threshold: Threshold, overrides=None) -> MugProfile:
    """
    The profile an assessment uses: estimated from `matrix`, with any externally known
    values from `overrides` taking precedence, then smoothed.
    """
    if overrides and set(threshold.variables) <= set(overrides):
        mug = MugProfile(threshold.variables,
                         *([overrides[var][key] for var in threshold.variables] for key in ('m', 'u', 'g')))
    else:
        mug = estimate_mug(matrix, threshold)
        if overrides:
            mug = mug.with_overrides(overrides)
    return smooth_mug(mug, matrix.n_x, matrix.n_y)
