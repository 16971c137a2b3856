import logging
from typing import Sequence, Union

import numpy as np
import pandas as pd

from comparison.data import Threshold, Block, BlockPartition
from records.data import VariableSpec, AlignedPair, AgreementMatrix, LinkageMode
from records.errors import ConfigurationError, UndefinedAgreementError, AlignmentError
from records.utils import MISSING, is_missing, as_plain_number

logger = logging.getLogger(__name__)


# Similarity and agreement
# -*-*-*-*-*-*-*-*-*-*-*-*-
def similarity(x_val, y_val, spec: VariableSpec) -> float:
    """ V = 1 - |x - y| / T, clamped to [0, 1]; MISSING (NaN) when either value is missing. """
    if is_missing(x_val) or is_missing(y_val):
        return MISSING
    if spec.missing_sentinel is not None and spec.missing_sentinel in (x_val, y_val):
        return MISSING
    return float(min(1.0, max(0.0, 1.0 - abs(float(x_val) - float(y_val)) / spec.t_range)))


def similarity_layer(x_vals: np.ndarray, y_vals: np.ndarray, spec: VariableSpec,
                     mode: str = LinkageMode.EXTENDED) -> np.ndarray:
    """ (len(x_vals), len(y_vals)) layer of comparisons for one variable.  NaN marks missing values. """
    x_vals = np.asarray(x_vals, dtype=float)[:, None]
    y_vals = np.asarray(y_vals, dtype=float)[None, :]
    if mode == LinkageMode.ORIGINAL:
        layer = (x_vals == y_vals).astype(float)
    else:
        layer = np.clip(1.0 - np.abs(x_vals - y_vals) / spec.t_range, 0.0, 1.0)
    layer[np.isnan(x_vals) | np.isnan(y_vals)] = MISSING
    return layer


def threshold(spec: VariableSpec) -> float:
    """ theta = 1 - delta / T """
    if not 0 <= spec.tolerance < spec.t_range / 2:
        raise ConfigurationError(f'{spec.name}: tolerance {spec.tolerance} would put theta at or below 0.5.')
    return 1.0 - spec.tolerance / spec.t_range


def agrees(cell_value: float, theta: float) -> bool:
    if is_missing(cell_value):
        raise UndefinedAgreementError('Agreement is undefined for a missing comparison.')
    return cell_value >= theta


def agreement_mask(values: np.ndarray, threshold_: Union[Threshold, np.ndarray]) -> np.ndarray:
    """ Elementwise `agrees` over a matrix; missing cells come out False. """
    theta = threshold_.theta if isinstance(threshold_, Threshold) else np.asarray(threshold_)
    with np.errstate(invalid='ignore'):
        return values >= theta


def disagreement_mask(values: np.ndarray, threshold_: Union[Threshold, np.ndarray]) -> np.ndarray:
    """ Non-missing cells below threshold. """
    theta = threshold_.theta if isinstance(threshold_, Threshold) else np.asarray(threshold_)
    with np.errstate(invalid='ignore'):
        return values < theta


# Blocking
# -*-*-*-*-
def _block_keys(frame: pd.DataFrame, blocking_vars: Sequence[str]) -> pd.DataFrame:
    keys = frame[list(blocking_vars)].apply(pd.to_numeric, errors='coerce')
    return keys


def block_partition(pair: AlignedPair, blocking_vars: Sequence[str]) -> BlockPartition:
    """
    Splits the pair into blocks of records sharing every blocking value.  Inside a block the
    matched records are lined up on the diagonal (see `Block`).  Records with a missing
    blocking value are put in singleton residual blocks and never compared.
    """
    blocking_vars = tuple(blocking_vars)
    for table in (pair.file_x, pair.file_y):
        unknown = [var for var in blocking_vars if var not in table.frame.columns]
        if unknown:
            raise ConfigurationError(f'Unknown blocking variable(s): {", ".join(unknown)}')

    if not blocking_vars:
        block = _make_block((), list(range(len(pair.file_x))), list(range(len(pair.file_y))), pair, ())
        return BlockPartition((), (block,))

    x_keys = _block_keys(pair.file_x.frame, blocking_vars)
    y_keys = _block_keys(pair.file_y.frame, blocking_vars)
    x_groups = _group_positions(x_keys)
    y_groups = _group_positions(y_keys)

    blocks = []
    for key in sorted(set(x_groups) | set(y_groups)):
        blocks.append(_make_block(key, x_groups.get(key, []), y_groups.get(key, []), pair, blocking_vars))

    # residual singletons
    x_ids, y_ids = pair.file_x.entity_ids, pair.file_y.entity_ids
    for pos in np.flatnonzero(x_keys.isna().any(axis=1).to_numpy()):
        blocks.append(Block(key=('x', as_plain_number(x_ids[pos])), x_indices=np.zeros(0, dtype=int),
                            y_indices=np.zeros(0, dtype=int), orphans=np.array([pos]),
                            variables=blocking_vars, residual=True))
    for pos in np.flatnonzero(y_keys.isna().any(axis=1).to_numpy()):
        blocks.append(Block(key=('y', as_plain_number(y_ids[pos])), x_indices=np.zeros(0, dtype=int),
                            y_indices=np.array([pos]), variables=blocking_vars, residual=True))

    logger.debug('%d blocks on %s', len(blocks), ' & '.join(blocking_vars))
    return BlockPartition(blocking_vars, tuple(blocks))


def _group_positions(keys: pd.DataFrame) -> dict[tuple, list[int]]:
    """ Maps each complete key tuple to the positions holding it, in file order. """
    complete = keys.dropna()
    groups: dict[tuple, list[int]] = {}
    for pos, key in zip(complete.index, complete.itertuples(index=False, name=None)):
        groups.setdefault(tuple(float(k) for k in key), []).append(int(pos))
    return groups


def _make_block(key: tuple, xs: list[int], ys: list[int], pair: AlignedPair, variables: tuple) -> Block:
    members = set(ys)
    matched = [x for x in xs if pair.alignment[x] in members]
    orphans = [x for x in xs if pair.alignment[x] not in members]
    matched_y = [int(pair.alignment[x]) for x in matched]
    taken = set(matched_y)
    y_order = matched_y + [y for y in ys if y not in taken]
    if orphans:
        logger.debug('block %s: %d X records have their true match elsewhere', key, len(orphans))
    return Block(key=key,
                 x_indices=np.array(matched, dtype=int),
                 y_indices=np.array(y_order, dtype=int),
                 orphans=np.array(orphans, dtype=int),
                 variables=variables)


# Agreement matrix
# -*-*-*-*-*-*-*-*-
def build_agreement_matrix(pair: AlignedPair, block: Block, specs: Sequence[VariableSpec],
                           mode: str = LinkageMode.EXTENDED) -> AgreementMatrix:
    """
    Compares every X record of `block` with every Y record of it on each variable in `specs`.
    Extended mode stores similarity values, original mode stores 1.0 for equal values and 0.0
    otherwise.  Missing values give NaN in both.
    """
    if not np.array_equal(pair.alignment[block.x_indices], block.y_indices[:block.n_x]):
        raise AlignmentError(f'Block {block.label} does not hold its matched records on the diagonal.')
    layers = [
        similarity_layer(pair.file_x.values(spec.name)[block.x_indices],
                         pair.file_y.values(spec.name)[block.y_indices],
                         spec, mode)
        for spec in specs
    ]
    values = np.stack(layers, axis=2) if layers else np.zeros((block.n_x, block.n_y, 0))
    return AgreementMatrix(values, mode=mode, variables=tuple(spec.name for spec in specs))
