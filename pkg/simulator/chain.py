"""
The agreement-matrix Markov chain.

One kernel step picks a matched pair (i, i) and a variable l at random and, depending on whether
that pair currently agrees on l, toggles its value v -> 1 - v with probability p1 (agreeing) or
p2 (disagreeing).  The non-matched pairs (i, j) of the same X record are then brought back in line:

  agree -> disagree on the diagonal:    agreeing (i, j) are flipped, disagreeing ones flip with prob. q1
  disagree -> agree on the diagonal:    agreeing (i, j) are flipped, disagreeing ones flip with prob. q2
  disagree -> disagree on the diagonal: disagreeing (i, j) flip with prob. q3

Missing cells are never touched, and a step that lands on a missing diagonal cell does nothing.
Original mode is the same kernel run on 0/1 values with every threshold at 1.
"""
import hashlib
import logging
from typing import Iterator, Optional, Union

import numpy as np

from comparison.data import Threshold
from records.data import AgreementMatrix, TransitionParams
from records.errors import DimensionMismatchError, ConfigurationError, ReportIOError
from simulator.data import ChainConfig, ChainSample

logger = logging.getLogger(__name__)

# (i, l, u) selections are drawn this many steps at a time; fixed so results never depend on it
SELECTION_BATCH = 4096


class AgreementChain:
    """ A Markov chain on agreement matrices started at `initial`.  Owns its working matrix. """

    def __init__(self, initial: AgreementMatrix, params: TransitionParams, threshold: Threshold,
                 seed: Optional[int] = None):
        if not (len(params.variables) == len(threshold.variables) == initial.dims[2]):
            raise DimensionMismatchError('Matrix, transition parameters and thresholds disagree on variables.')
        if (threshold.theta <= 0.5).any():
            raise ConfigurationError('The kernel needs every threshold above 0.5.')
        if initial.n_y < initial.n_x:
            raise DimensionMismatchError('Every X record of a block needs its matched Y record.')
        self.initial = initial
        self.state = initial.working_copy()
        self.steps = 0

        self._theta = threshold.theta.tolist()
        self._p1, self._p2 = params.p1.tolist(), params.p2.tolist()
        self._q1, self._q2, self._q3 = params.q1.tolist(), params.q2.tolist(), params.q3.tolist()

        selection_seq, row_seq = np.random.SeedSequence(seed).spawn(2)
        self._selection_rng = np.random.default_rng(selection_seq)
        self._row_rng = np.random.default_rng(row_seq)
        self._batch = None
        self._cursor = SELECTION_BATCH

    def _next_selection(self) -> tuple[int, int, float]:
        if self._cursor >= SELECTION_BATCH:
            n_x, _, n_var = self.state.shape
            self._batch = (
                self._selection_rng.integers(n_x, size=SELECTION_BATCH).tolist(),
                self._selection_rng.integers(n_var, size=SELECTION_BATCH).tolist(),
                self._selection_rng.random(SELECTION_BATCH).tolist(),
            )
            self._cursor = 0
        i, l, u = (part[self._cursor] for part in self._batch)
        self._cursor += 1
        return i, l, u

    def take_step(self):
        i, l, u = self._next_selection()
        self.steps += 1
        apply_step(self.state, i, l, u, self._theta[l],
                   self._p1[l], self._p2[l], self._q1[l], self._q2[l], self._q3[l], self._row_rng)

    def advance(self, m: int):
        """ Advances the chain by `m` kernel steps. """
        for _ in range(m):
            self.take_step()

    def snapshot(self) -> AgreementMatrix:
        return AgreementMatrix(self.state, mode=self.initial.mode, variables=self.initial.variables)

    def samples(self, n_samples: int, thinning: int) -> Iterator[ChainSample]:
        """ Yields the state after every `thinning` steps, `n_samples` times. """
        reference = None
        for s in range(1, n_samples + 1):
            self.advance(thinning)
            matrix = self.snapshot()
            if reference is None:
                reference = matrix
            yield ChainSample(index=s, step=self.steps, matrix=matrix,
                              distance=distance(matrix, reference),
                              distance_to_initial=distance(matrix, self.initial))


def apply_step(values: np.ndarray, i: int, l: int, u: float, theta: float,
               p1: float, p2: float, q1: float, q2: float, q3: float, rng: np.random.Generator) -> bool:
    """
    One kernel step on `values` (modified in place) for the selected record `i` and variable `l`;
    `u` is the uniform draw deciding the diagonal flip.  Returns whether the diagonal was disagreeing
    or changed, i.e. whether the row was visited.
    """
    v = values[i, i, l]
    if v != v:  # missing diagonal: nothing to do
        return False
    was_agree = v >= theta
    if u < (p1 if was_agree else p2):
        v = 1.0 - v
        values[i, i, l] = v
    now_agree = v >= theta

    if was_agree and now_agree:
        return False
    if was_agree:
        force, q = True, q1
    elif now_agree:
        force, q = True, q2
    else:
        force, q = False, q3

    row = values[i, :, l]
    with np.errstate(invalid='ignore'):
        agree = row >= theta
        disagree = row < theta
    agree[i] = disagree[i] = False
    draws = rng.random(row.shape[0])
    if force:
        row[agree] = 1.0 - row[agree]
    flips = disagree & (draws < q)
    row[flips] = 1.0 - row[flips]
    return True


# Functions
# =-=-=-=-=
def kernel_step(state: AgreementMatrix, params: TransitionParams, threshold: Threshold,
                rng: np.random.Generator) -> AgreementMatrix:
    """ One kernel step from `state`, returned as a new matrix. """
    n_x, _, n_var = state.dims
    values = state.working_copy()
    i, l, u = int(rng.integers(n_x)), int(rng.integers(n_var)), float(rng.random())
    apply_step(values, i, l, u, float(threshold.theta[l]),
               float(params.p1[l]), float(params.p2[l]),
               float(params.q1[l]), float(params.q2[l]), float(params.q3[l]), rng)
    return AgreementMatrix(values, mode=state.mode, variables=state.variables)


def iter_chain(initial: AgreementMatrix, params: TransitionParams, threshold: Threshold,
               cfg: ChainConfig) -> Iterator[ChainSample]:
    chain = AgreementChain(initial, params, threshold, seed=cfg.seed)
    return chain.samples(cfg.n_samples, cfg.thinning)


def simulate_chain(initial: AgreementMatrix, params: TransitionParams, threshold: Threshold,
                   cfg: ChainConfig) -> list[ChainSample]:
    return list(iter_chain(initial, params, threshold, cfg))


def distance(sample: Union[AgreementMatrix, np.ndarray], reference: Union[AgreementMatrix, np.ndarray]) -> float:
    """
    Share of cells whose value differs from `reference`.  Two missing cells count as equal
    (the kernel never changes a missing cell).
    """
    a = sample.values if isinstance(sample, AgreementMatrix) else np.asarray(sample)
    b = reference.values if isinstance(reference, AgreementMatrix) else np.asarray(reference)
    if a.shape != b.shape:
        raise DimensionMismatchError(f'Cannot compare matrices of shapes {a.shape} and {b.shape}.')
    if not a.size:
        return 0.0
    same = (a == b) | (np.isnan(a) & np.isnan(b))
    return float(np.count_nonzero(~same) / a.size)


def derive_block_seed(master_seed: int, block_key) -> int:
    """ Seed of one block's chain: the master seed mixed with a hash of the block key. """
    digest = hashlib.sha256(repr(tuple(block_key)).encode()).digest()
    seq = np.random.SeedSequence([int(master_seed), int.from_bytes(digest[:8], 'little')])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


# Snapshots
# -*-*-*-*-
def save_snapshots(path, samples: list[ChainSample]):
    """ Stores retained samples so another linking method can be assessed on them later. """
    if not samples:
        raise ConfigurationError('No samples to store.')
    try:
        np.savez_compressed(
            path,
            values=np.stack([sample.matrix.values for sample in samples]),
            index=np.array([sample.index for sample in samples]),
            step=np.array([sample.step for sample in samples]),
            variables=np.array(samples[0].matrix.variables, dtype=str),
        )
    except OSError as e:
        raise ReportIOError(f'Could not write snapshots to {path}: {e}')


def load_snapshots(path, initial: AgreementMatrix) -> list[ChainSample]:
    try:
        with np.load(path) as stored:
            values, index, step = stored['values'], stored['index'], stored['step']
            variables = tuple(stored['variables'].tolist())
    except OSError as e:
        raise ReportIOError(f'Could not read snapshots from {path}: {e}')
    if values.shape[1:] != initial.dims or variables != tuple(initial.variables):
        raise DimensionMismatchError(f'Snapshots in {path} do not belong to this block.')
    samples, reference = [], None
    for s, n, arr in zip(index.tolist(), step.tolist(), values):
        matrix = AgreementMatrix(arr, mode=initial.mode, variables=initial.variables)
        if reference is None:
            reference = matrix
        samples.append(ChainSample(index=s, step=n, matrix=matrix,
                                   distance=distance(matrix, reference),
                                   distance_to_initial=distance(matrix, initial)))
    return samples
