import os
import tempfile

import numpy as np
from django.test import SimpleTestCase

from comparison.data import Threshold
from estimation.utils import estimate_block_profile, transition_params
from records.data import AgreementMatrix, TransitionParams, LinkageMode
from records.errors import ConfigurationError, DimensionMismatchError
from simulator.chain import (AgreementChain, apply_step, kernel_step, iter_chain, simulate_chain, distance,
                             derive_block_seed, save_snapshots, load_snapshots)
from simulator.data import ChainConfig

NaN = np.nan


def one_variable_params(p1=0.1, p2=1.0, q1=0.2, q2=0.2) -> TransitionParams:
    return TransitionParams(('A',), [p1], [p2], [q1], [q2], [1.0])


def random_block(n_x, n_y, n_var, seed, u=0.2, g=0.05) -> AgreementMatrix:
    """ A 0/1 block whose every tenth matched pair disagrees; other pairs agree with rate about u. """
    rng = np.random.default_rng(seed)
    values = (rng.random((n_x, n_y, n_var)) < u).astype(float)
    values[(rng.random(values.shape) < g) & ~np.eye(n_x, n_y, dtype=bool)[:, :, None]] = NaN
    diagonal = np.arange(n_x)
    values[diagonal, diagonal, :] = (diagonal % 10 != 9).astype(float)[:, None]
    return AgreementMatrix(values, variables=tuple(f'V{k}' for k in range(n_var)))


def exact_block(seed) -> AgreementMatrix:
    """
    50 x 50 x 3 block with m = 0.9, u = 0.2 and g = 0.05 on every variable: per layer 45 agreeing,
    3 disagreeing and 2 missing diagonal cells; 490 agreeing, 123 missing and 1837 disagreeing others.
    """
    rng = np.random.default_rng(seed)
    n = 50
    diagonal = np.eye(n, dtype=bool)
    values = np.zeros((n, n, 3))
    for layer in range(3):
        diag = rng.permutation([1.0] * 45 + [0.0] * 3 + [NaN] * 2)
        off = rng.permutation([1.0] * 490 + [NaN] * 123 + [0.0] * 1837)
        cells = np.zeros((n, n))
        cells[diagonal] = diag
        cells[~diagonal] = off
        values[:, :, layer] = cells
    return AgreementMatrix(values, variables=('A', 'B', 'C'))


class ApplyStepTest(SimpleTestCase):
    def test_missing_diagonal_is_a_no_op(self):
        values = np.array([[[NaN], [1.0], [0.0]]])
        before = values.copy()
        visited = apply_step(values, 0, 0, 0.0, 0.98, 1.0, 1.0, 1.0, 1.0, 1.0, np.random.default_rng(0))
        self.assertFalse(visited)
        np.testing.assert_array_equal(values, before)

    def test_agreeing_diagonal_forced_to_flip(self):
        values = np.array([[[1.0], [1.0], [0.99], [NaN]]])
        apply_step(values, 0, 0, 0.5, 0.98, 1.0, 1.0, 0.0, 0.0, 1.0, np.random.default_rng(0))
        self.assertEqual(values[0, 0, 0], 0.0)
        self.assertEqual(values[0, 1, 0], 0.0)
        self.assertAlmostEqual(values[0, 2, 0], 0.01)
        self.assertTrue(np.isnan(values[0, 3, 0]))

    def test_agreeing_diagonal_kept(self):
        values = np.array([[[1.0], [1.0], [0.0]]])
        visited = apply_step(values, 0, 0, 0.5, 0.98, 0.1, 1.0, 1.0, 1.0, 1.0, np.random.default_rng(0))
        self.assertFalse(visited)
        self.assertEqual(values[0, :, 0].tolist(), [1.0, 1.0, 0.0])

    def test_disagree_to_disagree_flips_every_disagreeing_cell(self):
        values = np.array([[[0.0], [1.0], [0.0], [0.3]]])
        apply_step(values, 0, 0, 0.5, 0.98, 0.1, 0.0, 0.0, 0.0, 1.0, np.random.default_rng(0))
        self.assertEqual(values[0, 0, 0], 0.0)
        self.assertEqual(values[0, 1, 0], 1.0)
        self.assertEqual(values[0, 2, 0], 1.0)
        self.assertAlmostEqual(values[0, 3, 0], 0.7)

    def test_other_rows_untouched(self):
        values = np.ones((2, 2, 1))
        apply_step(values, 0, 0, 0.0, 0.98, 1.0, 1.0, 1.0, 1.0, 1.0, np.random.default_rng(0))
        self.assertEqual(values[1].tolist(), [[1.0], [1.0]])

    def test_kernel_step_leaves_input_alone(self):
        state = AgreementMatrix(np.ones((2, 2, 1)), variables=('A',))
        stepped = kernel_step(state, one_variable_params(p1=1.0), Threshold(('A',), [1.0]),
                              np.random.default_rng(3))
        self.assertEqual(state.values.sum(), 4.0)
        self.assertLess(stepped.values.sum(), 4.0)

    def test_agree_to_disagree_leaves_no_agreeing_row(self):
        matrix = random_block(20, 20, 4, seed=11)
        values = matrix.working_copy()
        # mixed similarity values, not just 0/1
        values[~np.isnan(values)] = np.random.default_rng(5).random(np.count_nonzero(~np.isnan(values)))
        theta = [0.9, 0.75, 0.6, 1.0]
        rng = np.random.default_rng(2024)
        for _ in range(100000):
            i, l, u = int(rng.integers(20)), int(rng.integers(4)), float(rng.random())
            row_before = values[i, :, l].copy()
            apply_step(values, i, l, u, theta[l], 0.3, 0.6, 0.2, 0.4, 1.0, rng)
            with np.errstate(invalid='ignore'):
                if row_before[i] >= theta[l] and values[i, i, l] < theta[l]:
                    was_agreeing = row_before >= theta[l]
                    was_agreeing[i] = False
                    self.assertFalse((values[i, :, l][was_agreeing] >= theta[l]).any())
        np.testing.assert_array_equal(np.isnan(values), np.isnan(matrix.values))
        present = values[~np.isnan(values)]
        self.assertTrue(((present >= 0.0) & (present <= 1.0)).all())


class ChainTest(SimpleTestCase):
    def setUp(self):
        self.initial = random_block(10, 15, 2, seed=1)
        self.theta = Threshold(self.initial.variables, [1.0, 1.0])
        self.params = transition_params(estimate_block_profile(self.initial, self.theta))

    def test_thinning(self):
        samples = simulate_chain(self.initial, self.params, self.theta, ChainConfig(n_samples=3, thinning=2, seed=4))
        self.assertEqual([sample.step for sample in samples], [2, 4, 6])
        self.assertEqual([sample.index for sample in samples], [1, 2, 3])
        self.assertEqual(samples[0].distance, 0.0)

    def test_same_seed_same_samples(self):
        cfg = ChainConfig(n_samples=5, thinning=50, seed=99)
        first = simulate_chain(self.initial, self.params, self.theta, cfg)
        second = simulate_chain(self.initial, self.params, self.theta, cfg)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.matrix.values, b.matrix.values)
            self.assertEqual(a.distance, b.distance)

    def test_different_seed(self):
        a = list(iter_chain(self.initial, self.params, self.theta, ChainConfig(n_samples=1, thinning=500, seed=1)))
        b = list(iter_chain(self.initial, self.params, self.theta, ChainConfig(n_samples=1, thinning=500, seed=2)))
        self.assertGreater(distance(a[0].matrix, b[0].matrix), 0)

    def test_initial_state_kept(self):
        chain = AgreementChain(self.initial, self.params, self.theta, seed=0)
        chain.advance(200)
        self.assertEqual(chain.steps, 200)
        self.assertGreater(distance(chain.snapshot(), self.initial), 0)
        self.assertEqual(self.initial.digest(), random_block(10, 15, 2, seed=1).digest())

    def test_missing_cells_never_change(self):
        chain = AgreementChain(self.initial, self.params, self.theta, seed=3)
        chain.advance(1000)
        np.testing.assert_array_equal(np.isnan(chain.state), np.isnan(self.initial.values))

    def test_dimension_checks(self):
        with self.assertRaises(DimensionMismatchError):
            AgreementChain(self.initial, one_variable_params(), Threshold(('A',), [1.0]))
        wide = AgreementMatrix(np.ones((3, 2, 1)), variables=('A',))
        with self.assertRaises(DimensionMismatchError):
            AgreementChain(wide, one_variable_params(), Threshold(('A',), [1.0]))

    def test_config_checks(self):
        with self.assertRaises(ConfigurationError):
            ChainConfig(n_samples=0)
        with self.assertRaises(ConfigurationError):
            ChainConfig(thinning=0)
        self.assertEqual(ChainConfig(n_samples=4, thinning=25).total_steps, 100)


class StationarityTest(SimpleTestCase):
    def test_marginals_hold_over_a_long_run(self):
        initial = exact_block(seed=8)
        theta = Threshold(initial.variables, [0.98] * 3)
        mug = estimate_block_profile(initial, theta)
        np.testing.assert_allclose(mug.m, 0.9)
        np.testing.assert_allclose(mug.u, 0.2)
        np.testing.assert_allclose(mug.g, 0.05)

        chain = AgreementChain(initial, transition_params(mug), theta, seed=20240501)
        diagonal = np.eye(50, dtype=bool)
        diag_share, off_share, rounds = np.zeros(3), np.zeros(3), 2000
        for _ in range(rounds):
            chain.advance(100)
            with np.errstate(invalid='ignore'):
                agree = chain.state >= 0.98
            diag_share += agree[diagonal].sum(axis=0) / 50
            off_share += agree[~diagonal].sum(axis=0) / (50 * 49)
        np.testing.assert_allclose(diag_share / rounds, 0.9, atol=0.03)
        np.testing.assert_allclose(off_share / rounds, 0.2, atol=0.03)


class DistanceTest(SimpleTestCase):
    def test_distance(self):
        a = np.array([[[1.0, 0.0], [0.0, 1.0]], [[1.0, 1.0], [0.0, 0.0]]])
        self.assertEqual(distance(a, a.copy()), 0.0)
        self.assertEqual(distance(a, 1.0 - a), 1.0)
        b = a.copy()
        b[1, 1, 1] = 1.0
        self.assertEqual(distance(a, b), 0.125)

    def test_missing_cells_count_as_equal(self):
        a = np.array([[[NaN, 1.0]]])
        self.assertEqual(distance(a, a.copy()), 0.0)

    def test_shapes_must_match(self):
        with self.assertRaises(DimensionMismatchError):
            distance(np.zeros((1, 1, 1)), np.zeros((1, 2, 1)))


class BlockSeedTest(SimpleTestCase):
    def test_derived_seed(self):
        self.assertEqual(derive_block_seed(7, (10.0,)), derive_block_seed(7, (10.0,)))
        self.assertNotEqual(derive_block_seed(7, (10.0,)), derive_block_seed(7, (11.0,)))
        self.assertNotEqual(derive_block_seed(7, (10.0,)), derive_block_seed(8, (10.0,)))


class SnapshotTest(SimpleTestCase):
    def test_round_trip(self):
        initial = random_block(6, 8, 2, seed=5)
        theta = Threshold(initial.variables, [1.0, 1.0])
        params = transition_params(estimate_block_profile(initial, theta))
        samples = simulate_chain(initial, params, theta, ChainConfig(n_samples=4, thinning=10, seed=1))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'snapshots.npz')
            save_snapshots(path, samples)
            loaded = load_snapshots(path, initial)
            with self.assertRaises(DimensionMismatchError):
                load_snapshots(path, random_block(6, 9, 2, seed=5))
        self.assertEqual([s.step for s in loaded], [10, 20, 30, 40])
        for a, b in zip(samples, loaded):
            self.assertEqual(a.matrix.digest(), b.matrix.digest())
            self.assertEqual(a.distance, b.distance)
            self.assertEqual(a.distance_to_initial, b.distance_to_initial)

    def test_original_mode_survives(self):
        initial = AgreementMatrix(np.eye(2)[:, :, None], mode=LinkageMode.ORIGINAL, variables=('A',))
        samples = simulate_chain(initial, one_variable_params(), Threshold(('A',), [1.0]),
                                 ChainConfig(n_samples=2, thinning=3, seed=0, mode=LinkageMode.ORIGINAL))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'snapshots.npz')
            save_snapshots(path, samples)
            loaded = load_snapshots(path, initial)
        self.assertTrue(all(s.matrix.mode == LinkageMode.ORIGINAL for s in loaded))
