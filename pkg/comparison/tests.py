import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from comparison.data import Threshold, Block, BlockPartition
from comparison.utils import (similarity, similarity_layer, threshold, agrees, agreement_mask, disagreement_mask,
                              block_partition, build_agreement_matrix)
from records.data import VariableSpec, RecordTable, AlignedPair, LinkageMode
from records.errors import ConfigurationError, UndefinedAgreementError

BYEAR = VariableSpec('BYEAR', t_range=100, tolerance=2)


def make_pair(x_rows, y_rows, alignment) -> AlignedPair:
    def table(rows, prefix):
        frame = pd.DataFrame(rows, dtype=float)
        frame.insert(0, 'RECID', [f'{prefix}{k}' for k in range(len(rows))])
        return RecordTable(frame, id_field='RECID')
    return AlignedPair(table(x_rows, 'x'), table(y_rows, 'y'), alignment)


class SimilarityTest(SimpleTestCase):
    def test_similarity(self):
        self.assertAlmostEqual(similarity(1980, 1983, BYEAR), 0.97)
        self.assertEqual(similarity(1980, 1980, BYEAR), 1.0)

    def test_clamped_at_zero(self):
        self.assertEqual(similarity(0, 250, BYEAR), 0.0)

    def test_missing(self):
        self.assertTrue(np.isnan(similarity(1980, None, BYEAR)))
        self.assertTrue(np.isnan(similarity(np.nan, 1980, BYEAR)))

    def test_sentinel_is_missing(self):
        spec = VariableSpec('BDAY', t_range=364, missing_sentinel=-1)
        self.assertTrue(np.isnan(similarity(-1, 12, spec)))

    def test_original_mode_layer(self):
        layer = similarity_layer([1980, np.nan], [1983, 1980], BYEAR, LinkageMode.ORIGINAL)
        self.assertEqual(layer[0].tolist(), [0.0, 1.0])
        self.assertTrue(np.isnan(layer[1]).all())

    def test_extended_layer_matches_scalar(self):
        layer = similarity_layer([1980, 1950], [1983, 2000], BYEAR)
        for i, x in enumerate((1980, 1950)):
            for j, y in enumerate((1983, 2000)):
                self.assertAlmostEqual(layer[i, j], similarity(x, y, BYEAR))


class ThresholdTest(SimpleTestCase):
    def test_threshold(self):
        self.assertAlmostEqual(threshold(BYEAR), 0.98)
        self.assertEqual(threshold(VariableSpec('SEX', t_range=1)), 1.0)

    def test_tolerance_too_wide(self):
        with self.assertRaises(ConfigurationError):
            threshold(VariableSpec('BYEAR', t_range=100, tolerance=60))

    def test_original_mode_thresholds_are_one(self):
        theta = Threshold.from_specs([BYEAR], LinkageMode.ORIGINAL)
        self.assertEqual(theta['BYEAR'], 1.0)
        self.assertAlmostEqual(Threshold.from_specs([BYEAR])['BYEAR'], 0.98)

    def test_bounds(self):
        with self.assertRaises(ConfigurationError):
            Threshold(('A',), [0.5])


class AgreesTest(SimpleTestCase):
    def test_agrees(self):
        self.assertTrue(agrees(0.99, 0.98))
        self.assertFalse(agrees(0.97, 0.98))
        self.assertTrue(agrees(1.0, 1.0))

    def test_missing_raises(self):
        with self.assertRaises(UndefinedAgreementError):
            agrees(np.nan, 0.98)

    def test_masks_leave_missing_out(self):
        values = np.array([[[0.99], [0.5], [np.nan]]])
        theta = Threshold(('BYEAR',), [0.98])
        self.assertEqual(agreement_mask(values, theta)[0, :, 0].tolist(), [True, False, False])
        self.assertEqual(disagreement_mask(values, theta)[0, :, 0].tolist(), [False, True, False])


class BlockingTest(SimpleTestCase):
    def setUp(self):
        # X record 2 moved to SA1 30 but its true match lives in SA1 20
        self.pair = make_pair(
            x_rows=[{'SA1': 10, 'BYEAR': 1980}, {'SA1': 20, 'BYEAR': 1990}, {'SA1': 30, 'BYEAR': 1970}],
            y_rows=[{'SA1': 20, 'BYEAR': 1991}, {'SA1': 10, 'BYEAR': 1980}, {'SA1': 30, 'BYEAR': 1960},
                    {'SA1': 20, 'BYEAR': 1970}],
            alignment=[1, 0, 3],
        )

    def test_one_block_per_value(self):
        partition = block_partition(self.pair, ['SA1'])
        self.assertEqual([block.key for block in partition], [(10.0,), (20.0,), (30.0,)])
        self.assertEqual([block.label for block in partition], ['SA1=10', 'SA1=20', 'SA1=30'])

    def test_no_blocking_is_one_block(self):
        partition = block_partition(self.pair, [])
        self.assertEqual(len(partition), 1)
        block = partition.blocks[0]
        self.assertEqual(block.n_x, 3)
        self.assertEqual(block.y_indices.tolist(), [1, 0, 3, 2])

    def test_orphans(self):
        by_key = {block.key: block for block in block_partition(self.pair, ['SA1'])}
        self.assertEqual(by_key[(30.0,)].orphans.tolist(), [2])
        self.assertFalse(by_key[(30.0,)].is_assessable)
        self.assertEqual(by_key[(20.0,)].y_indices.tolist(), [0, 3])

    def test_missing_blocking_value(self):
        pair = make_pair([{'SA1': np.nan, 'BYEAR': 1980}], [{'SA1': 10, 'BYEAR': 1980}], [0])
        partition = block_partition(pair, ['SA1'])
        residual = [block for block in partition if block.residual]
        self.assertEqual(len(residual), 1)
        self.assertEqual(residual[0].key, ('x', 'x0'))
        self.assertEqual(partition.assessable, [])

    def test_unknown_variable(self):
        with self.assertRaises(ConfigurationError):
            block_partition(self.pair, ['MB'])

    def test_slugs_keep_fractions_and_signs_apart(self):
        values = [1.5, 15, -1, 1]
        pair = make_pair([{'SA1': v} for v in values], [{'SA1': v} for v in values], [0, 1, 2, 3])
        partition = block_partition(pair, ['SA1'])
        self.assertEqual([block.slug for block in partition], ['sa1-m1', 'sa1-1', 'sa1-1p5', 'sa1-15'])
        self.assertEqual(partition.blocks[2].label, 'SA1=1.5')

    def test_shared_output_directory(self):
        first = Block(key=(1.0,), x_indices=np.array([0]), y_indices=np.array([0]), variables=('sa1',))
        second = Block(key=(1.0,), x_indices=np.array([1]), y_indices=np.array([1]), variables=('SA1',))
        with self.assertRaises(ConfigurationError):
            BlockPartition(('SA1',), (first, second))


class AgreementMatrixBuildTest(SimpleTestCase):
    def test_diagonal_holds_true_matches(self):
        pair = make_pair([{'BYEAR': 1980}, {'BYEAR': 1990}],
                         [{'BYEAR': 1991}, {'BYEAR': 1980}, {'BYEAR': np.nan}], [1, 0])
        block = block_partition(pair, []).blocks[0]
        matrix = build_agreement_matrix(pair, block, [BYEAR])
        self.assertEqual(matrix.dims, (2, 3, 1))
        self.assertEqual(matrix.values[0, 0, 0], 1.0)
        self.assertAlmostEqual(matrix.values[1, 1, 0], 0.99)
        self.assertTrue(np.isnan(matrix.values[:, 2, 0]).all())

    def test_original_mode(self):
        pair = make_pair([{'BYEAR': 1980}], [{'BYEAR': 1983}], [0])
        block = block_partition(pair, []).blocks[0]
        matrix = build_agreement_matrix(pair, block, [BYEAR], LinkageMode.ORIGINAL)
        self.assertEqual(matrix.values[0, 0, 0], 0.0)
        self.assertEqual(matrix.mode, LinkageMode.ORIGINAL)
