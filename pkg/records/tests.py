import os
import tempfile

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from records.data import (VariableSpec, RecordTable, AlignedPair, AgreementMatrix, MugProfile, TransitionParams,
                          LinkSet, LinkageMode, canonicalize_alignment)
from records.errors import (ConfigurationError, AlignmentError, InfeasibleMarginalsError, ReportIOError,
                            EstimationError)
from records.utils import ErrorLevel, ErrorRecord, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO, is_missing, as_plain_number


def make_table(ids, **columns) -> RecordTable:
    frame = pd.DataFrame({'RECID': [str(i) for i in ids], **{k: np.asarray(v, dtype=float) for k, v in columns.items()}})
    return RecordTable(frame, id_field='RECID')


class VariableSpecTest(SimpleTestCase):
    def test_tolerance_must_stay_below_half_range(self):
        VariableSpec('BYEAR', t_range=100, tolerance=49.9)
        with self.assertRaises(ConfigurationError):
            VariableSpec('BYEAR', t_range=100, tolerance=50)

    def test_range_must_be_positive(self):
        with self.assertRaises(ConfigurationError):
            VariableSpec('BYEAR', t_range=0)

    def test_with_tolerance(self):
        spec = VariableSpec('BYEAR', t_range=100).with_tolerance(2)
        self.assertEqual(spec.tolerance, 2)


class RecordTableTest(SimpleTestCase):
    def test_duplicate_ids_rejected(self):
        with self.assertRaises(ConfigurationError):
            make_table([1, 1], SEX=[1, 2])

    def test_csv_missing_token_and_sentinel(self):
        specs = [VariableSpec('BDAY', t_range=364, missing_sentinel=-1), VariableSpec('SEX', t_range=1)]
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'x.csv')
            with open(path, 'w') as f:
                f.write('RECID,BDAY,SEX\n007,12,1\n008,-1,\n')
            table = RecordTable.from_csv(path, specs, id_field='RECID', missing_token='')
        self.assertEqual(list(table.entity_ids), ['007', '008'])
        self.assertEqual(table.values('BDAY')[0], 12.0)
        self.assertTrue(np.isnan(table.values('BDAY')[1]))
        self.assertTrue(np.isnan(table.values('SEX')[1]))

    def test_undeclared_column(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'x.csv')
            with open(path, 'w') as f:
                f.write('RECID,SEX\n1,1\n')
            with self.assertRaises(ConfigurationError):
                RecordTable.from_csv(path, [VariableSpec('EYE', t_range=4)], id_field='RECID')

    def test_csv_round_trip_keeps_integers_and_missing(self):
        table = make_table([1, 2], SEX=[1, np.nan])
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'out.csv')
            table.to_csv(path, missing_token='')
            with open(path) as f:
                self.assertEqual(f.read().splitlines(), ['RECID,SEX', '1,1', '2,'])

    def test_values_are_read_only(self):
        table = make_table([1], SEX=[1])
        with self.assertRaises(ValueError):
            table.values('SEX')[0] = 2


class AlignmentTest(SimpleTestCase):
    def test_canonicalize_reorders_y(self):
        file_x = make_table(['e5', 'e2'], V=[5, 2])
        file_y = make_table(['e2', 'e9', 'e5'], V=[2, 9, 5])
        pair = canonicalize_alignment(AlignedPair.by_entity_id(file_x, file_y))
        self.assertEqual(list(pair.file_y.entity_ids), ['e5', 'e2', 'e9'])
        self.assertTrue(pair.is_canonical)

    def test_canonical_input_unchanged(self):
        file_x = make_table(['a', 'b'], V=[1, 2])
        file_y = make_table(['a', 'b', 'c'], V=[1, 2, 3])
        pair = canonicalize_alignment(AlignedPair.by_entity_id(file_x, file_y))
        self.assertEqual(list(pair.file_y.entity_ids), ['a', 'b', 'c'])

    def test_missing_true_match(self):
        file_x = make_table(['e7'], V=[1])
        file_y = make_table(['e2'], V=[1])
        with self.assertRaises(AlignmentError):
            AlignedPair.by_entity_id(file_x, file_y)

    def test_explicit_links(self):
        file_x = make_table(['x1', 'x2'], V=[1, 2])
        file_y = make_table(['y2', 'y1'], V=[2, 1])
        pair = AlignedPair.by_entity_id(file_x, file_y, {'x1': 'y1', 'x2': 'y2'})
        self.assertEqual(pair.alignment.tolist(), [1, 0])

    def test_shared_true_match_rejected(self):
        file_x = make_table(['a', 'b'], V=[1, 2])
        file_y = make_table(['a', 'b'], V=[1, 2])
        with self.assertRaises(AlignmentError):
            AlignedPair(file_x, file_y, [0, 0])


class AgreementMatrixTest(SimpleTestCase):
    def test_original_mode_is_binary(self):
        AgreementMatrix(np.array([[[1.0, np.nan]]]), mode=LinkageMode.ORIGINAL)
        with self.assertRaises(ConfigurationError):
            AgreementMatrix(np.array([[[0.5]]]), mode=LinkageMode.ORIGINAL)

    def test_values_within_unit_interval(self):
        with self.assertRaises(ConfigurationError):
            AgreementMatrix(np.array([[[1.2]]]))

    def test_read_only_and_copied(self):
        raw = np.ones((1, 2, 1))
        matrix = AgreementMatrix(raw)
        raw[0, 0, 0] = 0
        self.assertEqual(matrix.values[0, 0, 0], 1.0)
        with self.assertRaises(ValueError):
            matrix.values[0, 0, 0] = 0.5
        self.assertEqual(matrix.matched_mask.tolist(), [[True, False]])

    def test_digest_tracks_content(self):
        a = AgreementMatrix(np.ones((1, 1, 1)))
        b = AgreementMatrix(np.ones((1, 1, 1)))
        c = AgreementMatrix(np.zeros((1, 1, 1)))
        self.assertEqual(a.digest(), b.digest())
        self.assertNotEqual(a.digest(), c.digest())


class ProbabilityTablesTest(SimpleTestCase):
    def test_mug_sums_checked(self):
        with self.assertRaises(ConfigurationError):
            MugProfile(('A',), [0.8], [0.1], [0.3])

    def test_mug_overrides(self):
        mug = MugProfile(('A', 'B'), [0.9, 0.8], [0.1, 0.2], [0.0, 0.0])
        changed = mug.with_overrides({'B': {'m': 0.7, 'u': 0.3, 'g': 0.0}, 'Z': {'m': 1, 'u': 0, 'g': 0}})
        self.assertEqual(changed['A'], (0.9, 0.1, 0.0))
        self.assertEqual(changed['B'], (0.7, 0.3, 0.0))

    def test_mug_csv(self):
        mug = MugProfile(('A',), [0.9], [0.1], [0.05])
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'mug.csv')
            mug.to_csv(path)
            self.assertEqual(MugProfile.from_csv(path)['A'], (0.9, 0.1, 0.05))

    def test_q3_is_one(self):
        with self.assertRaises(ConfigurationError):
            TransitionParams(('A',), [0.1], [1.0], [0.2], [0.2], [0.5])


class LinkSetTest(SimpleTestCase):
    def test_one_to_one(self):
        with self.assertRaises(ConfigurationError):
            LinkSet(3, [0, 1], [2, 2], [1.0, 1.0])

    def test_weights_above_cutoff(self):
        with self.assertRaises(ConfigurationError):
            LinkSet(2, [0], [0], [0.0], cutoff=0.0)

    def test_partners_and_unlinked(self):
        links = LinkSet(3, [2, 0], [1, 0], [3.0, 1.0])
        self.assertEqual(links.partners().tolist(), [0, -1, 1])
        self.assertEqual(links.unlinked_x.tolist(), [1])
        self.assertEqual(links.pairs, {(0, 0), (2, 1)})
        frame = links.to_frame(['a', 'b', 'c'], ['y', 'z'])
        self.assertEqual(frame['x_entity_id'].tolist(), ['c', 'a'])


class ErrorsTest(SimpleTestCase):
    def test_exit_codes(self):
        self.assertEqual(ConfigurationError('x').exit_code, EXIT_CONFIG)
        self.assertEqual(InfeasibleMarginalsError('x').exit_code, EXIT_INFEASIBLE)
        self.assertEqual(ReportIOError('x').exit_code, EXIT_IO)

    def test_error_response(self):
        record = EstimationError('no matched pairs').error_response
        self.assertEqual(record.level, ErrorLevel.EMPTY)
        self.assertEqual(record.as_dict(), {'status': 'EMPTY', 'message': 'no matched pairs'})
        self.assertEqual(ErrorRecord(ErrorLevel.OK).as_dict(), {'status': 'OK', 'message': ''})

    def test_helpers(self):
        self.assertTrue(is_missing(None))
        self.assertTrue(is_missing(np.nan))
        self.assertFalse(is_missing('abc'))
        self.assertEqual(as_plain_number(3.0), 3)
        self.assertEqual(as_plain_number(3.5), 3.5)
