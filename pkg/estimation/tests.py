import itertools

import numpy as np
from django.test import SimpleTestCase

from comparison.data import Threshold
from estimation.utils import (estimate_mug, smoothing_epsilon, smooth_mug, transition_params,
                              estimate_block_profile)
from records.data import AgreementMatrix, MugProfile
from records.errors import EstimationError, InfeasibleMarginalsError

NaN = np.nan
EXACT = Threshold(('A',), [1.0])


def matrix_2x2(*cells) -> AgreementMatrix:
    return AgreementMatrix(np.array(cells, dtype=float).reshape(2, 2, 1), variables=('A',))


class EstimateMugTest(SimpleTestCase):
    def test_agreeing_diagonal(self):
        mug = estimate_mug(matrix_2x2(1, 0, 0, 1), EXACT)
        self.assertEqual(mug['A'], (1.0, 0.0, 0.0))

    def test_one_missing_cell(self):
        m, u, g = estimate_mug(matrix_2x2(1, NaN, 0, 1), EXACT)['A']
        self.assertEqual(g, 0.25)
        # both diagonal cells agree, but m is held to 1 - g
        self.assertEqual((m, u), (0.75, 0.0))

    def test_missing_diagonal_cell_is_not_agreement(self):
        mug = estimate_mug(matrix_2x2(NaN, 1, 0, 1), EXACT)
        m, u, g = mug['A']
        self.assertEqual((m, u, g), (0.5, 0.5, 0.25))

    def test_similarity_threshold(self):
        theta = Threshold(('A',), [0.98])
        mug = estimate_mug(matrix_2x2(0.99, 0.97, 0.985, 0.5), theta)
        self.assertEqual(mug['A'], (0.5, 0.5, 0.0))

    def test_all_missing(self):
        with self.assertRaises(EstimationError):
            estimate_mug(matrix_2x2(NaN, NaN, NaN, NaN), EXACT)

    def test_empty_block(self):
        with self.assertRaises(EstimationError):
            estimate_mug(AgreementMatrix(np.zeros((0, 3, 1)), variables=('A',)), EXACT)


class SmoothingTest(SimpleTestCase):
    def test_epsilon(self):
        self.assertEqual(smoothing_epsilon(2, 2), 0.25)
        self.assertEqual(smoothing_epsilon(3, 5), 1 / 24)
        with self.assertRaises(EstimationError):
            smoothing_epsilon(1, 1)

    def test_edges_pulled_in(self):
        smoothed = smooth_mug(MugProfile(('A',), [1.0], [0.0], [0.0]), 2, 2)
        self.assertEqual(smoothed['A'], (0.75, 0.25, 0.0))

    def test_interior_untouched(self):
        mug = MugProfile(('A',), [0.9], [0.2], [0.05])
        self.assertEqual(smooth_mug(mug, 50, 50)['A'], (0.9, 0.2, 0.05))

    def test_overrides_take_precedence(self):
        matrix = matrix_2x2(1, 0, 0, 1)
        profile = estimate_block_profile(matrix, EXACT, {'A': {'m': 0.6, 'u': 0.3, 'g': 0.0}})
        self.assertEqual(profile['A'], (0.6, 0.3, 0.0))


class TransitionParamsTest(SimpleTestCase):
    def params(self, m, u, g):
        return transition_params(MugProfile(('A',), [m], [u], [g]))

    def test_low_u_branch(self):
        params = self.params(0.9, 0.2, 0.05)
        self.assertAlmostEqual(params.p1[0], 0.055556, places=6)
        self.assertEqual(params.p2[0], 1.0)
        self.assertAlmostEqual(params.q1[0], 0.266667, places=6)
        self.assertEqual(params.q1[0], params.q2[0])
        self.assertEqual(params.q3[0], 1.0)

    def test_high_u_branch(self):
        params = self.params(0.9, 0.6, 0.0)
        self.assertAlmostEqual(params.p1[0], 0.055556, places=6)
        self.assertAlmostEqual(params.p2[0], 0.5)
        self.assertEqual(params.q1[0], 1.0)

    def test_balanced(self):
        params = self.params(0.5, 0.25, 0.0)
        self.assertAlmostEqual(params.p1[0], 1.0)
        self.assertEqual(params.p2[0], 1.0)
        self.assertAlmostEqual(params.q1[0], 1 / 3)

    def test_diagonal_kept_stationary(self):
        checked = 0
        for m, u, g in itertools.product(np.linspace(0.55, 0.98, 20), np.linspace(0.02, 0.9, 30),
                                         (0.0, 0.01, 0.03, 0.05)):
            if m + g >= 1 or u + g >= 1:
                continue
            try:
                params = self.params(m, u, g)
            except InfeasibleMarginalsError:
                continue
            p1, p2 = params.p1[0], params.p2[0]
            if u <= 0.5 * (1 - g):
                self.assertEqual(p2, 1.0, msg=f'm={m} u={u} g={g}')
            self.assertLessEqual(abs(p2 / (p1 + p2) - m / (1 - g)), 1e-12, msg=f'm={m} u={u} g={g}')
            checked += 1
        self.assertGreaterEqual(checked, 1000)

    def test_infeasible(self):
        with self.assertRaises(InfeasibleMarginalsError):
            self.params(0.0, 0.2, 0.0)
        # p1 comes out above 1
        with self.assertRaises(InfeasibleMarginalsError):
            self.params(0.3, 0.2, 0.0)
