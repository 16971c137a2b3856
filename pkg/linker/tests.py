import numpy as np
from django.test import SimpleTestCase

from comparison.data import Threshold
from linker.data import WeightMatrix
from linker.utils import field_weight, FieldWeights, composite_weights, greedy_link, link
from records.data import AgreementMatrix, MugProfile
from records.errors import WeightDomainError, ConfigurationError

LN4 = np.log(4)


def extract_max(w: np.ndarray, cutoff: float) -> set[tuple[int, int]]:
    """ Reference linker: take the heaviest remaining pair, strike its row and column, repeat. """
    w = w.astype(float).copy()
    links = set()
    while w.size and np.isfinite(w).any():
        best = w.max()
        if not best > cutoff:
            break
        # argwhere is row-major, so the first hit is the smallest (i, j)
        i, j = np.argwhere(w == best)[0]
        links.add((int(i), int(j)))
        w[i, :] = -np.inf
        w[:, j] = -np.inf
    return links


class FieldWeightTest(SimpleTestCase):
    def test_agree_and_disagree(self):
        self.assertAlmostEqual(field_weight(1.0, 1.0, 0.8, 0.2, 0.0), 1.386294, places=6)
        self.assertAlmostEqual(field_weight(0.0, 1.0, 0.8, 0.2, 0.0), -1.386294, places=6)
        self.assertAlmostEqual(field_weight(0.99, 0.98, 0.8, 0.2, 0.0), LN4)

    def test_missing_adds_nothing(self):
        self.assertEqual(field_weight(np.nan, 1.0, 0.8, 0.2, 0.1), 0.0)

    def test_domain(self):
        with self.assertRaises(WeightDomainError):
            field_weight(1.0, 1.0, 0.8, 0.0, 0.0)
        with self.assertRaises(WeightDomainError):
            field_weight(1.0, 1.0, 0.9, 0.2, 0.1)

    def test_from_profile(self):
        weights = FieldWeights.from_profile(MugProfile(('A', 'B'), [0.8, 0.9], [0.2, 0.1], [0.0, 0.0]))
        np.testing.assert_allclose(weights.agree, [LN4, np.log(9)])
        np.testing.assert_allclose(weights.disagree, [-LN4, -np.log(9)])


class CompositeWeightTest(SimpleTestCase):
    def setUp(self):
        self.mug = MugProfile(('A', 'B', 'C'), [0.8] * 3, [0.2] * 3, [0.0] * 3)
        self.theta = Threshold(('A', 'B', 'C'), [1.0] * 3)

    def test_all_agree(self):
        matrix = AgreementMatrix(np.ones((1, 1, 3)), variables=('A', 'B', 'C'))
        self.assertAlmostEqual(composite_weights(matrix, self.theta, self.mug).values[0, 0], 3 * LN4)

    def test_agree_disagree_cancel(self):
        matrix = AgreementMatrix(np.array([[[1.0, 0.0, np.nan]]]), variables=('A', 'B', 'C'))
        self.assertAlmostEqual(composite_weights(matrix, self.theta, self.mug).values[0, 0], 0.0)

    def test_matches_field_weights(self):
        rng = np.random.default_rng(3)
        values = rng.random((4, 5, 3))
        values[rng.random(values.shape) < 0.2] = np.nan
        theta = Threshold(('A', 'B', 'C'), [0.9, 0.7, 0.6])
        weights = composite_weights(AgreementMatrix(values), theta, self.mug).values
        for i in range(4):
            for j in range(5):
                expected = sum(field_weight(values[i, j, l], theta.theta[l], 0.8, 0.2, 0.0) for l in range(3))
                self.assertAlmostEqual(weights[i, j], expected)

    def test_weight_matrix_is_finite(self):
        with self.assertRaises(ConfigurationError):
            WeightMatrix(np.array([[np.inf]]))


class GreedyLinkTest(SimpleTestCase):
    W = WeightMatrix(np.array([[3.0, 1.0], [2.0, 2.5]]))

    def test_links(self):
        self.assertEqual(greedy_link(self.W, 0.0).pairs, {(0, 0), (1, 1)})

    def test_cutoff(self):
        self.assertEqual(greedy_link(self.W, 2.6).pairs, {(0, 0)})
        self.assertEqual(len(greedy_link(self.W, 3.0)), 0)

    def test_cutoff_is_strict(self):
        self.assertEqual(greedy_link(WeightMatrix(np.array([[0.0, -1.0]])), 0.0).pairs, set())

    def test_ties_go_to_smallest_index(self):
        links = greedy_link(WeightMatrix(np.full((2, 2), 1.0)))
        self.assertEqual(links.pairs, {(0, 0), (1, 1)})
        self.assertEqual(links.x_index.tolist(), [0, 1])

    def test_more_y_than_x(self):
        links = greedy_link(WeightMatrix(np.array([[1.0, 5.0, 2.0]])))
        self.assertEqual(links.pairs, {(0, 1)})
        self.assertEqual(links.partners().tolist(), [1])

    def test_same_as_extract_max(self):
        rng = np.random.default_rng(17)
        for trial in range(200):
            n_x = int(rng.integers(1, 8))
            n_y = int(rng.integers(n_x, 12))
            # a coarse grid of values so ties come up
            w = rng.integers(-4, 6, size=(n_x, n_y)) / 2
            cutoff = float(rng.choice([0.0, 0.5, 1.0, -1.0]))
            self.assertEqual(greedy_link(WeightMatrix(w), cutoff).pairs, extract_max(w, cutoff),
                             msg=f'trial {trial}')

    def test_higher_cutoff_keeps_a_subset(self):
        rng = np.random.default_rng(5)
        w = WeightMatrix(rng.normal(size=(6, 9)))
        previous = greedy_link(w, -10.0).pairs
        for cutoff in np.linspace(-1, 2, 13):
            current = greedy_link(w, cutoff).pairs
            self.assertLessEqual(current, previous)
            self.assertTrue(all(w.values[i, j] > cutoff for i, j in current))
            previous = current

    def test_link(self):
        mug = MugProfile(('A',), [0.8], [0.2], [0.0])
        matrix = AgreementMatrix(np.array([[[1.0], [0.0]], [[1.0], [1.0]]]), variables=('A',))
        links = link(matrix, Threshold(('A',), [1.0]), mug)
        self.assertEqual(links.pairs, {(0, 0), (1, 1)})
