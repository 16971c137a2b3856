import os
import tempfile

import numpy as np
import pandas as pd
import yaml
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from assessment.config import RunConfig, build_run_config, load_run_config
from assessment.data import AccuracyReport, AccuracyTally, BlockResult
from assessment.models import AssessmentRun, BlockAssessment
from assessment.pipeline import (run_pipeline, run_assess, run_compare, comparison_table, load_pair, prepare_tasks,
                                 assess_block)
from assessment.utils import relink_accuracy, summarize
from records.data import LinkSet, VariableSpec, LinkageMode
from records.errors import AssessmentError, ConfigurationError, ReportIOError
from records.utils import ErrorLevel, ErrorRecord, EXIT_CONFIG, EXIT_IO

VARIABLES = [
    {'name': 'SA1', 't_range': 1000, 'blocking': True},
    {'name': 'MB', 't_range': 1000000},
    {'name': 'BDAY', 't_range': 364, 'tolerance': 1},
    {'name': 'BYEAR', 't_range': 85, 'tolerance': 2},
    {'name': 'SEX', 't_range': 1},
    {'name': 'EYE', 't_range': 4},
    {'name': 'COB', 't_range': 8124},
]


def run_document(**changes) -> dict:
    """ A small generated run: 2000 population records, 250 sampled, five SA1 blocks of which two are assessed. """
    document = {
        'synthgen': {'n_y': 2000, 'n_x': 250, 'seed': 5},
        'variables': VARIABLES,
        'samples': 12,
        'thinning': 100,
        'seed': 11,
        'max_blocks': 2,
    }
    document.update(changes)
    return document


def read_tree(root: str) -> dict[str, bytes]:
    files = {}
    for folder, _, names in os.walk(root):
        for name in names:
            path = os.path.join(folder, name)
            with open(path, 'rb') as f:
                files[os.path.relpath(path, root)] = f.read()
    return files


def links(n_x, pairs) -> LinkSet:
    pairs = list(pairs)
    return LinkSet(n_x, [i for i, _ in pairs], [j for _, j in pairs], [1.0] * len(pairs))


class AccuracyTest(SimpleTestCase):
    def test_identical_samples_are_all_correct(self):
        observed = links(3, [(0, 0), (1, 1), (2, 2)])
        report = relink_accuracy(observed, [observed] * 4)
        self.assertEqual(report.per_record.tolist(), [1.0, 1.0, 1.0])
        self.assertEqual(report.per_simulation.tolist(), [1.0] * 4)
        self.assertEqual(report.grand_mean, 1.0)

    def test_proportion_of_a_sample(self):
        by_record = np.array([1] * 57 + [0] * 2)
        report = AccuracyReport(by_record, [57])
        self.assertAlmostEqual(report.per_simulation[0], 0.966102, places=6)
        self.assertEqual(report.worst_record, 57)

    def test_unlinked_records(self):
        observed = links(3, [(0, 0), (2, 2)])
        tally = AccuracyTally(observed)
        tally.add(links(3, [(0, 0), (2, 2)]))
        tally.add(links(3, [(0, 0), (1, 1), (2, 2)]))
        tally.add(links(3, [(0, 2), (2, 0)]))
        report = tally.report()
        self.assertEqual(report.correct_by_record.tolist(), [2, 2, 2])
        self.assertEqual(report.correct_by_sample.tolist(), [3, 2, 1])
        self.assertEqual(report.n_unlinked_observed, 1)

    def test_grand_mean_identity(self):
        rng = np.random.default_rng(4)
        n_x, n_y = 9, 12
        observed = links(n_x, zip(range(n_x), rng.permutation(n_y)[:n_x]))
        simulated = []
        for _ in range(37):
            keep = rng.random(n_x) < 0.8
            ys = rng.permutation(n_y)[:n_x]
            simulated.append(links(n_x, [(i, int(ys[i])) for i in range(n_x) if keep[i]]))
        report = relink_accuracy(observed, simulated)
        self.assertEqual(report.mean_per_record, report.mean_per_simulation)
        self.assertAlmostEqual(np.mean(report.per_record), np.mean(report.per_simulation))
        self.assertEqual(report.correct_by_record.sum(), report.correct_by_sample.sum())

    def test_no_samples(self):
        with self.assertRaises(AssessmentError):
            relink_accuracy(links(1, [(0, 0)]), [])

    def test_mismatched_sample(self):
        tally = AccuracyTally(links(2, [(0, 0)]))
        with self.assertRaises(AssessmentError):
            tally.add(links(3, [(0, 0)]))

    def test_report_checks(self):
        with self.assertRaises(AssessmentError):
            AccuracyReport([1, 1], [1])
        with self.assertRaises(AssessmentError):
            AccuracyReport([2], [2])
        with self.assertRaises(AssessmentError):
            AccuracyReport([], [])


class SummarizeTest(SimpleTestCase):
    def setUp(self):
        # 59 records, 2 samples, three records wrong once
        self.a = AccuracyReport([1] * 3 + [2] * 56, [59, 56])
        # 26 records, 2 samples, one record never right
        self.b = AccuracyReport([0] + [2] * 25, [25, 25])

    def test_weighted_by_records(self):
        aggregate = summarize([self.a, self.b])
        expected = (59 * self.a.grand_mean + 26 * self.b.grand_mean) / 85
        self.assertAlmostEqual(aggregate.grand_mean, expected)
        self.assertEqual(aggregate.n_records, 85)
        self.assertEqual(aggregate.blocks['n_x'].tolist(), [59, 26])

    def test_empty(self):
        with self.assertRaises(AssessmentError):
            summarize([])

    def test_blocks_without_a_report(self):
        skipped = BlockResult(key=(3.0,), label='SA1=3', slug='sa1-3', n_x=0, n_y=4, n_orphans=1,
                              status=ErrorRecord(ErrorLevel.WARNING, 'no matched pair'))
        with self.assertRaises(AssessmentError):
            summarize([skipped])
        aggregate = summarize([self.a, skipped])
        self.assertEqual(aggregate.n_excluded, 1)
        self.assertEqual(aggregate.grand_mean, self.a.grand_mean)
        self.assertEqual(aggregate.blocks['status'].tolist(), ['OK', 'WARNING'])


class RunConfigTest(SimpleTestCase):
    def test_defaults(self):
        cfg = build_run_config(run_document())
        self.assertEqual(cfg.blocking, ('SA1',))
        self.assertEqual([spec.name for spec in cfg.linking_specs], ['MB', 'BDAY', 'BYEAR', 'SEX', 'EYE', 'COB'])
        self.assertEqual(cfg.synthgen.seed, 5)
        self.assertEqual(cfg.method_variants[0].name, 'extended')

    def test_top_level_seed_reaches_generator(self):
        document = run_document(synthgen={'n_y': 2000, 'n_x': 250})
        self.assertEqual(build_run_config(document).synthgen.seed, 11)

    def test_schema_errors(self):
        for document in (
            {'variables': VARIABLES},
            run_document(input={'file_x': 'x.csv', 'file_y': 'y.csv'}),
            {'synthgen': {}},
            run_document(samples=0),
            run_document(mode='fuzzy'),
            run_document(colour='blue'),
            run_document(variables=[{'name': 'SEX'}]),
        ):
            with self.assertRaises(ConfigurationError, msg=str(document)):
                build_run_config(document)

    def test_semantic_errors(self):
        for document in (
            run_document(blocking=['HAIR']),
            run_document(blocking=[spec['name'] for spec in VARIABLES]),
            run_document(variables=VARIABLES + [{'name': 'SEX', 't_range': 1}]),
            run_document(variables=[{'name': 'BYEAR', 't_range': 100, 'tolerance': 60}]),
            run_document(mug={'HAIR': {'m': 0.9, 'u': 0.1, 'g': 0.0}}),
            run_document(variants=[{'name': 'a'}, {'name': 'a'}]),
            run_document(variants=[{'name': 'a', 'tolerances': {'BYEAR': 50}}]),
            run_document(variants=[{'name': 'exact', 'mode': 'original'}, {'name': 'wide'}]),
            run_document(mode='original', variants=[{'name': 'exact'}, {'name': 'wide', 'mode': 'extended'}]),
        ):
            with self.assertRaises(ConfigurationError, msg=str(document)):
                build_run_config(document)

    def test_overrides(self):
        cfg = build_run_config(run_document()).with_overrides(seed=3, blocking='SA1, SEX', samples=None)
        self.assertEqual(cfg.seed, 3)
        self.assertEqual(cfg.synthgen.seed, 3)
        self.assertEqual(cfg.blocking, ('SA1', 'SEX'))
        self.assertEqual(cfg.samples, 12)

    def test_digest(self):
        cfg = build_run_config(run_document())
        self.assertEqual(cfg.digest(), build_run_config(run_document()).digest())
        self.assertNotEqual(cfg.digest(), cfg.with_overrides(seed=12).digest())

    def test_variants(self):
        cfg = build_run_config(run_document(cutoff=1.5, variants=[
            {'name': 'wide', 'tolerances': {'BYEAR': 5}},
            {'name': 'exact', 'mode': 'original', 'cutoff': 0},
        ]))
        wide, exact = cfg.variants
        self.assertEqual([s.tolerance for s in cfg.variant_specs(wide) if s.name == 'BYEAR'], [5])
        self.assertEqual(cfg.variant_cutoff(wide), 1.5)
        self.assertEqual(cfg.variant_cutoff(exact), 0.0)
        self.assertEqual(cfg.variant_mode(exact), 'original')

    def test_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'run.yml')
            with open(path, 'w') as f:
                yaml.safe_dump({'input': {'file_x': 'data/X.csv', 'file_y': 'data/Y.csv'},
                                'variables': [{'name': 'SEX', 't_range': 1}], 'output': 'out'}, f)
            cfg = load_run_config(path)
            self.assertEqual(cfg.input.file_x, os.path.join(tmp, 'data', 'X.csv'))
            self.assertEqual(cfg.output, os.path.join(tmp, 'out'))
            with open(path, 'w') as f:
                f.write('variables: [unclosed\n')
            with self.assertRaises(ConfigurationError):
                load_run_config(path)
            with self.assertRaises(ReportIOError):
                load_run_config(os.path.join(tmp, 'missing.yml'))

    def test_mug_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'mug.csv')
            pd.DataFrame({'variable': ['SEX', 'EYE'], 'm': [0.99, 0.8], 'u': [0.5, 0.2], 'g': [0.0, 0.1]}) \
                .to_csv(path, index=False)
            cfg = build_run_config(run_document(mug_file=path, mug={'EYE': {'m': 0.7, 'u': 0.2, 'g': 0.1}}))
            overrides = cfg.mug_overrides()
        self.assertEqual(overrides['SEX'], {'m': 0.99, 'u': 0.5, 'g': 0.0})
        self.assertEqual(overrides['EYE'], {'m': 0.7, 'u': 0.2, 'g': 0.1})

    def test_exactly_one_source(self):
        with self.assertRaises(ConfigurationError):
            RunConfig(variables=(VariableSpec('SEX', t_range=1),))


class AssessRunTest(SimpleTestCase):
    def test_small_run(self):
        with tempfile.TemporaryDirectory() as tmp:
            cfg = build_run_config(run_document(output=os.path.join(tmp, 'out')))
            seen = []
            outcome = run_assess(cfg, progress=seen.append)
            summary = pd.read_csv(os.path.join(cfg.output, 'summary.csv'))
            block_dir = os.path.join(cfg.output, 'blocks', outcome.results[0].slug)
            written = sorted(os.listdir(block_dir))
            per_record = pd.read_csv(os.path.join(block_dir, 'per_record.csv'))
            distances = pd.read_csv(os.path.join(block_dir, 'distances.csv'))

        self.assertEqual(len(seen), 2)
        self.assertEqual(written, ['distances.csv', 'links.csv', 'mug.csv', 'params.csv', 'per_record.csv',
                                   'per_simulation.csv'])
        self.assertEqual(summary['block'].tolist()[-1], 'ALL')
        self.assertEqual(list(per_record.columns), ['x_entity_id', 'correct', 'proportion'])
        self.assertEqual(list(distances.columns), ['sample_index', 'step', 'distance_to_sample1', 'distance_to_A0'])
        self.assertEqual(distances['step'].tolist(), [100 * s for s in range(1, 13)])

        aggregate = outcome.primary
        block_means = summary['grand_mean'].tolist()[:-1]
        block_sizes = summary['n_x'].tolist()[:-1]
        self.assertAlmostEqual(aggregate.grand_mean, np.average(block_means, weights=block_sizes))
        self.assertAlmostEqual(summary['grand_mean'].tolist()[-1], aggregate.grand_mean)
        self.assertGreater(aggregate.grand_mean, 0.9)
        for result in outcome.results:
            report = result.variant().report
            self.assertEqual(report.mean_per_record, report.mean_per_simulation)
            self.assertEqual(report.n_samples, 12)
            series = result.distances['distance_to_sample1'].to_numpy()
            self.assertEqual(series[0], 0.0)
            self.assertTrue(((series >= 0) & (series <= 1)).all())
            self.assertGreater(series[-1], 0.0)

    def test_single_sample(self):
        with tempfile.TemporaryDirectory() as tmp:
            cfg = build_run_config(run_document(samples=1, max_blocks=1, output=tmp))
            outcome = run_assess(cfg)
            block_dir = os.path.join(tmp, 'blocks', outcome.results[0].slug)
            per_simulation = pd.read_csv(os.path.join(block_dir, 'per_simulation.csv'))
            distances = pd.read_csv(os.path.join(block_dir, 'distances.csv'))
        self.assertEqual(len(per_simulation), 1)
        self.assertEqual(distances['distance_to_sample1'].tolist(), [0.0])

    def test_same_seed_same_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            for name in ('first', 'second'):
                run_assess(build_run_config(run_document(output=os.path.join(tmp, name))))
            first, second = read_tree(os.path.join(tmp, 'first')), read_tree(os.path.join(tmp, 'second'))
        self.assertEqual(sorted(first), sorted(second))
        self.assertEqual(first, second)

    def test_worker_count_does_not_change_results(self):
        serial = run_pipeline(build_run_config(run_document(jobs=1)))
        parallel = run_pipeline(build_run_config(run_document(jobs=2)))
        self.assertEqual([r.snapshot_digest for r in serial.results], [r.snapshot_digest for r in parallel.results])
        self.assertEqual(serial.primary.grand_mean, parallel.primary.grand_mean)

    def test_stored_snapshots_are_reused(self):
        with tempfile.TemporaryDirectory() as tmp:
            first_dir = os.path.join(tmp, 'first')
            first = run_assess(build_run_config(run_document(output=first_dir, dump_snapshots=True)))
            self.assertTrue(os.path.exists(os.path.join(first_dir, 'blocks', first.results[0].slug,
                                                        'snapshots.npz')))
            reused = run_assess(build_run_config(run_document(output=os.path.join(tmp, 'second'),
                                                              snapshots_from=first_dir, seed=999)))
        self.assertEqual([r.snapshot_digest for r in first.results], [r.snapshot_digest for r in reused.results])
        self.assertEqual(first.primary.grand_mean, reused.primary.grand_mean)

    def test_reestimated_profiles(self):
        outcome = run_pipeline(build_run_config(run_document(reestimate_mug=True, max_blocks=1, samples=4)))
        report = outcome.results[0].variant().report
        self.assertEqual(report.mean_per_record, report.mean_per_simulation)

    def test_all_blocks_with_orphans_listed(self):
        outcome = run_pipeline(build_run_config(run_document(max_blocks=None, samples=2)))
        included = [r for r in outcome.results if r.included]
        self.assertEqual(len(included), 5)
        self.assertEqual(outcome.primary.n_records, sum(r.n_x for r in included))
        self.assertEqual(sum(r.n_x + r.n_orphans for r in outcome.results), 250)


class CompareRunTest(SimpleTestCase):
    def test_identical_variants(self):
        with tempfile.TemporaryDirectory() as tmp:
            cfg = build_run_config(run_document(output=tmp, variants=[{'name': 'one'}, {'name': 'two'}]))
            outcome = run_compare(cfg)
            comparison = pd.read_csv(os.path.join(tmp, 'comparison.csv'))
            snapshots = pd.read_csv(os.path.join(tmp, 'snapshots.csv'))
            self.assertTrue(os.path.exists(os.path.join(tmp, 'two', 'summary.csv')))
        self.assertEqual(comparison['two-one'].abs().max(), 0.0)
        self.assertEqual(comparison['block'].tolist()[-1], 'ALL')
        self.assertEqual(len(snapshots), 2)
        self.assertEqual(outcome.aggregates['one'].grand_mean, outcome.aggregates['two'].grand_mean)

    def test_modes_share_samples(self):
        cfg = build_run_config(run_document(max_blocks=1, variants=[
            {'name': 'extended'},
            {'name': 'original', 'mode': 'original', 'tolerances': {'BDAY': 0, 'BYEAR': 0}},
            {'name': 'no links', 'cutoff': float('inf')},
        ]))
        outcome = run_pipeline(cfg, cfg.variants)
        result = outcome.results[0]
        self.assertEqual([v.name for v in result.variants], ['extended', 'original', 'no links'])
        for variant in result.variants:
            self.assertEqual(variant.report.n_samples, 12)
        # nothing linked anywhere: every record keeps its (empty) observed link
        self.assertEqual(len(result.variant('no links').observed), 0)
        self.assertEqual(outcome.aggregates['no links'].grand_mean, 1.0)
        table = comparison_table(outcome)
        self.assertEqual(list(table.columns), ['block', 'extended', 'original', 'no links',
                                               'original-extended', 'no links-extended'])

    def test_extended_variant_reads_partial_agreement(self):
        cfg = build_run_config(run_document(max_blocks=None, samples=2, variants=[
            {'name': 'extended'},
            {'name': 'original', 'mode': 'original'},
        ]))
        tasks, _ = prepare_tasks(cfg, load_pair(cfg), cfg.variants)
        extended, original = tasks[0].methods
        self.assertAlmostEqual(extended.threshold['BYEAR'], 1 - 2 / 85)
        self.assertEqual(original.threshold['BYEAR'], 1.0)

        # matched pairs whose birth years are one or two apart agree only under the tolerance
        shifted = []
        for task in tasks:
            self.assertEqual(task.initial.mode, LinkageMode.EXTENDED)
            layer = task.initial.variables.index('BYEAR')
            diagonal = task.initial.values[np.arange(task.initial.n_x), np.arange(task.initial.n_x), layer]
            if ((diagonal >= extended.threshold['BYEAR']) & (diagonal < 1.0)).any():
                shifted.append(task)
        self.assertTrue(shifted)
        result, _ = assess_block(shifted[0])
        m_extended = result.variant('extended').mug['BYEAR'][0]
        m_original = result.variant('original').mug['BYEAR'][0]
        self.assertGreater(m_extended, m_original)

    def test_needs_two_variants(self):
        with self.assertRaises(ConfigurationError):
            run_compare(build_run_config(run_document(variants=[{'name': 'only'}])))


class DeskScaleTest(SimpleTestCase):
    """ 2000 population records, 500 sampled, blocked on SA1, default perturbation rates. """

    def desk_document(self, **changes) -> dict:
        document = run_document(synthgen={'n_y': 2000, 'n_x': 500}, max_blocks=None, samples=200, thinning=200,
                                cutoff=0)
        document.update(changes)
        return document

    def test_distances_level_off_and_links_hold(self):
        outcome = run_pipeline(build_run_config(self.desk_document()))
        included = [result for result in outcome.results if result.included]
        self.assertTrue(included)
        for result in included:
            series = result.distances['distance_to_sample1'].to_numpy()
            self.assertEqual(len(series), 200)
            self.assertLess(series[-50:].std(), 0.05, msg=result.label)
        self.assertGreaterEqual(outcome.primary.grand_mean, 0.95)

    def test_extended_at_least_as_accurate_as_original(self):
        wins = 0
        for seed in range(10):
            cfg = build_run_config(self.desk_document(seed=seed, samples=50, variants=[
                {'name': 'extended'},
                {'name': 'original', 'mode': 'original'},
            ]))
            outcome = run_pipeline(cfg, cfg.variants)
            if outcome.aggregates['extended'].grand_mean >= outcome.aggregates['original'].grand_mean:
                wins += 1
        self.assertGreaterEqual(wins, 8)


class CommandTest(SimpleTestCase):
    def write_config(self, folder, document) -> str:
        path = os.path.join(folder, 'run.yml')
        with open(path, 'w') as f:
            yaml.safe_dump(document, f)
        return path

    def test_assess(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = self.write_config(tmp, run_document(max_blocks=1))
            call_command('assess', config=path, out=os.path.join(tmp, 'out'), samples=3, thinning=20)
            summary = pd.read_csv(os.path.join(tmp, 'out', 'summary.csv'))
        self.assertEqual(summary['n_samples'].tolist()[0], 3)

    def test_compare(self):
        with tempfile.TemporaryDirectory() as tmp:
            document = run_document(max_blocks=1, samples=3, variants=[
                {'name': 'extended'}, {'name': 'original', 'mode': 'original'}])
            call_command('compare', config=self.write_config(tmp, document), out=os.path.join(tmp, 'out'))
            self.assertTrue(os.path.exists(os.path.join(tmp, 'out', 'comparison.csv')))
            self.assertTrue(os.path.exists(os.path.join(tmp, 'out', 'original', 'summary.csv')))

    def test_missing_key(self):
        with tempfile.TemporaryDirectory() as tmp:
            document = run_document()
            del document['variables']
            path = self.write_config(tmp, document)
            with self.assertRaises(CommandError) as ctx:
                call_command('assess', config=path, out=os.path.join(tmp, 'out'))
            self.assertFalse(os.path.exists(os.path.join(tmp, 'out')))
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

    def test_missing_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CommandError) as ctx:
                call_command('assess', config=os.path.join(tmp, 'nope.yml'))
        self.assertEqual(ctx.exception.returncode, EXIT_IO)


class RegistryTest(TestCase):
    def test_record(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'run.yml')
            with open(path, 'w') as f:
                yaml.safe_dump(run_document(samples=3), f)
            call_command('assess', config=path, out=os.path.join(tmp, 'out'), record=True)
        run = AssessmentRun.objects.get()
        self.assertEqual(run.command, AssessmentRun.Command.ASSESS)
        self.assertEqual(run.n_blocks, 2)
        self.assertEqual(run.blocking, 'SA1')
        self.assertEqual(len(run.config_digest), 64)
        rows = BlockAssessment.objects.filter(run=run)
        self.assertEqual(rows.count(), 2)
        self.assertTrue(all(row.status == 'OK' and len(row.snapshot_digest) == 64 for row in rows))
        self.assertAlmostEqual(run.grand_mean,
                               sum(row.grand_mean * row.n_x for row in rows) / sum(row.n_x for row in rows))
