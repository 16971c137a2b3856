import os
import tempfile
from dataclasses import replace

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from records.errors import ConfigurationError, PlanError
from records.utils import EXIT_CONFIG
from synthgen.data import GeneratorConfig, PerturbationPlan, MAJORITY_COB_CODE
from synthgen.utils import generate_population, subsample, perturb, apply_plan, generate_pair, run_generate

IDENTITY = PerturbationPlan.identity()


class PopulationTest(SimpleTestCase):
    def test_small_population(self):
        cfg = GeneratorConfig(n_y=4, n_x=2, seed=1)
        population = generate_population(cfg)
        self.assertEqual(list(population.entity_ids), ['1', '2', '3', '4'])
        sa1, mb = population.values('SA1'), population.values('MB')
        np.testing.assert_array_equal(np.floor(mb / cfg.mb_factor), sa1)
        self.assertTrue(((mb % cfg.mb_factor >= 1) & (mb % cfg.mb_factor <= cfg.mb_per_sa1)).all())

    def test_value_spaces(self):
        cfg = GeneratorConfig(n_y=2000, n_x=10, seed=2)
        population = generate_population(cfg)
        self.assertEqual(cfg.sa1_count, 5)
        self.assertTrue(set(population.values('SA1')) <= set(cfg.sa1_codes))
        self.assertTrue(set(population.values('SEX')) <= {1.0, 2.0})
        byear = population.values('BYEAR')
        self.assertTrue(((byear >= 1920) & (byear <= 2005)).all())
        self.assertTrue(set(population.values('EYE')) <= {1.0, 2.0, 3.0, 4.0, 5.0})
        majority = (population.values('COB') == MAJORITY_COB_CODE).mean()
        self.assertAlmostEqual(majority, 0.75, delta=0.05)

    def test_same_seed_same_population(self):
        cfg = GeneratorConfig(n_y=300, n_x=10, seed=9)
        pd.testing.assert_frame_equal(generate_population(cfg).frame, generate_population(cfg).frame)

    def test_sample_larger_than_population(self):
        with self.assertRaises(ConfigurationError):
            GeneratorConfig(n_y=10, n_x=11)
        with self.assertRaises(ConfigurationError):
            subsample(generate_population(GeneratorConfig(n_y=5, n_x=5)), 6, seed=0)

    def test_subsample_keeps_ids(self):
        population = generate_population(GeneratorConfig(n_y=100, n_x=10, seed=3))
        pair = subsample(population, 10, seed=3)
        np.testing.assert_array_equal(pair.file_x.entity_ids, population.entity_ids[pair.alignment])
        self.assertEqual(len(set(pair.alignment.tolist())), 10)


class PerturbationTest(SimpleTestCase):
    def setUp(self):
        self.cfg = GeneratorConfig(n_y=300, n_x=300, n_sa1=3, seed=5)
        self.population = generate_population(self.cfg)

    def test_identity_plan_changes_nothing(self):
        out = perturb(self.population, IDENTITY, seed=1, cfg=self.cfg)
        pd.testing.assert_frame_equal(out.frame, self.population.frame)

    def test_sex_flip(self):
        out = perturb(self.population, replace(IDENTITY, sex_flip_rate=1.0), seed=1, cfg=self.cfg)
        np.testing.assert_array_equal(out.values('SEX'), 3 - self.population.values('SEX'))
        np.testing.assert_array_equal(out.values('BYEAR'), self.population.values('BYEAR'))

    def test_adjacent_sa1_carries_meshblock(self):
        cfg = GeneratorConfig(n_y=30, n_x=30, n_sa1=2, seed=4)
        population = generate_population(cfg)
        out = perturb(population, replace(IDENTITY, sa1_adjacent_rate=1.0), seed=1, cfg=cfg)
        # two SA1s: every record moves to the other one
        np.testing.assert_array_equal(out.values('SA1'), 2 * cfg.sa1_base + 1 - population.values('SA1'))
        np.testing.assert_array_equal(np.floor(out.values('MB') / cfg.mb_factor), out.values('SA1'))
        np.testing.assert_array_equal(out.values('MB') % cfg.mb_factor, population.values('MB') % cfg.mb_factor)

    def test_byear_shifts_stay_within_two(self):
        plan = replace(IDENTITY, byear_minus2_rate=0.25, byear_plus2_rate=0.25, byear_minus1_rate=0.25,
                       byear_plus1_rate=0.25)
        out = perturb(self.population, plan, seed=2, cfg=self.cfg)
        shift = out.values('BYEAR') - self.population.values('BYEAR')
        self.assertTrue(set(shift.tolist()) <= {-2.0, -1.0, 1.0, 2.0})

    def test_replacements_differ(self):
        plan = replace(IDENTITY, bday_altered_rate=1.0, eye_replace_rate=1.0)
        out = perturb(self.population, plan, seed=3, cfg=self.cfg)
        self.assertTrue((out.values('BDAY') != self.population.values('BDAY')).all())
        self.assertTrue((out.values('EYE') != self.population.values('EYE')).all())

    def test_cob_recoded_within_region(self):
        plan = replace(IDENTITY, cob_recode_rate=1.0, cob_recode_majority_share=0.0)
        out = perturb(self.population, plan, seed=4, cfg=self.cfg)
        before, after = self.population.values('COB'), out.values('COB')
        other = before != MAJORITY_COB_CODE
        self.assertTrue((after[other] != before[other]).all())
        np.testing.assert_array_equal(after[other] // 100, before[other] // 100)
        np.testing.assert_array_equal(after[~other], before[~other])

    def test_ids_never_change(self):
        out = perturb(self.population, PerturbationPlan(), seed=6, cfg=self.cfg)
        np.testing.assert_array_equal(out.entity_ids, self.population.entity_ids)

    def test_one_sa1_cannot_move(self):
        cfg = GeneratorConfig(n_y=10, n_x=5, n_sa1=1)
        with self.assertRaises(PlanError):
            cfg.check_plan()
        with self.assertRaises(PlanError):
            generate_pair(cfg)
        cfg.check_plan(replace(PerturbationPlan(), sa1_adjacent_rate=0.0))

    def test_plan_checks(self):
        with self.assertRaises(PlanError):
            PerturbationPlan(sex_flip_rate=1.5)
        with self.assertRaises(PlanError):
            PerturbationPlan(eye_missing_rate=0.6, eye_replace_rate=0.6)
        with self.assertRaises(PlanError):
            PerturbationPlan.from_mapping({'hair_dye_rate': 0.1})
        with self.assertRaises(PlanError):
            GeneratorConfig(n_y=10, n_x=5, cob_codes=(1102, 1199, 2102)).check_plan()


class PerturbationCountsTest(SimpleTestCase):
    def test_counts_at_full_scale(self):
        n = 50_000
        cfg = GeneratorConfig(n_y=n, n_x=n, seed=31)
        frame = generate_population(cfg).frame.copy()
        majority_share = float((frame['COB'] == cfg.cob_majority_code).mean())
        plan = PerturbationPlan()
        counts = apply_plan(frame, plan, np.random.default_rng(77), cfg)

        rates = {
            'sa1_adjacent': (n, plan.sa1_adjacent_rate),
            'mb_within_sa1': (n, plan.mb_within_sa1_rate),
            'bday_missing': (n, plan.bday_missing_rate),
            'bday_altered': (n, plan.bday_altered_rate),
            'byear_minus2': (n, plan.byear_minus2_rate),
            'byear_plus2': (n, plan.byear_plus2_rate),
            'byear_minus1': (n, plan.byear_minus1_rate),
            'byear_plus1': (n, plan.byear_plus1_rate),
            'sex_flip': (n, plan.sex_flip_rate),
            'eye_missing': (n, plan.eye_missing_rate),
            'eye_replace': (n, plan.eye_replace_rate),
            'cob_missing_majority': (n * majority_share, plan.cob_missing_majority_rate),
            'cob_missing_other': (n * (1 - majority_share), plan.cob_missing_other_rate),
            'cob_recode_majority': (n * (1 - majority_share), plan.cob_recode_rate / 2),
            'cob_recode_region': (n * (1 - majority_share), plan.cob_recode_rate / 2),
        }
        expected = plan.expected_counts(n, majority_share)
        self.assertEqual(set(counts), set(expected))
        self.assertAlmostEqual(expected['sex_flip'], 50)
        self.assertAlmostEqual(expected['bday_missing'], 4000)
        for name, (trials, p) in rates.items():
            sigma = np.sqrt(trials * p * (1 - p))
            self.assertAlmostEqual(counts[name], expected[name], delta=4 * sigma, msg=name)


class GenerateTest(SimpleTestCase):
    def test_generate_pair(self):
        pair = generate_pair(GeneratorConfig(n_y=1000, n_x=50, seed=8))
        self.assertEqual((len(pair.file_x), len(pair.file_y)), (50, 1000))
        np.testing.assert_array_equal(pair.file_x.entity_ids, pair.file_y.entity_ids[pair.alignment])

    def test_run_generate_writes_three_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            paths = run_generate(GeneratorConfig(n_y=1000, n_x=10, seed=8), tmp)
            self.assertEqual(sorted(os.path.basename(p) for p in paths.values()), ['X.csv', 'Y.csv', 'alignment.csv'])
            alignment = pd.read_csv(paths['alignment'], dtype=str)
            x = pd.read_csv(paths['X'], dtype={'RECID': str})
            self.assertEqual(list(alignment.columns), ['x_entity_id', 'y_entity_id'])
            self.assertEqual(alignment['x_entity_id'].tolist(), x['RECID'].tolist())
            self.assertEqual(list(x.columns), ['RECID', 'SA1', 'MB', 'BDAY', 'BYEAR', 'SEX', 'EYE', 'COB'])

    def test_generate_command(self):
        with tempfile.TemporaryDirectory() as tmp:
            call_command('generate', n_y=1000, n_x=20, seed=3, out=tmp)
            self.assertEqual(sorted(os.listdir(tmp)), ['X.csv', 'Y.csv', 'alignment.csv'])
            y = pd.read_csv(os.path.join(tmp, 'Y.csv'))
            self.assertEqual(len(y), 1000)

    def test_generate_command_config_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'run.yml')
            with open(path, 'w') as f:
                f.write('synthgen:\n  n_y: 120\n  n_x: 12\n  seed: 4\n  plan:\n    sex_flip_rate: 0.5\n')
            call_command('generate', config=path, out=os.path.join(tmp, 'data'), no_perturb=True)
            x = pd.read_csv(os.path.join(tmp, 'data', 'X.csv'))
            self.assertEqual(len(x), 12)

    def test_generate_command_rejects_large_sample(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CommandError) as ctx:
                call_command('generate', n_y=10, n_x=20, out=tmp)
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)
