"""
Synthetic population, subsample and perturbation.

Every linking field is drawn independently except COB, which holds the majority code for a fixed share
of the population and a code from the list otherwise.  The sampled file is then disturbed field by
field; each change selects its records independently.
"""
import logging
import os
from typing import Optional

import numpy as np
import pandas as pd

from records.data import RecordTable, AlignedPair
from records.errors import ConfigurationError, ReportIOError
from synthgen.data import GeneratorConfig, PerturbationPlan, POPULATION_FIELDS, SEX_VALUES, cob_region

logger = logging.getLogger(__name__)


def generate_population(cfg: GeneratorConfig) -> RecordTable:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    n = cfg.n_y
    sa1 = cfg.sa1_base + rng.integers(0, cfg.sa1_count, size=n)
    mb = sa1 * cfg.mb_factor + rng.integers(1, cfg.mb_per_sa1 + 1, size=n)
    bday = rng.integers(cfg.bday_range[0], cfg.bday_range[1] + 1, size=n)
    byear = rng.integers(cfg.byear_range[0], cfg.byear_range[1] + 1, size=n)
    sex = rng.choice(SEX_VALUES, size=n)
    eye = rng.integers(1, cfg.eye_categories + 1, size=n)

    majority = rng.random(n) < cfg.cob_majority_share
    cob = np.full(n, cfg.cob_majority_code, dtype=np.int64)
    n_other = int((~majority).sum())
    if n_other:
        cob[~majority] = rng.choice(cfg.cob_codes, size=n_other, p=cfg.cob_probabilities)

    frame = pd.DataFrame({cfg.id_field: np.arange(1, n + 1).astype(str)})
    for name, values in zip(POPULATION_FIELDS, (sa1, mb, bday, byear, sex, eye, cob)):
        frame[name] = values.astype(float)
    logger.debug('generated %d records in %d SA1s', n, cfg.sa1_count)
    return RecordTable(frame, id_field=cfg.id_field)


def subsample(file_y: RecordTable, n_x: int, seed: int) -> AlignedPair:
    """ A uniform sample without replacement of `n_x` Y records; the sampled records keep their ids. """
    if n_x > len(file_y):
        raise ConfigurationError(f'Cannot sample {n_x} records from a file of {len(file_y)}.')
    if n_x < 1:
        raise ConfigurationError('The sample needs at least one record.')
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    positions = np.sort(rng.choice(len(file_y), size=n_x, replace=False))
    return AlignedPair(file_y.take(positions), file_y, positions)


# Perturbation
# -*-*-*-*-*-*-
def _different(rng: np.random.Generator, values: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """ A uniformly chosen value of lo..hi other than each of `values`. """
    if not len(values):
        return np.asarray(values, dtype=float)
    span = hi - lo + 1
    shift = rng.integers(1, span, size=len(values))
    return lo + (values.astype(np.int64) - lo + shift) % span


def _categorical(rng: np.random.Generator, n: int, rates: list[float]) -> np.ndarray:
    """ Which of the mutually exclusive changes (0-based, -1 for none) each of `n` records gets. """
    draws = rng.random(n)
    edges = np.cumsum(rates)
    choice = np.searchsorted(edges, draws, side='right')
    return np.where(choice < len(rates), choice, -1)


def apply_plan(frame: pd.DataFrame, plan: PerturbationPlan, rng: np.random.Generator,
               cfg: GeneratorConfig) -> dict[str, int]:
    """ Disturbs `frame` in place and returns how many records each change hit. """
    counts = {}
    n = len(frame)
    factor = cfg.mb_factor

    # meshblock within its SA1
    hit = rng.random(n) < plan.mb_within_sa1_rate
    mb = frame['MB'].to_numpy(dtype=float)
    present = hit & ~np.isnan(mb)
    index = (mb[present] % factor).astype(np.int64)
    mb[present] = np.floor(mb[present] / factor) * factor + _different(rng, index, 1, cfg.mb_per_sa1)
    frame['MB'] = mb
    counts['mb_within_sa1'] = int(present.sum())

    # SA1 to an adjacent SA1, meshblock prefix follows
    hit = rng.random(n) < plan.sa1_adjacent_rate
    sa1 = frame['SA1'].to_numpy(dtype=float)
    present = hit & ~np.isnan(sa1)
    if present.any():
        first, last = cfg.sa1_codes[0], cfg.sa1_codes[-1]
        step = rng.choice((-1, 1), size=int(present.sum()))
        moved = sa1[present] + step
        moved = np.where(moved < first, sa1[present] + 1, moved)
        moved = np.where(moved > last, sa1[present] - 1, moved)
        sa1[present] = moved
        mb[present] = moved * factor + mb[present] % factor
        frame['SA1'], frame['MB'] = sa1, mb
    counts['sa1_adjacent'] = int(present.sum())

    # BDAY: missing, or another day
    change = _categorical(rng, n, [plan.bday_missing_rate, plan.bday_altered_rate])
    bday = frame['BDAY'].to_numpy(dtype=float)
    altered = (change == 1) & ~np.isnan(bday)
    bday[altered] = _different(rng, bday[altered], *cfg.bday_range)
    bday[change == 0] = np.nan
    frame['BDAY'] = bday
    counts['bday_missing'] = int((change == 0).sum())
    counts['bday_altered'] = int(altered.sum())

    # BYEAR shifts
    change = _categorical(rng, n, [plan.byear_minus2_rate, plan.byear_plus2_rate,
                                   plan.byear_minus1_rate, plan.byear_plus1_rate])
    # -1 (no change) picks the trailing 0
    shifts = np.array([-2, 2, -1, 1, 0])
    frame['BYEAR'] = frame['BYEAR'].to_numpy(dtype=float) + shifts[change]
    for k, name in enumerate(('byear_minus2', 'byear_plus2', 'byear_minus1', 'byear_plus1')):
        counts[name] = int((change == k).sum())

    # SEX reversed
    hit = rng.random(n) < plan.sex_flip_rate
    sex = frame['SEX'].to_numpy(dtype=float)
    flip = hit & ~np.isnan(sex)
    sex[flip] = sum(SEX_VALUES) - sex[flip]
    frame['SEX'] = sex
    counts['sex_flip'] = int(flip.sum())

    # EYE: missing, or a valid alternative
    change = _categorical(rng, n, [plan.eye_missing_rate, plan.eye_replace_rate])
    eye = frame['EYE'].to_numpy(dtype=float)
    replaced = (change == 1) & ~np.isnan(eye)
    eye[replaced] = _different(rng, eye[replaced], 1, cfg.eye_categories)
    eye[change == 0] = np.nan
    frame['EYE'] = eye
    counts['eye_missing'] = int((change == 0).sum())
    counts['eye_replace'] = int(replaced.sum())

    # COB: majority-coded records may go missing; the others go missing or get recoded
    cob = frame['COB'].to_numpy(dtype=float)
    majority = cob == cfg.cob_majority_code
    other = ~majority & ~np.isnan(cob)
    gone = majority & (rng.random(n) < plan.cob_missing_majority_rate)
    change = _categorical(rng, n, [plan.cob_missing_other_rate, plan.cob_recode_rate])
    to_majority = rng.random(n) < plan.cob_recode_majority_share
    recode = other & (change == 1)
    recode_major = recode & to_majority
    recode_region = recode & ~to_majority
    for pos in np.flatnonzero(recode_region):
        current = int(cob[pos])
        choices = [c for c in cfg.cob_codes if cob_region(c) == cob_region(current) and c != current]
        if not choices:
            recode_region[pos] = False
            continue
        cob[pos] = rng.choice(choices)
    cob[recode_major] = cfg.cob_majority_code
    cob[gone | (other & (change == 0))] = np.nan
    frame['COB'] = cob
    counts['cob_missing_majority'] = int(gone.sum())
    counts['cob_missing_other'] = int((other & (change == 0)).sum())
    counts['cob_recode_majority'] = int(recode_major.sum())
    counts['cob_recode_region'] = int(recode_region.sum())
    return counts


def infer_config(table: RecordTable, plan: PerturbationPlan) -> GeneratorConfig:
    """ Value spaces read off an existing file: the SA1 codes it spans and its largest meshblock index. """
    defaults = GeneratorConfig(n_y=1, n_x=1)
    sa1 = table.values('SA1')
    mb = table.values('MB')
    sa1, mb = sa1[~np.isnan(sa1)], mb[~np.isnan(mb)]
    if not len(sa1):
        raise ConfigurationError('Cannot perturb a file without SA1 values.')
    mb_per_sa1 = int((mb % defaults.mb_factor).max()) if len(mb) else defaults.mb_per_sa1
    return GeneratorConfig(n_y=len(table), n_x=len(table), sa1_base=int(sa1.min()),
                           n_sa1=int(sa1.max() - sa1.min()) + 1,
                           mb_per_sa1=max(mb_per_sa1, 1), plan=plan, id_field=table.id_field)


def perturb(file_x: RecordTable, plan: PerturbationPlan, seed: int,
            cfg: Optional[GeneratorConfig] = None) -> RecordTable:
    """ A disturbed copy of `file_x`; entity ids are never changed. """
    cfg = cfg or infer_config(file_x, plan)
    cfg.check_plan(plan)
    file_x.require(POPULATION_FIELDS)
    frame = file_x.frame.copy()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    counts = apply_plan(frame, plan, rng, cfg)
    logger.info('perturbed %d records: %s', len(frame), ', '.join(f'{k}={v}' for k, v in counts.items() if v))
    return RecordTable(frame, id_field=file_x.id_field)


def generate_pair(cfg: GeneratorConfig) -> AlignedPair:
    """ Population Y, its sample X disturbed by `cfg.plan`, and the truth between them. """
    cfg.check_plan()
    file_y = generate_population(cfg)
    pair = subsample(file_y, cfg.n_x, cfg.seed)
    file_x = perturb(pair.file_x, cfg.plan, cfg.seed, cfg)
    return AlignedPair(file_x, file_y, pair.alignment)


def write_pair(pair: AlignedPair, out_dir: str, missing_token: Optional[str] = None) -> dict[str, str]:
    """ Writes X.csv, Y.csv and alignment.csv to `out_dir`. """
    paths = {name: os.path.join(out_dir, f'{name}.csv') for name in ('X', 'Y', 'alignment')}
    try:
        os.makedirs(out_dir, exist_ok=True)
        pair.file_x.to_csv(paths['X'], missing_token)
        pair.file_y.to_csv(paths['Y'], missing_token)
        pair.alignment_frame().to_csv(paths['alignment'], index=False)
    except OSError as e:
        raise ReportIOError(f'Could not write the generated files to {out_dir}: {e}')
    return paths


def run_generate(cfg: GeneratorConfig, out_dir: str, missing_token: Optional[str] = None) -> dict[str, str]:
    """ Generates Y, its disturbed sample X and the truth between them as X.csv, Y.csv and alignment.csv. """
    return write_pair(generate_pair(cfg), out_dir, missing_token)
