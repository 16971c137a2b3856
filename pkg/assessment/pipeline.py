"""
The assessment run: read (or generate) the two files, block them, and for every block

  1. build the agreement matrix A0 and estimate m/u/g,
  2. link A0 with each linking method to get its observed links,
  3. run the agreement-matrix chain (or read back stored samples),
  4. re-link every retained sample and score it against the observed links.

Blocks are independent; with `jobs` other than 1 they are spread over a joblib worker pool.  Each
block's chain is seeded from the master seed and the block key, so the worker count never changes a
result.
"""
import hashlib
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from assessment.config import RunConfig
from assessment.data import AccuracyTally, BlockResult, VariantResult, AggregateReport
from assessment.reports import Reporter, BLOCKS_DIRNAME, SNAPSHOT_FILENAME
from assessment.utils import observed_links, summarize
from comparison.data import Threshold, Block
from comparison.utils import block_partition, build_agreement_matrix
from estimation.utils import estimate_block_profile, transition_params
from linker.utils import link
from records.data import RecordTable, AlignedPair, AgreementMatrix
from records.errors import ConfigurationError, EstimationError, AssessmentError, ReportIOError, AlignmentError
from records.utils import ErrorLevel, ErrorRecord
from simulator.chain import iter_chain, load_snapshots, derive_block_seed
from simulator.data import ChainConfig
from synthgen.utils import generate_pair

logger = logging.getLogger(__name__)

DISTANCE_COLUMNS = ['sample_index', 'step', 'distance_to_sample1', 'distance_to_A0']


@dataclass(frozen=True, eq=False)
class MethodPlan:
    """ How one linking method reads agreement: thresholds, cutoff. """
    name: str
    threshold: Threshold
    cutoff: float


@dataclass(frozen=True, eq=False)
class BlockTask:
    """ Everything a worker needs to assess one block; holds no reference to the full files. """
    block: Block
    initial: AgreementMatrix
    x_ids: np.ndarray
    y_ids: np.ndarray
    methods: tuple
    chain: ChainConfig
    overrides: Optional[dict] = None
    reestimate_mug: bool = False
    snapshots_from: Optional[str] = None
    keep_samples: bool = False


@dataclass(eq=False)
class RunOutcome:
    results: list
    aggregates: dict  # variant name -> AggregateReport
    samples: dict = field(default_factory=dict)  # block slug -> retained samples, when dumping

    @property
    def primary(self) -> AggregateReport:
        return next(iter(self.aggregates.values()))


# Input
# -*-*-
def load_pair(cfg: RunConfig) -> AlignedPair:
    """ The two files of the run, generated or read, with every declared variable present. """
    if cfg.synthgen is not None:
        pair = generate_pair(cfg.synthgen)
    else:
        files = cfg.input
        try:
            file_x = RecordTable.from_csv(files.file_x, cfg.variables, files.id_field, files.missing_token)
            file_y = RecordTable.from_csv(files.file_y, cfg.variables, files.id_field, files.missing_token)
            links = None
            if files.alignment:
                frame = pd.read_csv(files.alignment, dtype=str, keep_default_na=False)
                if not {'x_entity_id', 'y_entity_id'} <= set(frame.columns):
                    raise AlignmentError(f'{files.alignment} needs x_entity_id and y_entity_id columns.')
                links = dict(zip(frame['x_entity_id'], frame['y_entity_id']))
        except OSError as e:
            raise ReportIOError(f'Could not read the input files: {e}')
        pair = AlignedPair.by_entity_id(file_x, file_y, links)
    names = [spec.name for spec in cfg.variables]
    pair.file_x.require(names)
    pair.file_y.require(names)
    return pair


def method_plans(cfg: RunConfig, variants: tuple) -> tuple:
    return tuple(
        MethodPlan(name=variant.name,
                   threshold=Threshold.from_specs(cfg.variant_specs(variant), cfg.variant_mode(variant)),
                   cutoff=cfg.variant_cutoff(variant))
        for variant in variants
    )


def select_blocks(blocks, max_blocks: Optional[int] = None) -> tuple[list, list]:
    """ (blocks to assess, blocks that only get a warning row); Y-only blocks are dropped. """
    assessable, skipped = [], []
    for block in blocks:
        if block.is_assessable:
            if max_blocks is None or len(assessable) < max_blocks:
                assessable.append(block)
        elif len(block.orphans) and max_blocks is None:
            skipped.append(block)
    return assessable, skipped


# Per block
# -*-*-*-*-
def skipped_result(block: Block, x_ids: np.ndarray) -> BlockResult:
    return BlockResult(
        key=block.key, label=block.label, slug=block.slug, n_x=block.n_x, n_y=block.n_y,
        n_orphans=len(block.orphans), x_ids=x_ids,
        status=ErrorRecord(ErrorLevel.WARNING, 'no X record of this block has its true match in the block'),
    )


def assess_block(task: BlockTask) -> tuple[BlockResult, list]:
    """ Assesses one block.  Returns the result and, when asked to keep them, the retained samples. """
    block, initial = task.block, task.initial
    result = BlockResult(key=block.key, label=block.label, slug=block.slug, n_x=block.n_x, n_y=block.n_y,
                         n_orphans=len(block.orphans), x_ids=task.x_ids, y_ids=task.y_ids)
    try:
        profiles = [estimate_block_profile(initial, method.threshold, task.overrides) for method in task.methods]
    except EstimationError as e:
        logger.warning('block %s: %s', block.label, e.message)
        result.status = e.error_response
        return result, []

    # the first method drives the chain
    driver = task.methods[0]
    result.params = transition_params(profiles[0])
    observed = [observed_links(initial, method.threshold, mug, method.cutoff)
                for method, mug in zip(task.methods, profiles)]
    tallies = [AccuracyTally(links) for links in observed]
    digest = hashlib.sha256()

    if task.snapshots_from:
        path = os.path.join(task.snapshots_from, BLOCKS_DIRNAME, block.slug, SNAPSHOT_FILENAME)
        samples = load_snapshots(path, initial)
    else:
        samples = iter_chain(initial, result.params, driver.threshold, task.chain)

    kept, distances = [], []
    for sample in samples:
        digest.update(sample.matrix.digest().encode())
        for method, mug, tally in zip(task.methods, profiles, tallies):
            if task.reestimate_mug:
                mug = estimate_block_profile(sample.matrix, method.threshold, task.overrides)
            tally.add(link(sample.matrix, method.threshold, mug, method.cutoff))
        distances.append({'sample_index': sample.index, 'step': sample.step, 'distance_to_sample1': sample.distance,
                          'distance_to_A0': sample.distance_to_initial})
        if task.keep_samples:
            kept.append(sample)

    result.distances = pd.DataFrame(distances, columns=DISTANCE_COLUMNS)
    result.variants = [
        VariantResult(name=method.name, observed=links, mug=mug, report=tally.report())
        for method, links, mug, tally in zip(task.methods, observed, profiles, tallies)
    ]
    result.snapshot_digest = digest.hexdigest()
    logger.debug('block %s: grand mean %.6f over %d samples', block.label,
                 result.variants[0].report.grand_mean, len(distances))
    return result, kept


# Run
# -*-
def prepare_tasks(cfg: RunConfig, pair: AlignedPair, variants: tuple) -> tuple[list, list]:
    partition = block_partition(pair, cfg.blocking)
    assessable, skipped = select_blocks(partition, cfg.max_blocks)
    if not assessable:
        raise AssessmentError('No block holds an X record together with its true match.')
    methods = method_plans(cfg, variants)
    chain_mode = cfg.variant_mode(variants[0])
    specs = cfg.variant_specs(variants[0])
    overrides = cfg.mug_overrides()
    x_ids, y_ids = pair.file_x.entity_ids, pair.file_y.entity_ids

    tasks = []
    for block in assessable:
        initial = build_agreement_matrix(pair, block, specs, chain_mode)
        chain = ChainConfig(n_samples=cfg.samples, thinning=cfg.thinning,
                            seed=derive_block_seed(cfg.seed, block.key), mode=chain_mode)
        tasks.append(BlockTask(block=block, initial=initial, x_ids=x_ids[block.x_indices],
                               y_ids=y_ids[block.y_indices], methods=methods, chain=chain, overrides=overrides,
                               reestimate_mug=cfg.reestimate_mug, snapshots_from=cfg.snapshots_from,
                               keep_samples=cfg.dump_snapshots))
    skipped_results = [skipped_result(block, x_ids[block.orphans]) for block in skipped]
    logger.info('%d blocks to assess on %s, %d without a matched pair',
                len(tasks), ' & '.join(cfg.blocking) or 'no blocking variable', len(skipped_results))
    return tasks, skipped_results


def run_pipeline(cfg: RunConfig, variants: Optional[tuple] = None,
                 progress: Optional[Callable[[BlockResult], None]] = None) -> RunOutcome:
    variants = variants or cfg.method_variants
    pair = load_pair(cfg)
    tasks, skipped = prepare_tasks(cfg, pair, variants)

    if cfg.jobs != 1 and len(tasks) > 1:
        outputs = Parallel(n_jobs=cfg.jobs)(delayed(assess_block)(task) for task in tasks)
    else:
        outputs = (assess_block(task) for task in tasks)

    results, samples = [], {}
    for result, kept in outputs:
        results.append(result)
        if kept:
            samples[result.slug] = kept
        if progress:
            progress(result)
    results.extend(skipped)

    aggregates = {variant.name: summarize(results, variant.name) for variant in variants}
    return RunOutcome(results=results, aggregates=aggregates, samples=samples)


def comparison_table(outcome: RunOutcome) -> pd.DataFrame:
    """ Grand mean of every method and its difference from the first one, overall and per block. """
    names = list(outcome.aggregates)
    rows = []
    for result in outcome.results:
        if not result.included:
            continue
        row = {'block': result.label}
        for name in names:
            row[name] = result.variant(name).report.grand_mean
        rows.append(row)
    rows.append({'block': 'ALL', **{name: outcome.aggregates[name].grand_mean for name in names}})
    table = pd.DataFrame(rows, columns=['block'] + names)
    for name in names[1:]:
        table[f'{name}-{names[0]}'] = table[name] - table[names[0]]
    return table


def snapshot_table(outcome: RunOutcome) -> pd.DataFrame:
    rows = [{'block': result.label, 'slug': result.slug, 'n_samples': len(result.distances),
             'snapshot_digest': result.snapshot_digest}
            for result in outcome.results if result.included]
    return pd.DataFrame(rows, columns=['block', 'slug', 'n_samples', 'snapshot_digest'])


# Entry points
# -*-*-*-*-*-*
def run_assess(cfg: RunConfig, progress: Optional[Callable[[BlockResult], None]] = None) -> RunOutcome:
    """ Assesses the run's linking method and writes its report files to `cfg.output`. """
    outcome = run_pipeline(cfg, cfg.method_variants[:1], progress)
    Reporter(cfg.output).write_assessment(outcome)
    return outcome


def run_compare(cfg: RunConfig, progress: Optional[Callable[[BlockResult], None]] = None) -> RunOutcome:
    """
    Assesses every variant on the same chain samples; the first variant drives the chain.  Writes each
    variant's reports plus comparison.csv (grand means and their differences) and snapshots.csv.
    """
    if len(cfg.variants) < 2:
        raise ConfigurationError('compare needs at least two `variants`.')
    outcome = run_pipeline(cfg, cfg.variants, progress)
    Reporter(cfg.output).write_comparison(outcome, comparison_table(outcome), snapshot_table(outcome))
    return outcome

