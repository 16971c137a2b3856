"""
Writes a run's CSV files.  Every file of a run goes through one `Reporter`.

assess:
    <out>/summary.csv
    <out>/blocks/<block>/{distances,per_record,per_simulation,mug,params,links}.csv [+ snapshots.npz]
compare:
    <out>/comparison.csv, <out>/snapshots.csv
    <out>/blocks/<block>/distances.csv [+ snapshots.npz]
    <out>/<variant>/summary.csv
    <out>/<variant>/blocks/<block>/{per_record,per_simulation,mug,links}.csv
"""
import logging
import os
from typing import Optional

import numpy as np
import pandas as pd
from django.utils.text import slugify

from assessment.data import BlockResult, AggregateReport
from records.errors import ReportIOError
from records.utils import as_plain_number
from simulator.chain import save_snapshots

logger = logging.getLogger(__name__)

BLOCKS_DIRNAME = 'blocks'
SNAPSHOT_FILENAME = 'snapshots.npz'


class Reporter:
    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.written: list[str] = []

    def _path(self, *parts) -> str:
        path = os.path.join(self.out_dir, *parts)
        try:
            os.makedirs(os.path.dirname(path), exist_ok=True)
        except OSError as e:
            raise ReportIOError(f'Could not create {os.path.dirname(path)}: {e}')
        return path

    def write_frame(self, frame: pd.DataFrame, *parts) -> str:
        path = self._path(*parts)
        try:
            frame.to_csv(path, index=False)
        except OSError as e:
            raise ReportIOError(f'Could not write {path}: {e}')
        self.written.append(path)
        return path

    # Block files
    # -*-*-*-*-*-
    def write_chain(self, result: BlockResult, samples: Optional[list] = None):
        """ Files that belong to the block's chain and not to a linking method. """
        if result.distances is not None:
            self.write_frame(result.distances, BLOCKS_DIRNAME, result.slug, 'distances.csv')
        if result.params is not None:
            self.write_frame(result.params.to_frame(), BLOCKS_DIRNAME, result.slug, 'params.csv')
        if samples:
            path = self._path(BLOCKS_DIRNAME, result.slug, SNAPSHOT_FILENAME)
            save_snapshots(path, samples)
            self.written.append(path)

    def write_method(self, result: BlockResult, variant: Optional[str] = None, prefix: tuple = ()):
        """ per_record, per_simulation, mug and links of one linking method on one block. """
        if not result.included:
            return
        outcome = result.variant(variant)
        report = outcome.report
        base = prefix + (BLOCKS_DIRNAME, result.slug)
        x_ids = [as_plain_number(eid) for eid in np.asarray(result.x_ids)]
        per_record = pd.DataFrame({'x_entity_id': x_ids, 'correct': report.correct_by_record,
                                   'proportion': report.per_record})
        per_simulation = pd.DataFrame({'sample_index': np.arange(1, report.n_samples + 1),
                                       'correct': report.correct_by_sample,
                                       'proportion': report.per_simulation})
        self.write_frame(per_record, *base, 'per_record.csv')
        self.write_frame(per_simulation, *base, 'per_simulation.csv')
        self.write_frame(outcome.mug.to_frame(), *base, 'mug.csv')
        self.write_frame(outcome.observed.to_frame(x_ids, [as_plain_number(eid) for eid in np.asarray(result.y_ids)]),
                         *base, 'links.csv')

    # Run files
    # -*-*-*-*-
    def write_summary(self, aggregate: AggregateReport, prefix: tuple = ()) -> str:
        table = aggregate.blocks.copy()
        overall = {'block': 'ALL', 'slug': 'all', 'status': 'OK', 'message': '',
                   'n_x': aggregate.n_records, 'grand_mean': aggregate.grand_mean,
                   'mean_per_record': aggregate.grand_mean, 'mean_per_simulation': aggregate.grand_mean}
        if aggregate.n_excluded:
            overall['message'] = f'{aggregate.n_excluded} block(s) left out of the grand mean'
        table = pd.concat([table, pd.DataFrame([overall])], ignore_index=True).reindex(columns=table.columns)
        return self.write_frame(table, *prefix, 'summary.csv')

    def write_assessment(self, outcome) -> list[str]:
        for result in outcome.results:
            self.write_chain(result, outcome.samples.get(result.slug))
            self.write_method(result)
        self.write_summary(outcome.primary)
        logger.info('wrote %d files to %s', len(self.written), self.out_dir)
        return self.written

    def write_comparison(self, outcome, comparison: pd.DataFrame, snapshots: pd.DataFrame) -> list[str]:
        for result in outcome.results:
            self.write_chain(result, outcome.samples.get(result.slug))
            for name in outcome.aggregates:
                self.write_method(result, name, prefix=(slugify(name),))
        for name, aggregate in outcome.aggregates.items():
            self.write_summary(aggregate, prefix=(slugify(name),))
        self.write_frame(comparison, 'comparison.csv')
        self.write_frame(snapshots, 'snapshots.csv')
        logger.info('wrote %d files to %s', len(self.written), self.out_dir)
        return self.written
