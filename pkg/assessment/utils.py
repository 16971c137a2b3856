import logging
from typing import Iterable, Sequence, Union

import numpy as np
import pandas as pd

from assessment.data import AccuracyReport, AccuracyTally, BlockResult, AggregateReport
from comparison.data import Threshold
from linker.utils import link
from records.data import AgreementMatrix, MugProfile, LinkSet
from records.errors import AssessmentError
from records.utils import ErrorLevel

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ['block', 'slug', 'status', 'message', 'n_x', 'n_y', 'n_orphans', 'n_samples', 'n_links',
                   'n_unlinked_observed', 'grand_mean', 'mean_per_record', 'mean_per_simulation',
                   'min_per_record', 'max_per_record', 'min_per_simulation', 'max_per_simulation',
                   'worst_record', 'snapshot_digest']
COUNT_COLUMNS = ['n_x', 'n_y', 'n_orphans', 'n_samples', 'n_links', 'n_unlinked_observed']


def observed_links(initial: AgreementMatrix, threshold: Threshold, mug: MugProfile, cutoff: float = 0.0) -> LinkSet:
    """ The links the method under assessment makes on the real comparisons. """
    return link(initial, threshold, mug, cutoff)


def relink_accuracy(observed: LinkSet, simulated: Iterable[LinkSet]) -> AccuracyReport:
    """
    Scores every simulated link set against `observed`: X record i is correct in sample s when
    its partner there is its observed partner.  A record unlinked in `observed` is correct only
    where it is unlinked as well.
    """
    tally = AccuracyTally(observed)
    for links in simulated:
        tally.add(links)
    if not tally.n_samples:
        raise AssessmentError('No simulated link sets to score.')
    return tally.report()


def summarize(results: Sequence[Union[BlockResult, AccuracyReport]], variant: str = None) -> AggregateReport:
    """
    Combines block results into one grand mean weighted by each block's record count.  Blocks
    without a report (nothing to score, estimation failed) stay in the table as warning rows.
    """
    if not results:
        raise AssessmentError('Nothing to summarize.')
    rows, means, weights = [], [], []
    n_excluded = 0
    for k, result in enumerate(results):
        if isinstance(result, AccuracyReport):
            row = {'block': str(k + 1), 'slug': str(k + 1), 'status': ErrorLevel.OK.name, 'message': '',
                   'n_x': result.n_records, 'n_samples': result.n_samples}
            row.update(result.summary())
            report = result
        else:
            row = result.summary_row(variant)
            report = result.variant(variant).report if result.included else None
        if report is None:
            n_excluded += 1
            if row['status'] == ErrorLevel.OK.name:
                row['status'] = ErrorLevel.WARNING.name
            logger.warning('block %s left out of the grand mean: %s', row['block'], row['message'] or 'no report')
        else:
            means.append(report.grand_mean)
            weights.append(report.n_records)
        rows.append(row)

    if not weights:
        raise AssessmentError('No block could be assessed; there is no grand mean to report.')
    grand_mean = float(np.average(means, weights=weights))
    table = pd.DataFrame(rows).reindex(columns=SUMMARY_COLUMNS)
    for column in COUNT_COLUMNS:
        table[column] = table[column].astype('Int64')
    return AggregateReport(grand_mean=grand_mean, n_records=int(sum(weights)), blocks=table,
                           n_excluded=n_excluded)
