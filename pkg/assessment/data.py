import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from records.data import LinkSet, MugProfile, TransitionParams
from records.errors import AssessmentError
from records.utils import ErrorLevel, ErrorRecord, as_plain_number

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AccuracyReport:
    """
    Re-link accuracy of one block over S simulated samples.  Only integer counts are stored:
    `correct_by_record[i]` is how many samples re-linked X record i to its observed partner,
    `correct_by_sample[s]` how many X records sample s re-linked correctly.  Both add up to the
    same total, so the two series share one mean.
    """
    correct_by_record: np.ndarray
    correct_by_sample: np.ndarray
    n_unlinked_observed: int = 0

    def __post_init__(self):
        by_record = np.asarray(self.correct_by_record, dtype=np.int64).reshape(-1)
        by_sample = np.asarray(self.correct_by_sample, dtype=np.int64).reshape(-1)
        if not len(by_record) or not len(by_sample):
            raise AssessmentError('An accuracy report needs at least one record and one sample.')
        if by_record.sum() != by_sample.sum():
            raise AssessmentError('Record and sample tallies disagree.')
        if by_record.max() > len(by_sample) or by_sample.max() > len(by_record) \
                or by_record.min() < 0 or by_sample.min() < 0:
            raise AssessmentError('Correct counts outside their range.')
        object.__setattr__(self, 'correct_by_record', by_record)
        object.__setattr__(self, 'correct_by_sample', by_sample)

    @property
    def n_records(self) -> int:
        return len(self.correct_by_record)

    @property
    def n_samples(self) -> int:
        return len(self.correct_by_sample)

    @property
    def total_correct(self) -> int:
        return int(self.correct_by_record.sum())

    @property
    def per_record(self) -> np.ndarray:
        return self.correct_by_record / self.n_samples

    @property
    def per_simulation(self) -> np.ndarray:
        return self.correct_by_sample / self.n_records

    @property
    def grand_mean(self) -> float:
        return self.total_correct / (self.n_records * self.n_samples)

    @property
    def mean_per_record(self) -> float:
        return int(self.correct_by_record.sum()) / (self.n_records * self.n_samples)

    @property
    def mean_per_simulation(self) -> float:
        return int(self.correct_by_sample.sum()) / (self.n_records * self.n_samples)

    @property
    def worst_record(self) -> int:
        """ Position of the record re-linked correctly least often (first one on ties). """
        return int(np.argmin(self.correct_by_record))

    def summary(self) -> dict:
        per_record, per_simulation = self.per_record, self.per_simulation
        return {
            'grand_mean': self.grand_mean,
            'mean_per_record': self.mean_per_record,
            'mean_per_simulation': self.mean_per_simulation,
            'min_per_record': float(per_record.min()),
            'max_per_record': float(per_record.max()),
            'min_per_simulation': float(per_simulation.min()),
            'max_per_simulation': float(per_simulation.max()),
            'n_unlinked_observed': self.n_unlinked_observed,
        }


class AccuracyTally:
    """ Builds an AccuracyReport one simulated link set at a time. """

    def __init__(self, observed: LinkSet):
        self.observed = observed
        self._expected = observed.partners()
        self._by_record = np.zeros(observed.n_x, dtype=np.int64)
        self._by_sample = []

    @property
    def n_samples(self) -> int:
        return len(self._by_sample)

    def add(self, simulated: LinkSet) -> np.ndarray:
        if simulated.n_x != self.observed.n_x:
            raise AssessmentError(
                f'Simulated links cover {simulated.n_x} X records, observed links {self.observed.n_x}.'
            )
        # both -1 (unlinked in both) counts as correct
        correct = simulated.partners() == self._expected
        self._by_record += correct
        self._by_sample.append(int(correct.sum()))
        return correct

    def report(self) -> AccuracyReport:
        return AccuracyReport(self._by_record.copy(), np.array(self._by_sample, dtype=np.int64),
                              n_unlinked_observed=len(self.observed.unlinked_x))


@dataclass(eq=False)
class VariantResult:
    """ Outcome of one linking method on one block. """
    name: str
    observed: LinkSet
    mug: MugProfile
    report: AccuracyReport


@dataclass(eq=False)
class BlockResult:
    """ Everything one block contributes to the run's outputs. """
    key: tuple
    label: str
    slug: str
    n_x: int
    n_y: int
    n_orphans: int = 0
    x_ids: Sequence = ()
    y_ids: Sequence = ()
    params: Optional[TransitionParams] = None
    distances: Optional[pd.DataFrame] = None
    variants: list[VariantResult] = field(default_factory=list)
    snapshot_digest: str = ''
    status: ErrorRecord = field(default_factory=lambda: ErrorRecord(ErrorLevel.OK))

    @property
    def included(self) -> bool:
        return self.status.level == ErrorLevel.OK and bool(self.variants)

    def variant(self, name: Optional[str] = None) -> VariantResult:
        if name is None:
            return self.variants[0]
        for result in self.variants:
            if result.name == name:
                return result
        raise AssessmentError(f'Block {self.label} has no result for variant `{name}`.')

    def summary_row(self, variant: Optional[str] = None) -> dict:
        row = {'block': self.label, 'slug': self.slug, 'n_x': self.n_x, 'n_y': self.n_y,
               'n_orphans': self.n_orphans, **self.status.as_dict()}
        if not self.included:
            return row
        result = self.variant(variant)
        report = result.report
        row.update(report.summary())
        row.update({
            'n_samples': report.n_samples,
            'n_links': len(result.observed),
            'worst_record': as_plain_number(np.asarray(self.x_ids)[report.worst_record]),
            'snapshot_digest': self.snapshot_digest,
        })
        return row


@dataclass(eq=False)
class AggregateReport:
    """ Record-count-weighted grand mean over the included blocks plus the per-block table. """
    grand_mean: float
    n_records: int
    blocks: pd.DataFrame
    n_excluded: int = 0
