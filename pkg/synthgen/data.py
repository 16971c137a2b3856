import math
from dataclasses import dataclass, field, fields, asdict
from typing import Optional, Mapping

from django.conf import settings

from records.errors import ConfigurationError, PlanError

# Standard Australian Classification of Countries codes; the leading two digits give the broad region.
MAJORITY_COB_CODE = 1101
DEFAULT_COB_CODES = (
    1102, 1199,  # Oceania: Norfolk Island, Australian external territories
    1301, 1302, 1304,  # Melanesia
    2102, 2105,  # UK
    2301, 2304, 2308, 3104, 3105, 3106, 3107, 3202, 3204,  # Europe
    4101, 4102, 4103, 4104,  # Middle East and North Africa
    5101, 5102, 5201, 5204, 5205, 6101, 6102, 6105,  # Asia
    7103, 7106, 7107, 8102, 8104,  # South Asia, Americas
    9101, 9102, 9205, 9216, 9225,  # Sub-Saharan Africa
)

SEX_VALUES = (1, 2)

POPULATION_FIELDS = ('SA1', 'MB', 'BDAY', 'BYEAR', 'SEX', 'EYE', 'COB')


def cob_region(code) -> int:
    return int(code) // 100


@dataclass(frozen=True)
class PerturbationPlan:
    """
    Rates at which values of the sampled file are disturbed, as shares of the records eligible for each
    change.  The defaults give the counts of a 50,000-record file (500 adjacent-SA1 moves, 4,000 missing
    birth days, 50 sex flips, ...) and scale with the file.
    """
    sa1_adjacent_rate: float = 0.01
    mb_within_sa1_rate: float = 0.03
    bday_missing_rate: float = 0.08
    bday_altered_rate: float = 0.01
    byear_minus2_rate: float = 0.001
    byear_plus2_rate: float = 0.001
    byear_minus1_rate: float = 0.024
    byear_plus1_rate: float = 0.024
    sex_flip_rate: float = 0.001
    eye_missing_rate: float = 0.10
    eye_replace_rate: float = 0.10
    # shares of the majority-coded / other-coded COB records
    cob_missing_majority_rate: float = 0.02
    cob_missing_other_rate: float = 0.02
    cob_recode_rate: float = 0.02
    # of the recoded records, the share moved to the majority code; the rest stay within their region
    cob_recode_majority_share: float = 0.5

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not 0 <= value <= 1:
                raise PlanError(f'{f.name} must lie in [0, 1], got {value}.')
        exclusive = {
            'BDAY': self.bday_missing_rate + self.bday_altered_rate,
            'BYEAR': self.byear_minus2_rate + self.byear_plus2_rate + self.byear_minus1_rate + self.byear_plus1_rate,
            'EYE': self.eye_missing_rate + self.eye_replace_rate,
            'COB': self.cob_missing_other_rate + self.cob_recode_rate,
        }
        for name, total in exclusive.items():
            if total > 1:
                raise PlanError(f'{name} changes are mutually exclusive; their rates add up to {total} > 1.')

    @classmethod
    def identity(cls) -> 'PerturbationPlan':
        return cls(**{f.name: 0.0 for f in fields(cls)})

    @classmethod
    def from_mapping(cls, mapping: Optional[Mapping]) -> 'PerturbationPlan':
        if not mapping:
            return cls()
        try:
            return cls(**mapping)
        except TypeError as e:
            raise PlanError(f'Unknown perturbation setting: {e}')

    def expected_counts(self, n_x: int, majority_share: float = 0.75) -> dict[str, float]:
        """ Expected number of records hit by each change in a file of `n_x` records. """
        n_major, n_other = n_x * majority_share, n_x * (1 - majority_share)
        return {
            'sa1_adjacent': n_x * self.sa1_adjacent_rate,
            'mb_within_sa1': n_x * self.mb_within_sa1_rate,
            'bday_missing': n_x * self.bday_missing_rate,
            'bday_altered': n_x * self.bday_altered_rate,
            'byear_minus2': n_x * self.byear_minus2_rate,
            'byear_plus2': n_x * self.byear_plus2_rate,
            'byear_minus1': n_x * self.byear_minus1_rate,
            'byear_plus1': n_x * self.byear_plus1_rate,
            'sex_flip': n_x * self.sex_flip_rate,
            'eye_missing': n_x * self.eye_missing_rate,
            'eye_replace': n_x * self.eye_replace_rate,
            'cob_missing_majority': n_major * self.cob_missing_majority_rate,
            'cob_missing_other': n_other * self.cob_missing_other_rate,
            'cob_recode_majority': n_other * self.cob_recode_rate * self.cob_recode_majority_share,
            'cob_recode_region': n_other * self.cob_recode_rate * (1 - self.cob_recode_majority_share),
        }


@dataclass(frozen=True)
class GeneratorConfig:
    """
    Size and value spaces of a synthetic population Y and its perturbed subsample X.

    SA1 codes are consecutive integers starting at `sa1_base`; neighbouring codes count as adjacent areas.
    A meshblock code is its SA1 code followed by a `mb_width`-digit index (1..mb_per_sa1).
    """
    n_y: int = 400_000
    n_x: int = 50_000
    seed: int = getattr(settings, 'MACSIM_DEFAULT_SEED', 0)
    # None: one SA1 per ~470 population records, roughly 59 sampled records per SA1 at n_x / n_y = 1/8
    n_sa1: Optional[int] = None
    sa1_base: int = 10_000
    mb_per_sa1: int = 20
    mb_width: int = 3
    bday_range: tuple = (1, 365)
    byear_range: tuple = (1920, 2005)
    eye_categories: int = 5
    cob_majority_code: int = MAJORITY_COB_CODE
    cob_majority_share: float = 0.75
    cob_codes: tuple = DEFAULT_COB_CODES
    cob_weights: Optional[tuple] = None
    plan: PerturbationPlan = field(default_factory=PerturbationPlan)
    id_field: str = getattr(settings, 'MACSIM_ID_FIELD', 'RECID')

    def __post_init__(self):
        object.__setattr__(self, 'bday_range', tuple(self.bday_range))
        object.__setattr__(self, 'byear_range', tuple(self.byear_range))
        object.__setattr__(self, 'cob_codes', tuple(int(c) for c in self.cob_codes))
        if self.cob_weights is not None:
            object.__setattr__(self, 'cob_weights', tuple(float(w) for w in self.cob_weights))
        if isinstance(self.plan, Mapping) or self.plan is None:
            object.__setattr__(self, 'plan', PerturbationPlan.from_mapping(self.plan))

        if self.n_y < 1 or self.n_x < 1:
            raise ConfigurationError('Both files need at least one record.')
        if self.n_x > self.n_y:
            raise ConfigurationError(f'Cannot sample {self.n_x} records from a population of {self.n_y}.')
        if self.n_sa1 is not None and self.n_sa1 < 1:
            raise ConfigurationError('At least one SA1 is required.')
        if not 1 <= self.mb_per_sa1 < 10 ** self.mb_width:
            raise ConfigurationError(f'mb_per_sa1 must fit in {self.mb_width} digits.')
        for name in ('bday_range', 'byear_range'):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigurationError(f'{name} is empty: {lo} > {hi}.')
        if self.eye_categories < 1:
            raise ConfigurationError('At least one EYE category is required.')
        if not 0 <= self.cob_majority_share <= 1:
            raise ConfigurationError('cob_majority_share must lie in [0, 1].')
        if not self.cob_codes and self.cob_majority_share < 1:
            raise ConfigurationError('COB needs codes besides the majority code.')
        if self.cob_majority_code in self.cob_codes:
            raise ConfigurationError('The majority COB code may not appear among the other codes.')
        if self.cob_weights is not None:
            if len(self.cob_weights) != len(self.cob_codes) or min(self.cob_weights) < 0 \
                    or not sum(self.cob_weights) > 0:
                raise ConfigurationError('cob_weights needs one non-negative weight per COB code.')

    @property
    def sa1_count(self) -> int:
        if self.n_sa1 is not None:
            return self.n_sa1
        return max(1, math.ceil(self.n_y / 470))

    @property
    def sa1_codes(self) -> range:
        return range(self.sa1_base, self.sa1_base + self.sa1_count)

    @property
    def mb_factor(self) -> int:
        return 10 ** self.mb_width

    @property
    def cob_probabilities(self) -> Optional[list[float]]:
        if self.cob_weights is None:
            return None
        total = sum(self.cob_weights)
        return [w / total for w in self.cob_weights]

    def check_plan(self, plan: Optional[PerturbationPlan] = None):
        """ Raises PlanError when a change the plan asks for has no room in these value spaces. """
        plan = plan or self.plan
        if plan.sa1_adjacent_rate > 0 and self.sa1_count < 2:
            raise PlanError('Records cannot move to an adjacent SA1 when there is only one SA1.')
        if plan.mb_within_sa1_rate > 0 and self.mb_per_sa1 < 2:
            raise PlanError('Records cannot move to another meshblock of an SA1 holding only one.')
        if plan.bday_altered_rate > 0 and self.bday_range[0] == self.bday_range[1]:
            raise PlanError('BDAY cannot be altered: its range holds one value.')
        if plan.eye_replace_rate > 0 and self.eye_categories < 2:
            raise PlanError('EYE cannot be replaced: there is only one category.')
        if plan.cob_recode_rate > 0 and plan.cob_recode_majority_share < 1:
            regions = {}
            for code in self.cob_codes:
                regions.setdefault(cob_region(code), []).append(code)
            lonely = sorted(codes[0] for codes in regions.values() if len(codes) < 2)
            if lonely:
                raise PlanError(f'COB codes {lonely} have no other code in their region to be recoded to.')

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> 'GeneratorConfig':
        try:
            return cls(**dict(mapping))
        except TypeError as e:
            raise ConfigurationError(f'Unknown generator setting: {e}')

    def as_dict(self) -> dict:
        return asdict(self)
