import hashlib
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Mapping, Sequence, Iterable

import numpy as np
import pandas as pd
from django.conf import settings
from django.db.models import TextChoices
from django.utils.translation import gettext_lazy as _

from records.errors import ConfigurationError, AlignmentError
from records.utils import as_plain_number

logger = logging.getLogger(__name__)

# slack allowed when checking probability sums built from floating point counts
PROBABILITY_SLACK = 1e-12


class LinkageMode(TextChoices):
    ORIGINAL = 'original', _('Original (exact agreement)'),
    EXTENDED = 'extended', _('Extended (similarity weights)'),


@dataclass(frozen=True)
class VariableSpec:
    """
    What the library needs to know about one variable: its declared value range `t_range` (T),
    the tolerance accepted as agreement (delta), the raw value that means 'missing' and whether
    it blocks by default.
    """
    name: str
    t_range: float
    tolerance: float = 0.0
    missing_sentinel: Optional[float] = None
    blocking: bool = False

    def __post_init__(self):
        if not self.t_range > 0:
            raise ConfigurationError(f'{self.name}: t_range must be positive, got {self.t_range}.')
        # tolerance < T/2 keeps the agreement threshold above 0.5
        if not 0 <= self.tolerance < self.t_range / 2:
            raise ConfigurationError(
                f'{self.name}: tolerance must lie in [0, {self.t_range / 2}), got {self.tolerance}.'
            )

    def with_tolerance(self, tolerance: float) -> 'VariableSpec':
        return replace(self, tolerance=tolerance)


@dataclass(eq=False)
class RecordTable:
    """
    An ordered table of records: one entity id per record plus a (possibly missing) numeric
    value for every declared variable.  Missing values are held as NaN.
    """
    frame: pd.DataFrame
    id_field: str = field(default_factory=lambda: getattr(settings, 'MACSIM_ID_FIELD', 'RECID'))
    _columns: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.id_field not in self.frame.columns:
            raise ConfigurationError(f'Record table has no `{self.id_field}` column.')
        if self.frame[self.id_field].duplicated().any():
            dupes = self.frame.loc[self.frame[self.id_field].duplicated(), self.id_field].tolist()[:5]
            raise ConfigurationError(f'Entity ids must be unique within a table; repeated: {dupes}')
        self.frame = self.frame.reset_index(drop=True).copy()

    def __len__(self):
        return len(self.frame)

    @property
    def entity_ids(self) -> np.ndarray:
        return self.frame[self.id_field].to_numpy()

    @property
    def variables(self) -> list[str]:
        return [col for col in self.frame.columns if col != self.id_field]

    def require(self, names: Iterable[str]):
        missing = [name for name in names if name not in self.frame.columns]
        if missing:
            raise ConfigurationError(f'Record table lacks declared variables: {", ".join(missing)}')

    def values(self, name: str) -> np.ndarray:
        """ Values of variable `name` as floats, NaN where missing. """
        if name not in self._columns:
            self.require([name])
            column = self.frame[name].to_numpy(dtype=float, na_value=np.nan)
            column.setflags(write=False)
            self._columns[name] = column
        return self._columns[name]

    def take(self, indices: Sequence[int]) -> 'RecordTable':
        return RecordTable(self.frame.iloc[list(indices)], id_field=self.id_field)

    @classmethod
    def from_csv(cls, path, specs: Sequence[VariableSpec] = (), id_field: Optional[str] = None,
                 missing_token: Optional[str] = None) -> 'RecordTable':
        id_field = id_field or getattr(settings, 'MACSIM_ID_FIELD', 'RECID')
        if missing_token is None:
            missing_token = getattr(settings, 'MACSIM_MISSING_TOKEN', '')
        frame = pd.read_csv(path, na_values=[missing_token], keep_default_na=False,
                            dtype={id_field: str})
        for spec in specs:
            if spec.name not in frame.columns:
                raise ConfigurationError(f'{path}: no column for variable `{spec.name}`.')
            try:
                column = pd.to_numeric(frame[spec.name])
            except (ValueError, TypeError) as e:
                raise ConfigurationError(f'{path}: `{spec.name}` must be numeric ({e}).')
            if spec.missing_sentinel is not None:
                column = column.mask(column == spec.missing_sentinel)
            frame[spec.name] = column.astype(float)
        logger.debug('read %d records from %s', len(frame), path)
        return cls(frame, id_field=id_field)

    def to_frame(self) -> pd.DataFrame:
        """ Copy of the table with integral float columns turned back into (nullable) ints. """
        out = self.frame.copy()
        for col in out.columns:
            series = out[col]
            if pd.api.types.is_float_dtype(series):
                present = series.dropna()
                if (present == np.floor(present)).all():
                    out[col] = series.astype('Int64')
        return out

    def to_csv(self, path, missing_token: Optional[str] = None):
        if missing_token is None:
            missing_token = getattr(settings, 'MACSIM_MISSING_TOKEN', '')
        self.to_frame().to_csv(path, index=False, na_rep=missing_token)


@dataclass(eq=False)
class AlignedPair:
    """
    Two record tables and the truth between them: `alignment[i]` is the Y index of the
    true match of X record `i`.
    """
    file_x: RecordTable
    file_y: RecordTable
    alignment: np.ndarray

    def __post_init__(self):
        self.alignment = np.asarray(self.alignment, dtype=int)
        if self.alignment.shape != (len(self.file_x),):
            raise AlignmentError('Every X record needs exactly one true match in Y.')
        if len(self.alignment) and (self.alignment.min() < 0 or self.alignment.max() >= len(self.file_y)):
            raise AlignmentError('Alignment points outside file Y.')
        if len(np.unique(self.alignment)) != len(self.alignment):
            raise AlignmentError('Two X records share a true match in Y; alignments must be 1-1.')

    @property
    def is_canonical(self) -> bool:
        return bool(np.array_equal(self.alignment, np.arange(len(self.file_x))))

    @classmethod
    def by_entity_id(cls, file_x: RecordTable, file_y: RecordTable,
                     links: Optional[Mapping] = None) -> 'AlignedPair':
        """
        Aligns X to Y through entity ids.  With `links` (x entity id -> y entity id) the ids
        may differ between the files; otherwise a record's true match carries the same id.
        """
        y_position = {as_plain_number(eid): pos for pos, eid in enumerate(file_y.entity_ids)}
        alignment = []
        for eid in file_x.entity_ids:
            eid = as_plain_number(eid)
            target = links.get(eid, links.get(str(eid))) if links is not None else eid
            if target is None or as_plain_number(target) not in y_position:
                raise AlignmentError(f'X record {eid} has no true match in Y.')
            alignment.append(y_position[as_plain_number(target)])
        return cls(file_x, file_y, np.array(alignment, dtype=int))

    def alignment_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'x_entity_id': self.file_x.entity_ids,
            'y_entity_id': self.file_y.entity_ids[self.alignment],
        })


@dataclass(frozen=True, eq=False)
class AgreementMatrix:
    """
    A[i, j, l]: similarity in [0, 1] of X record i and Y record j on variable l, NaN when either
    value is missing.  In original mode the only non-missing values are 1.0 (agree) and 0.0 (disagree).
    Instances are read-only; the simulator works on its own copy.
    """
    values: np.ndarray
    mode: LinkageMode = LinkageMode.EXTENDED
    variables: tuple = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 3:
            raise ConfigurationError(f'Agreement matrices are 3-D, got shape {values.shape}.')
        if self.variables and len(self.variables) != values.shape[2]:
            raise ConfigurationError('One variable name per agreement layer is required.')
        present = values[~np.isnan(values)]
        if present.size and (present.min() < 0 or present.max() > 1):
            raise ConfigurationError('Agreement values must lie in [0, 1].')
        if self.mode == LinkageMode.ORIGINAL and not np.isin(present, (0.0, 1.0)).all():
            raise ConfigurationError('Original-mode agreement values must be 0 or 1.')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'variables', tuple(self.variables))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def n_x(self) -> int:
        return self.values.shape[0]

    @property
    def n_y(self) -> int:
        return self.values.shape[1]

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def matched_mask(self) -> np.ndarray:
        """ (R_X, R_Y) mask of the true matched pairs, the leading diagonal. """
        return np.eye(self.n_x, self.n_y, dtype=bool)

    def working_copy(self) -> np.ndarray:
        return np.array(self.values, copy=True)

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.values).tobytes()).hexdigest()


@dataclass(frozen=True, eq=False)
class MugProfile:
    """ Per-variable probabilities of agreement given a match (m), a non-match (u), and of missingness (g). """
    variables: tuple
    m: np.ndarray
    u: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ('m', 'u', 'g'):
            arr = np.array(getattr(self, name), dtype=float, copy=True).reshape(-1)
            if arr.shape != (len(self.variables),):
                raise ConfigurationError(f'`{name}` needs one value per variable.')
            if ((arr < 0) | (arr > 1) | np.isnan(arr)).any():
                raise ConfigurationError(f'`{name}` values must be probabilities, got {arr.tolist()}.')
            arr.setflags(write=False)
            arrays[name] = arr
        if (arrays['m'] + arrays['g'] > 1 + PROBABILITY_SLACK).any() \
                or (arrays['u'] + arrays['g'] > 1 + PROBABILITY_SLACK).any():
            raise ConfigurationError('m + g and u + g may not exceed 1.')
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)
        object.__setattr__(self, 'variables', tuple(self.variables))

    def __getitem__(self, variable: str) -> tuple[float, float, float]:
        idx = self.variables.index(variable)
        return float(self.m[idx]), float(self.u[idx]), float(self.g[idx])

    def with_overrides(self, overrides: Mapping[str, Mapping[str, float]]) -> 'MugProfile':
        """ Values supplied for a variable (e.g. from a previous linkage) replace the estimates. """
        m, u, g = (np.array(arr, copy=True) for arr in (self.m, self.u, self.g))
        for variable, values in overrides.items():
            if variable not in self.variables:
                continue
            idx = self.variables.index(variable)
            m[idx], u[idx], g[idx] = values['m'], values['u'], values['g']
        return MugProfile(self.variables, m, u, g)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'variable': self.variables, 'm': self.m, 'u': self.u, 'g': self.g})

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> 'MugProfile':
        missing_cols = {'variable', 'm', 'u', 'g'} - set(frame.columns)
        if missing_cols:
            raise ConfigurationError(f'm/u/g table lacks columns: {", ".join(sorted(missing_cols))}')
        return cls(tuple(frame['variable']), frame['m'], frame['u'], frame['g'])

    @classmethod
    def from_csv(cls, path) -> 'MugProfile':
        return cls.from_frame(pd.read_csv(path))

    def as_overrides(self) -> dict[str, dict[str, float]]:
        return {var: dict(zip(('m', 'u', 'g'), self[var])) for var in self.variables}


@dataclass(frozen=True, eq=False)
class TransitionParams:
    """ Per-variable kernel probabilities.  q3 is always 1. """
    variables: tuple
    p1: np.ndarray
    p2: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray

    def __post_init__(self):
        for name in ('p1', 'p2', 'q1', 'q2', 'q3'):
            arr = np.array(getattr(self, name), dtype=float, copy=True).reshape(-1)
            if arr.shape != (len(self.variables),):
                raise ConfigurationError(f'`{name}` needs one value per variable.')
            if ((arr < 0) | (arr > 1) | np.isnan(arr)).any():
                raise ConfigurationError(f'`{name}` values must be probabilities, got {arr.tolist()}.')
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.q3 == 1).all():
            raise ConfigurationError('q3 must be 1.')
        object.__setattr__(self, 'variables', tuple(self.variables))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'variable': self.variables, 'p1': self.p1, 'p2': self.p2,
                             'q1': self.q1, 'q2': self.q2, 'q3': self.q3})


@dataclass(frozen=True, eq=False)
class LinkSet:
    """
    A 1-1 partial mapping of X indices onto Y indices.  Every accepted link carried a composite
    weight strictly above `cutoff`.
    """
    n_x: int
    x_index: np.ndarray
    y_index: np.ndarray
    weight: np.ndarray
    cutoff: float = 0.0

    def __post_init__(self):
        x_index = np.asarray(self.x_index, dtype=int).reshape(-1)
        y_index = np.asarray(self.y_index, dtype=int).reshape(-1)
        weight = np.asarray(self.weight, dtype=float).reshape(-1)
        if not (len(x_index) == len(y_index) == len(weight)):
            raise ConfigurationError('Link arrays must have equal lengths.')
        if len(np.unique(x_index)) != len(x_index) or len(np.unique(y_index)) != len(y_index):
            raise ConfigurationError('Links must be 1-1: an X or Y index appears twice.')
        if len(x_index) and (x_index.min() < 0 or x_index.max() >= self.n_x):
            raise ConfigurationError('Link X index outside the file.')
        if len(weight) and not (weight > self.cutoff).all():
            raise ConfigurationError('Every link must weigh more than its cutoff.')
        for name, arr in (('x_index', x_index), ('y_index', y_index), ('weight', weight)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.x_index)

    @property
    def pairs(self) -> set[tuple[int, int]]:
        return set(zip(self.x_index.tolist(), self.y_index.tolist()))

    @property
    def unlinked_x(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_x), self.x_index)

    def partners(self) -> np.ndarray:
        """ Y partner of every X index, -1 where unlinked. """
        partners = np.full(self.n_x, -1, dtype=int)
        partners[self.x_index] = self.y_index
        return partners

    def to_frame(self, x_ids: Sequence, y_ids: Sequence) -> pd.DataFrame:
        x_ids, y_ids = np.asarray(x_ids), np.asarray(y_ids)
        return pd.DataFrame({
            'x_entity_id': x_ids[self.x_index] if len(self) else [],
            'y_entity_id': y_ids[self.y_index] if len(self) else [],
            'weight': self.weight,
        })


# Functions
# =-=-=-=-=
def canonicalize_alignment(pair: AlignedPair) -> AlignedPair:
    """
    Reorders Y so the true match of X record i is Y record i; the Y records nobody in X
    matches follow in their original order.
    """
    matched = pair.alignment.tolist()
    taken = set(matched)
    order = matched + [j for j in range(len(pair.file_y)) if j not in taken]
    return AlignedPair(pair.file_x, pair.file_y.take(order), np.arange(len(pair.file_x)))
