from dataclasses import dataclass

import numpy as np

from records.errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """ Composite weight W[i, j] of every (X record, Y record) pair of a block. """
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise ConfigurationError(f'Weight matrices are 2-D, got shape {values.shape}.')
        if not np.isfinite(values).all():
            raise ConfigurationError('Composite weights must be finite.')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def dims(self) -> tuple[int, int]:
        return self.values.shape
