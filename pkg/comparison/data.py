from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from django.utils.text import slugify

from records.data import VariableSpec, LinkageMode
from records.errors import ConfigurationError
from records.utils import as_plain_number


@dataclass(frozen=True, eq=False)
class Threshold:
    """ Agreement threshold theta = 1 - delta / T for each linking variable. """
    variables: tuple
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float, copy=True).reshape(-1)
        if theta.shape != (len(self.variables),):
            raise ConfigurationError('One threshold per variable is required.')
        if ((theta <= 0.5) | (theta > 1)).any():
            raise ConfigurationError(f'Thresholds must lie in (0.5, 1], got {theta.tolist()}.')
        theta.setflags(write=False)
        object.__setattr__(self, 'theta', theta)
        object.__setattr__(self, 'variables', tuple(self.variables))

    def __getitem__(self, variable: str) -> float:
        return float(self.theta[self.variables.index(variable)])

    @classmethod
    def from_specs(cls, specs: Sequence[VariableSpec], mode: str = LinkageMode.EXTENDED) -> 'Threshold':
        # deferred: comparison.utils imports this module
        from comparison.utils import threshold
        if mode == LinkageMode.ORIGINAL:
            return cls(tuple(s.name for s in specs), np.ones(len(specs)))
        return cls(tuple(s.name for s in specs), [threshold(spec) for spec in specs])


def _slug_value(value) -> str:
    """ Spells a key value for a directory name, keeping signs and decimal points apart: -1.5 -> m1p5. """
    return str(as_plain_number(value)).replace('-', 'm').replace('.', 'p')


@dataclass(frozen=True, eq=False)
class Block:
    """
    One block of the partition.  `x_indices[k]` is truly matched to `y_indices[k]` for every
    k < len(x_indices); the remaining Y members follow in file order.  X members whose true
    match landed in another block are `orphans` and take no part in the assessment.
    """
    key: tuple
    x_indices: np.ndarray
    y_indices: np.ndarray
    orphans: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    variables: tuple = ()
    # records with a missing blocking value sit alone in a residual block keyed (file, entity id)
    residual: bool = False

    @property
    def n_x(self) -> int:
        return len(self.x_indices)

    @property
    def n_y(self) -> int:
        return len(self.y_indices)

    @property
    def label(self) -> str:
        if self.residual:
            return f'missing {" & ".join(self.variables)} ({self.key[0]} record {self.key[1]})'
        if not self.variables:
            return 'all'
        return ' & '.join(f'{var}={as_plain_number(val)}' for var, val in zip(self.variables, self.key))

    @property
    def slug(self) -> str:
        if self.residual:
            return slugify(f'missing-{self.key[0]}-{_slug_value(self.key[1])}')
        if not self.variables:
            return 'all'
        return '_'.join(slugify(f'{var}-{_slug_value(val)}') for var, val in zip(self.variables, self.key))

    @property
    def is_assessable(self) -> bool:
        return self.n_x > 0


@dataclass(frozen=True)
class BlockPartition:
    blocking_variables: tuple
    blocks: tuple

    def __post_init__(self):
        slugs = [block.slug for block in self.blocks]
        if len(set(slugs)) != len(slugs):
            clashes = sorted({slug for slug in slugs if slugs.count(slug) > 1})
            raise ConfigurationError(f'Blocks share output directories: {", ".join(clashes)}')

    def __iter__(self):
        return iter(self.blocks)

    def __len__(self):
        return len(self.blocks)

    @property
    def assessable(self) -> list[Block]:
        return [block for block in self.blocks if block.is_assessable]
