from dataclasses import dataclass

from django.conf import settings

from records.data import AgreementMatrix, LinkageMode
from records.errors import ConfigurationError


@dataclass(frozen=True)
class ChainConfig:
    """ S retained samples, one every d kernel steps: sample s is the state after s * d steps. """
    n_samples: int = getattr(settings, 'MACSIM_DEFAULT_SAMPLES', 1000)
    thinning: int = getattr(settings, 'MACSIM_DEFAULT_THINNING', 1000)
    seed: int = getattr(settings, 'MACSIM_DEFAULT_SEED', 0)
    mode: str = LinkageMode.EXTENDED

    def __post_init__(self):
        if int(self.n_samples) < 1:
            raise ConfigurationError(f'At least one sample is required, got {self.n_samples}.')
        if int(self.thinning) < 1:
            raise ConfigurationError(f'Thinning must be a positive integer, got {self.thinning}.')
        if int(self.seed) < 0:
            raise ConfigurationError(f'Seeds must be non-negative, got {self.seed}.')

    @property
    def total_steps(self) -> int:
        return self.n_samples * self.thinning


@dataclass(frozen=True, eq=False)
class ChainSample:
    index: int  # s, 1-based
    step: int  # kernel steps taken when the snapshot was made
    matrix: AgreementMatrix
    distance: float  # to sample 1
    distance_to_initial: float  # to A0
