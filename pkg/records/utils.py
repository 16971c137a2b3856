from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

# Constants
# =-=-=-=-=
# internal marker for a missing comparison (raw files may spell it 0 or -1)
MISSING = np.nan

# exit codes of the management commands (0 on success)
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_IO = 3


# Types/Enums/Etc
# =-=-=-=-=-=-=-=
class ErrorLevel(Enum):
    OK = 0
    EMPTY = 1
    WARNING = 10
    ERROR = 100


@dataclass
class ErrorRecord:
    level: ErrorLevel
    message: Optional[str] = None

    def as_dict(self):
        """ The status columns of a report row. """
        return {
            'status': self.level.name,
            'message': self.message or '',
        }


# Functions
# =-=-=-=-=
def is_missing(value) -> bool:
    """ True for None and NaN, the two spellings of 'missing' the library accepts. """
    if value is None:
        return True
    try:
        return bool(np.isnan(value))
    except TypeError:
        return False


def as_plain_number(value):
    """ Integral floats become ints so keys and ids print the way they were written. """
    if isinstance(value, (float, np.floating)) and float(value).is_integer():
        return int(value)
    if isinstance(value, np.integer):
        return int(value)
    return value
