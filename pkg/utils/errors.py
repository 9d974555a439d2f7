import logging
from typing import Dict, Optional

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_NOT_CONVERGED = 2
EXIT_INVALID = 3


class MeanFieldError(Exception):
    """Base class for every error raised by the mean field toolkit.

    Carries the process exit code the command line maps it to, plus an
    optional ``details`` dict that ends up in the run manifest.
    """

    exit_code = EXIT_FAILURE

    def __init__(self, message: str, exit_code: Optional[int] = None, details: Optional[Dict] = None):
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict:
        return {
            'error_type': type(self).__name__,
            'message': self.message,
            'exit_code': self.exit_code,
            'details': self.details,
        }


class InvalidConfigurationError(MeanFieldError):
    """Bad grid size, grading, parameter range or configuration file."""
    exit_code = EXIT_INVALID


class DomainError(MeanFieldError):
    """Argument outside the mathematical domain of an operation."""
    exit_code = EXIT_INVALID


class UnsupportedConfigurationError(MeanFieldError):
    """Valid input the radial toolkit cannot represent (e.g. off-center poles)."""
    exit_code = EXIT_INVALID


class RangeError(MeanFieldError):
    """Field values large enough to overflow the exponential."""
    exit_code = EXIT_INVALID


class SingularSystemError(MeanFieldError):
    exit_code = EXIT_FAILURE
