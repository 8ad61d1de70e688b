"""Certified computations around Robin's inequality.

Submodules: highprec (interval reals), arith (factorization and exact
ratios), primes (segmented sieve and the beta_max search), exception_finder,
ca (colossally abundant numbers), families, bulk (range scans) and cli.
"""

__version__ = "0.1.0"

from .arith import Factorization, Verdict, factorize, robin_check  # noqa: E402
from .errors import (  # noqa: E402
    CapacityError,
    CheckpointError,
    DomainError,
    InvalidArgumentError,
    PrecisionError,
    RobinKitError,
)
from .highprec import CertifiedOrder, IntervalReal  # noqa: E402
