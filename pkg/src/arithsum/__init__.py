"""Numerical verification of Euler-Maclaurin and Poisson type summation identities
with periodic and divisor weights."""
from .arith import GuardError, PeriodicSequence, divisor_sieve, tau
from .formulae import IdentityResult, TruncationParams, direct_sum
from .smoothfn import BivariateFunction, SmoothFunction

__version__ = "0.1.0"

__all__ = [
    "BivariateFunction",
    "GuardError",
    "IdentityResult",
    "PeriodicSequence",
    "SmoothFunction",
    "TruncationParams",
    "direct_sum",
    "divisor_sieve",
    "tau",
]
