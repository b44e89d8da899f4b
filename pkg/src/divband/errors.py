"""Exception hierarchy and process exit codes."""


class DivbandError(Exception):
    """Base class for all library errors."""


class ConfigError(DivbandError):
    """Malformed or inconsistent run configuration."""


class GridMismatch(DivbandError):
    """Operands are tabulated on different grids."""


class NonPositiveVariance(DivbandError):
    """Gaussian variance must be strictly positive."""


class ZeroMass(DivbandError):
    """Measure with zero total mass cannot be normalized."""


class ZeroDirection(DivbandError):
    """Clipping direction carries no mass."""


class NumericalNegativity(DivbandError):
    """A divergence integral came out significantly negative."""


class NonSmoothFamily(DivbandError):
    """Operation requires a strictly increasing, continuous f'."""


class InfeasibleBand(DivbandError):
    """Band admits no probability density (lower mass > 1 or upper mass < 1)."""


class BracketFailure(DivbandError):
    """A scalar bisection could not bracket its root."""


class NoConvergence(DivbandError):
    """Iteration budget exhausted before reaching tolerance."""


class DegenerateOverlap(DivbandError):
    """Uncertainty sets overlap: the least favorable densities coincide."""


class OutOfDomain(DivbandError):
    """Evaluation point lies outside the grid range."""


class InvalidTrialCount(DivbandError):
    """Monte Carlo runs require at least 1000 trials."""


class GridTooLarge(DivbandError):
    """Tensor-product grid would not fit in memory."""


class TooLarge(DivbandError):
    """Brute-force enumeration exceeds its size limits."""


class EmptyClipRegion(DivbandError):
    """No grid points carry the requested clip label."""


# CLI exit codes, one per documented error class.
EXIT_CODES = {
    ConfigError: 2,
    NoConvergence: 3,
    DegenerateOverlap: 4,
    InfeasibleBand: 5,
    NonSmoothFamily: 6,
    OSError: 7,
}


def exit_code_for(exc: BaseException) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 1
