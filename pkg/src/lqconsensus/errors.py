"""Exception types shared across the package."""


class LqConsensusError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(LqConsensusError):
    """Operands have incompatible shapes, or a matrix is not square."""


class NotStochastic(LqConsensusError):
    """A row of the matrix does not sum to 1 within tolerance."""


class NegativeEntry(LqConsensusError):
    """A matrix that must be nonnegative has a negative entry."""


class ZeroDiagonal(LqConsensusError):
    """A diagonal entry that must be strictly positive is zero (or below tolerance)."""


class NotIrreducible(LqConsensusError):
    """The directed support graph is not strongly connected."""


class NotSymmetric(LqConsensusError):
    """A matrix that must be symmetric is not, beyond tolerance."""


class Disconnected(LqConsensusError):
    """The undirected graph or resistor network is not connected."""


class NotReversible(LqConsensusError):
    """The operation requires detailed balance (symmetric Pi P), which fails here."""


class NotNormal(LqConsensusError):
    """The operation requires a normal matrix (P^T P = P P^T), which fails here."""


class SolveFailure(LqConsensusError):
    """A linear solve did not reach the required residual."""


class SteinDivergence(LqConsensusError):
    """The Stein fixed-point computation did not converge to tolerance."""


class OutOfRange(LqConsensusError):
    """A scalar parameter violates its documented range."""


class InvalidGenerator(LqConsensusError):
    """A Cayley generator violates its constraints (offsets, weights, or size)."""


class InvalidWeights(LqConsensusError):
    """Circle weights are outside the admissible region."""


class RejectionExhausted(LqConsensusError):
    """Rejection sampling hit its attempt cap without an acceptable draw."""


class InfeasibleDensity(LqConsensusError):
    """Node placement cannot fit the requested count at the required spacing."""


class ConfigError(LqConsensusError):
    """A command-line or config-file parameter is unknown or malformed."""
