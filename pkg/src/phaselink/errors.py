"""Exception types shared across the package."""


class PhaselinkError(Exception):
    """Base class for all package-specific errors."""


class DomainError(PhaselinkError, ValueError):
    """Argument outside the mathematical domain of a function."""


class NonTurbulentChannel(PhaselinkError):
    """Turbulence-derived quantity requested for a channel with cn2 = 0."""


class RegimeViolation(PhaselinkError):
    """Free-space distance at or beyond the model's validity limit."""


class BadJitterSpec(PhaselinkError, ValueError):
    """Jitter specification with a negative excursion bound."""


class EstimatorCollapse(PhaselinkError):
    """Decoy estimator produced a non-positive single-photon gain bound."""


class DegenerateIntensities(PhaselinkError, ValueError):
    """Signal and decoy intensities do not satisfy mu > nu > 0."""


class InsufficientStatistics(PhaselinkError):
    """Empirical batch lacks the clicks needed to form observables."""


class KeyPoolExhausted(PhaselinkError):
    """Key pool balance cannot cover a requested debit."""


class EmptySift(PhaselinkError):
    """Security check invoked with no kept records."""


class FrameLost(PhaselinkError):
    """At least one coded-bit group has zero surviving chips."""


class FrameCorrupt(PhaselinkError):
    """Error-correction decoding failed for a received frame."""


class NegativeBalance(PhaselinkError):
    """Key ledger conservation violated; indicates an internal bug."""


class Abort(PhaselinkError):
    """Session aborted by the security check."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class TransportClosed(PhaselinkError):
    """Read or write attempted on a closed transport."""


class ConfigError(PhaselinkError, ValueError):
    """Scenario configuration is malformed or incomplete."""
