"""Exception hierarchy with machine-readable codes and CLI exit statuses."""

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ASSUMPTION = 4


class DelayAverageError(Exception):
    """Base class for every error raised by the toolkit.

    Attributes:
        code: Stable machine-readable identifier, used in JSON error reports.
        exit_code: Process exit status the CLI uses for this error.
    """

    code = "error"
    exit_code = 1


class ConfigError(DelayAverageError):
    """Invalid configuration, model description, or step size."""

    code = "config"
    exit_code = EXIT_CONFIG


class DomainError(ConfigError):
    """An operation was called outside its domain (lag off the segment, wrong model kind)."""

    code = "domain"


class NumericFailure(DelayAverageError):
    """A numerical procedure failed (NaN, overflow, non-convergence)."""

    code = "numeric"
    exit_code = EXIT_NUMERIC


class DecayNotReached(NumericFailure):
    """A cached fundamental solution did not decay below tolerance within the horizon."""

    code = "decay-not-reached"


class WindowTooSmall(NumericFailure):
    """Winding-number integrals on the census window did not converge."""

    code = "window-too-small"


class NotNormalizable(NumericFailure):
    """The stationary density has a nonpositive shape parameter."""

    code = "not-normalizable"


class AssumptionFailure(DelayAverageError):
    """The linear system is not at the verge of instability."""

    code = "assumption"
    exit_code = EXIT_ASSUMPTION


class NoCriticalPair(AssumptionFailure):
    """No characteristic root lies on the imaginary axis."""

    code = "no-critical-pair"


class UnstableExtraRoots(AssumptionFailure):
    """Roots other than the critical pair have nonnegative real part."""

    code = "unstable-extra-roots"


class DegenerateRoot(AssumptionFailure):
    """The critical root is not simple."""

    code = "degenerate-root"


class NoZeroRoot(AssumptionFailure):
    """Zero is not a root of the characteristic equation."""

    code = "no-zero-root"


class CenteringViolated(AssumptionFailure):
    """The O(epsilon) perturbation has a nonzero resonant average."""

    code = "centering-violated"
