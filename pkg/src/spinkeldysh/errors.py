"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI reports when it escapes a
``run``/``validate`` invocation.
"""

EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4


class SpinKeldyshError(Exception):
    """Base class for all errors raised by spinkeldysh."""

    exit_code = 1


class ConfigParseError(SpinKeldyshError):
    exit_code = EXIT_PARSE


class ConfigValidationError(SpinKeldyshError, ValueError):
    exit_code = EXIT_VALIDATION


class HamiltonianError(SpinKeldyshError, ValueError):
    exit_code = EXIT_VALIDATION


class SameSiteProduct(HamiltonianError):
    """A term multiplies two spin components on one site."""


class BadSiteIndex(HamiltonianError):
    pass


class BadComponent(HamiltonianError):
    pass


class BadLattice(HamiltonianError):
    pass


class DimensionMismatch(SpinKeldyshError, ValueError):
    exit_code = EXIT_VALIDATION


class InvalidBlochPoint(SpinKeldyshError, ValueError):
    exit_code = EXIT_VALIDATION


class TooFewNodes(SpinKeldyshError, ValueError):
    exit_code = EXIT_VALIDATION


class InvalidContour(SpinKeldyshError, ValueError):
    exit_code = EXIT_VALIDATION


class InvalidOrderingDomain(SpinKeldyshError, ValueError):
    exit_code = EXIT_VALIDATION


class DegenerateAbscissas(SpinKeldyshError, ValueError):
    exit_code = EXIT_VALIDATION


class NonIntegralTime(SpinKeldyshError, ValueError):
    exit_code = EXIT_VALIDATION


class QuadratureConvergenceError(SpinKeldyshError, ArithmeticError):
    exit_code = EXIT_NUMERICAL


class ZeroOverlap(SpinKeldyshError, ArithmeticError):
    """Two adjacent path points are orthogonal coherent states."""

    exit_code = EXIT_NUMERICAL


class SignCollapse(SpinKeldyshError, RuntimeWarning):
    """Average sign indistinguishable from zero.

    Only used as a label: estimates are still returned, flagged unreliable.
    """

    exit_code = 0


def error_record(exc: BaseException) -> dict:
    """Machine-readable description of an error for the CLI."""
    return {
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": getattr(exc, "exit_code", 1),
    }
