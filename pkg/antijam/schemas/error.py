from typing import Any

from loguru import logger


class BaseError(Exception):
    """
    Base class for custom exceptions.

    Args:
        name (str): The name of the error.
        message (str): The error message.
        code (int): Process exit code the CLI uses when the error escapes.
        data (dict | None): Structured diagnostics attached to the error.
    """

    def __init__(
        self, name: str, message: str, code: int = 2, data: dict[str, Any] | None = None
    ):
        self.name = name
        self.message = message
        self.code = code
        self.data = data or {}
        super().__init__(self.message)


class InvalidVirtualAngleError(BaseError):
    """
    Exception raised when a virtual angle falls outside [-1, 1].

    Args:
        mu (float): Horizontal virtual angle.
        nu (float): Vertical virtual angle.
    """

    def __init__(self, mu: float, nu: float, name: str = "InvalidVirtualAngleError"):
        message = f"Virtual angles must lie in [-1, 1], got mu={mu}, nu={nu}"
        logger.warning(message)
        super().__init__(name=name, message=message, data={"mu": mu, "nu": nu})


class InvalidPathCountError(BaseError):
    def __init__(self, paths: int, name: str = "InvalidPathCountError"):
        message = f"A link needs at least one propagation path, got {paths}"
        logger.warning(message)
        super().__init__(name=name, message=message, data={"paths": paths})


class InvalidScenarioError(BaseError):
    """
    Exception raised when dimensions or arrays handed to an operation are inconsistent.

    Args:
        reason (str): Human readable description of the inconsistency.
    """

    def __init__(self, reason: str, name: str = "InvalidScenarioError"):
        logger.warning(f"Invalid scenario: {reason}")
        super().__init__(name=name, message=reason, data={"reason": reason})


class UnsupportedQuantizationBitsError(BaseError):
    def __init__(self, bits: int, name: str = "UnsupportedQuantizationBitsError"):
        message = f"No distortion factor tabulated for {bits} quantization bits (1..5)"
        logger.warning(message)
        super().__init__(name=name, message=message, data={"bits": bits})


class SingularCovarianceError(BaseError):
    """
    Exception raised when the pilot observation covariance cannot be inverted.

    Args:
        link (tuple[int, int]): The (AP, UE) pair being estimated.
        condition (float): Condition number of the offending matrix.
    """

    def __init__(
        self,
        link: tuple[int, int],
        condition: float,
        name: str = "SingularCovarianceError",
    ):
        message = (
            f"Observation covariance of link {link} is singular "
            f"(condition number {condition:.3e})"
        )
        logger.warning(message)
        super().__init__(
            name=name, message=message, data={"link": link, "condition": condition}
        )


class BrokenPsdInvariantError(BaseError):
    def __init__(
        self,
        label: str,
        min_eigenvalue: float,
        max_eigenvalue: float,
        name: str = "BrokenPsdInvariantError",
    ):
        message = (
            f"{label} is not positive semidefinite: smallest eigenvalue "
            f"{min_eigenvalue:.3e} against largest {max_eigenvalue:.3e}"
        )
        logger.warning(message)
        super().__init__(
            name=name,
            message=message,
            data={"label": label, "min": min_eigenvalue, "max": max_eigenvalue},
        )


class SingularOperandError(BaseError):
    def __init__(self, ue: int, name: str = "SingularOperandError"):
        message = f"Interference-plus-noise matrix of UE {ue} is numerically singular"
        logger.warning(message)
        super().__init__(name=name, message=message, data={"ue": ue})


class NonFiniteInputError(BaseError):
    def __init__(self, label: str, name: str = "NonFiniteInputError"):
        message = f"{label} contains NaN or infinite entries"
        logger.warning(message)
        super().__init__(name=name, message=message, data={"label": label})


class NumericalBreachError(BaseError):
    """
    Exception raised when a quantity leaves its mathematically admissible range.

    Args:
        label (str): What was being computed.
        value (float): The offending value.
    """

    def __init__(self, label: str, value: float, name: str = "NumericalBreachError"):
        message = f"{label} left its admissible range: {value!r}"
        logger.warning(message)
        super().__init__(name=name, message=message, data={"label": label, "value": value})


class BracketFailureError(BaseError):
    def __init__(
        self, label: str, low: float, high: float, name: str = "BracketFailureError"
    ):
        message = f"Could not bracket {label} within [{low:.3e}, {high:.3e}]"
        logger.warning(message)
        super().__init__(
            name=name, message=message, data={"label": label, "low": low, "high": high}
        )


class AlternationFailureError(BaseError):
    """
    Exception raised when a sub-operation fails inside an alternation.

    Args:
        alternation (int): Index of the alternation, starting at 1.
        cause (BaseError): The original failure.
    """

    def __init__(
        self, alternation: int, cause: BaseError, name: str = "AlternationFailureError"
    ):
        self.cause = cause
        message = f"Alternation {alternation} failed: {cause.name}: {cause.message}"
        logger.warning(message)
        super().__init__(
            name=name,
            message=message,
            data={"alternation": alternation, "cause": cause.name, **cause.data},
        )


class InvalidExperimentSpecError(BaseError):
    def __init__(self, reason: str, name: str = "InvalidExperimentSpecError"):
        logger.warning(f"Invalid experiment spec: {reason}")
        super().__init__(name=name, message=reason, data={"reason": reason})


class SchemaVersionError(BaseError):
    def __init__(self, found: int, expected: int, name: str = "SchemaVersionError"):
        message = f"Unsupported schema version {found}, expected {expected}"
        logger.warning(message)
        super().__init__(
            name=name, message=message, data={"found": found, "expected": expected}
        )


class MatrixFormatError(BaseError):
    def __init__(self, line: int, reason: str, name: str = "MatrixFormatError"):
        message = f"Malformed matrix file at line {line}: {reason}"
        logger.warning(message)
        super().__init__(name=name, message=message, data={"line": line})
