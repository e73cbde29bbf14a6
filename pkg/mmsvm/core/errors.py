"""Error hierarchy shared by the library, the CLI and the HTTP surface.

Each error carries the process exit code the CLI reports for it.
"""


class MMSVMError(Exception):
    exit_code = 5


class ConfigError(MMSVMError):
    exit_code = 2


class DimensionMismatchError(MMSVMError, ValueError):
    exit_code = 2


class DatasetError(MMSVMError):
    exit_code = 3


class ParseError(DatasetError):
    def __init__(self, message: str, line_number: int) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DivergenceError(MMSVMError):
    exit_code = 4

    def __init__(self, method: str, epoch: int, reason: str) -> None:
        super().__init__(f"{method} diverged at epoch {epoch}: {reason}")
        self.method = method
        self.epoch = epoch


class MonotonicityError(MMSVMError):
    exit_code = 5

    def __init__(self, method: str, epoch: int, previous: float, current: float) -> None:
        super().__init__(
            f"{method} increased the objective at epoch {epoch}: "
            f"{previous!r} -> {current!r}"
        )
        self.method = method
        self.epoch = epoch


class LinalgError(MMSVMError):
    exit_code = 5


class NonFiniteError(LinalgError, ValueError):
    pass


class NotSymmetricError(LinalgError, ValueError):
    pass


class NotPositiveDefiniteError(LinalgError):
    pass
