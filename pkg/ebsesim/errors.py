import typing


class EbseError(Exception):
    """Base class for every error raised by ebsesim."""


class DimensionError(EbseError, ValueError):

    def __init__(self, operand: str, expected: typing.Any, actual: typing.Any):
        super().__init__(f'{operand}: expected shape {expected}, got {actual}')
        self.operand = operand
        self.expected = expected
        self.actual = actual


class ScenarioError(EbseError, ValueError):

    def __init__(self, message: str, path: typing.Optional[str] = None):
        super().__init__(f'{path}: {message}' if path else message)
        self.path = path


class UnstableObserverError(EbseError):
    pass


class ConvergenceError(EbseError):
    pass


class CertificateError(EbseError, ValueError):
    pass


class RoleError(EbseError):
    pass


class RecursionMismatchError(EbseError):
    pass
