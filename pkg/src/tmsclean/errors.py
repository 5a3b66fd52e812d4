"""Error taxonomy shared by the library and the CLI.

Exit-code mapping (see cli): ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class TmscleanError(Exception):
    """Base class; carries a short machine-readable code."""

    exit_code = 1

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class ConfigError(TmscleanError):
    exit_code = 2


class DataError(TmscleanError):
    exit_code = 3


class NumericalError(TmscleanError):
    exit_code = 4
