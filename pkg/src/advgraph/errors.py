"""Error taxonomy shared by the library and the command line tool.

The CLI maps these onto process exit codes, so everything raised on a
user-reachable path should be one of the three classes below.
"""


class ConfigError(Exception):
    """Bad flags, bad config keys, or an inconsistent run setup. Exit code 1."""


class DataError(Exception):
    """Unreadable or malformed input data, or impossible data requests. Exit code 2."""


class NumericError(Exception):
    """Non-finite losses or failed numeric checks during a run. Exit code 3."""
