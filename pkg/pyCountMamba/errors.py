# -*- coding: utf-8 -*-
"""Exceptions raised by pyCountMamba"""


class CountMambaError(Exception):
    """Base class for all library errors"""


class InvalidArgumentError(CountMambaError, ValueError):
    """Bad dimensions, shapes or parameter values"""


class NumericDomainError(CountMambaError, ArithmeticError):
    """Non-finite values where finite ones are required"""


class ConfigError(CountMambaError, ValueError):
    """Unknown or invalid configuration"""


class CheckpointError(CountMambaError, ValueError):
    """Checkpoint cannot be read or does not fit the model"""


class DatasetError(CountMambaError, ValueError):
    """Dataset missing, empty or not writable"""


class AnnotationParseError(CountMambaError, ValueError):
    """Malformed row in an annotation file"""

    def __init__(self, path, line, reason):
        super(AnnotationParseError, self).__init__(
            "{}:{}: {}".format(path, line, reason))
        self.path = path
        self.line = line
        self.reason = reason
