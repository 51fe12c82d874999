# -*- coding: utf-8 -*-
# pylint: disable=broad-except

import os
import random
import traceback
from datetime import datetime

import numpy as np
import torch

from .errors import InvalidArgumentError, NumericDomainError, DatasetError
from .const import (
    LOGGER,
    DIRECTIONS,
    ENV_OUTPUT_ROOT
)

DTYPES = {
    'float32': torch.float32,
    'float64': torch.float64,
}


class timer():
    def __init__(self, interval):
        self._interval = interval
        self._last_time = None

    def check(self):
        if self._interval is not None:
            now = datetime.now()
            if self._last_time is None or \
                    now - self._last_time > self._interval:
                self._last_time = now
                return True
        return False


def exception_log(ex, _msg, *args):
    """Log exception"""
    msg = _msg.format(*args)
    try:
        msg += ", " + str(ex) + ", " + traceback.format_exc()
        LOGGER.exception(msg)
    except Exception as ex:
        LOGGER.error("Exception log error %s", ex)


def set_seed(seed, threads=None):
    """Seed every RNG a training run touches"""
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    if threads:
        torch.set_num_threads(threads)


def resolve_dtype(name):
    try:
        return DTYPES[name]
    except KeyError:
        raise InvalidArgumentError(
            "Unknown dtype {}, expected one of {}".format(
                name, sorted(DTYPES)))


def parse_directions(value):
    """'HVDA', 'H,V' or ['H', 'V'] -> ordered, de-duplicated list"""
    if isinstance(value, str):
        value = [c for c in value.replace(',', '').replace(' ', '').upper()]
    dirs = []
    for item in value:
        if item not in DIRECTIONS:
            raise InvalidArgumentError(
                "Unknown scan direction {!r}".format(item))
        if item not in dirs:
            dirs.append(item)
    if not dirs:
        raise InvalidArgumentError("Direction subset must be nonempty")
    return [d for d in DIRECTIONS if d in dirs]


def check_finite(tensor, what):
    if not torch.isfinite(tensor).all():
        raise NumericDomainError("Non-finite values in {}".format(what))


def check_dims(name, value, multiple=1):
    if int(value) != value or value < 1:
        raise InvalidArgumentError(
            "{} must be a positive integer, got {}".format(name, value))
    if value % multiple:
        raise InvalidArgumentError(
            "{}={} is not divisible by {}".format(name, value, multiple))


def zero_biases(module):
    """Zero every bias (used for the blank-image identities)"""
    with torch.no_grad():
        for name, param in module.named_parameters():
            if name.endswith('bias'):
                param.zero_()
    return module


def output_dir(path, default_name):
    """Resolve an output directory, falling back to $COUNTMAMBA_OUTPUT"""
    if path:
        return path
    root = os.environ.get(ENV_OUTPUT_ROOT)
    if not root:
        raise DatasetError(
            "No output directory given and {} is not set".format(
                ENV_OUTPUT_ROOT))
    return os.path.join(root, default_name)


def prepare_output_dir(path, force=False):
    if os.path.isdir(path) and os.listdir(path) and not force:
        raise DatasetError(
            "Output directory {} is not empty (use --force)".format(path))
    os.makedirs(path, exist_ok=True)
    return path
