# -*- coding: utf-8 -*-
"""Scan orders over a 2D patch grid.

A ScanOrder is a permutation of the row-major cell indices of a
height_p x width_p grid. Position k of a scanned sequence holds cell
forward[k]; inverse maps a cell back to its position.
"""

import csv
from functools import lru_cache

import numpy as np
import torch

from .errors import InvalidArgumentError
from .utils import check_dims
from .const import (
    LOGGER,
    DIRECTIONS,
    DIRECTION_NAMES,
    DIRECTION_HORIZONTAL,
    DIRECTION_VERTICAL,
    DIRECTION_DIAGONAL,
    DIRECTION_ANTIDIAGONAL
)


class ScanOrder(object):
    """Immutable traversal of a grid"""

    def __init__(self, direction, height_p, width_p, forward, backward=False):
        forward = np.array(forward, dtype=np.int64)
        if forward.shape != (height_p * width_p,):
            raise InvalidArgumentError(
                "Order of length {} does not fit a {}x{} grid".format(
                    forward.size, height_p, width_p))
        inverse = np.empty_like(forward)
        inverse[forward] = np.arange(forward.size)
        forward.flags.writeable = False
        inverse.flags.writeable = False
        self.direction = direction
        self.height_p = height_p
        self.width_p = width_p
        self.backward = backward
        self.forward = forward
        self.inverse = inverse
        self._index = {}

    def __len__(self):
        return self.forward.size

    def __eq__(self, other):
        return isinstance(other, ScanOrder) and \
            self.shape == other.shape and \
            np.array_equal(self.forward, other.forward)

    def __hash__(self):
        return hash((self.shape, self.forward.tobytes()))

    def __repr__(self):
        return "ScanOrder({}{}, {}x{})".format(
            DIRECTION_NAMES.get(self.direction, self.direction),
            ", backward" if self.backward else "",
            self.height_p, self.width_p)

    @property
    def shape(self):
        return (self.height_p, self.width_p)

    def reversed(self):
        """Backward orientation: the forward array read back to front"""
        return ScanOrder(self.direction, self.height_p, self.width_p,
                         self.forward[::-1], not self.backward)

    def cells(self):
        """(row, col) of every scan position"""
        return np.stack(np.divmod(self.forward, self.width_p), axis=1)

    def index(self, which, device):
        """Index tensor cached per device"""
        key = (which, str(device))
        if key not in self._index:
            values = self.forward if which == 'forward' else self.inverse
            self._index[key] = torch.tensor(values, device=device)
        return self._index[key]

    def to_csv(self, path):
        """Debug export of (k, row, col) triples"""
        with open(path, 'w', newline='') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(['k', 'row', 'col'])
            for k, (row, col) in enumerate(self.cells()):
                writer.writerow([k, int(row), int(col)])
        LOGGER.debug("Wrote %r to %s", self, path)


@lru_cache(maxsize=256)
def build_order(direction, height_p, width_p):
    """Forward traversal of a height_p x width_p grid.

    Diagonal walks lines of constant j - i from -(height_p - 1) up to
    width_p - 1, AntiDiagonal lines of constant i + j upwards; cells
    inside a line go by ascending row.
    """
    check_dims('height_p', height_p)
    check_dims('width_p', width_p)
    rows, cols = np.divmod(np.arange(height_p * width_p), width_p)
    if direction == DIRECTION_HORIZONTAL:
        forward = np.arange(height_p * width_p)
    elif direction == DIRECTION_VERTICAL:
        forward = np.lexsort((rows, cols))
    elif direction == DIRECTION_DIAGONAL:
        forward = np.lexsort((rows, cols - rows))
    elif direction == DIRECTION_ANTIDIAGONAL:
        forward = np.lexsort((rows, rows + cols))
    else:
        raise InvalidArgumentError(
            "Unknown scan direction {!r}, expected one of {}".format(
                direction, DIRECTIONS))
    return ScanOrder(direction, height_p, width_p, forward)


def _check_grid(grid, order):
    if grid.dim() < 3 or tuple(grid.shape[-3:-1]) != order.shape:
        raise InvalidArgumentError(
            "Grid of shape {} does not match {}".format(
                tuple(grid.shape), order))


def apply_order(grid, order):
    """(..., H, W, C) grid -> (..., H*W, C) sequence in scan order"""
    _check_grid(grid, order)
    seq = grid.reshape(*grid.shape[:-3], len(order), grid.shape[-1])
    return seq.index_select(-2, order.index('forward', grid.device))


def restore_grid(seq, order):
    """Inverse of apply_order"""
    if seq.dim() < 2 or seq.shape[-2] != len(order):
        raise InvalidArgumentError(
            "Sequence of shape {} does not match {}".format(
                tuple(seq.shape), order))
    flat = seq.index_select(-2, order.index('inverse', seq.device))
    return flat.reshape(*seq.shape[:-2], order.height_p, order.width_p,
                        seq.shape[-1])
