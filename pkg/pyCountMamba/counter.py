# -*- coding: utf-8 -*-
"""Counter and Normalizer.

The counter predicts one count per r x r window anchored on the
stride-s lattice (top-left corner (a*s, b*s), clipped to the image).
The normalizer spreads every window count uniformly over the window's
pixels and divides by the number of windows covering each pixel, so the
normalized map of an H x W image sums to the image count.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from PIL import Image, PngImagePlugin

from .errors import InvalidArgumentError
from .const import (
    LOGGER,
    DEFAULT_WINDOW,
    DEFAULT_STRIDE,
    HEAD_INIT_BIAS,
    HEAD_INIT_SCALE,
    PNG_VMAX_KEY,
    PNG_SUM_KEY
)


def check_geometry(height, width, window, stride):
    if window < stride:
        raise InvalidArgumentError(
            "Window size r={} must not be smaller than stride s={}".format(
                window, stride))
    if stride < 1 or height < 1 or width < 1:
        raise InvalidArgumentError("Dimensions and stride must be positive")
    if height % stride or width % stride:
        raise InvalidArgumentError(
            "Image {}x{} is not divisible by stride {}".format(
                height, width, stride))


@dataclass
class RedundantCountMap:
    values: torch.Tensor    # (..., H/s, W/s)
    window: int = DEFAULT_WINDOW
    stride: int = DEFAULT_STRIDE
    height: int = 0
    width: int = 0

    def __post_init__(self):
        check_geometry(self.height, self.width, self.window, self.stride)
        expected = (self.height // self.stride, self.width // self.stride)
        if tuple(self.values.shape[-2:]) != expected:
            raise InvalidArgumentError(
                "Count map {} does not match {}x{} image at stride {}".format(
                    tuple(self.values.shape), self.height, self.width,
                    self.stride))


@dataclass
class NormalizedCountMap:
    values: torch.Tensor    # (..., H, W)


@lru_cache(maxsize=64)
def _membership(length, window, stride):
    """(length, length/stride) 0/1 matrix: pixel p lies in window a"""
    member = np.zeros((length, length // stride))
    for a in range(length // stride):
        member[a * stride:min(a * stride + window, length), a] = 1.0
    member.flags.writeable = False
    return member


def _axis(length, window, stride, like):
    return torch.tensor(_membership(length, window, stride),
                        dtype=like.dtype, device=like.device)


def coverage_map(height, width, window, stride):
    """Per-pixel number of windows containing the pixel, (H, W) int64"""
    check_geometry(height, width, window, stride)
    rows = _membership(height, window, stride).sum(axis=1)
    cols = _membership(width, window, stride).sum(axis=1)
    return torch.as_tensor(np.outer(rows, cols).astype(np.int64))


def window_areas(height, width, window, stride):
    """Clipped pixel area of every window, (H/s, W/s)"""
    check_geometry(height, width, window, stride)
    rows = _membership(height, window, stride).sum(axis=0)
    cols = _membership(width, window, stride).sum(axis=0)
    return torch.as_tensor(np.outer(rows, cols))


def normalize_map(count_map):
    """C_n(p) = [sum_{w contains p} C_r(w) / area(w)] / coverage(p)"""
    values = count_map.values
    rows = _axis(count_map.height, count_map.window, count_map.stride, values)
    cols = _axis(count_map.width, count_map.window, count_map.stride, values)
    area = rows.sum(0)[:, None] * cols.sum(0)[None, :]
    coverage = rows.sum(1)[:, None] * cols.sum(1)[None, :]
    spread = rows @ (values / area) @ cols.transpose(0, 1)
    return NormalizedCountMap(spread / coverage)


def image_count(normalized):
    """C = sum over all pixels of C_n"""
    values = normalized.values if isinstance(normalized, NormalizedCountMap) \
        else normalized
    return values.sum(dim=(-2, -1))


def window_counts_from_dots(dots, height, width, window=DEFAULT_WINDOW,
                            stride=DEFAULT_STRIDE, dtype=None):
    """G(a, b) = number of dots inside window (a*s, b*s), clipped"""
    check_geometry(height, width, window, stride)
    dots = np.asarray(dots, dtype=np.float64).reshape(-1, 2)
    xs, ys = dots[:, 0], dots[:, 1]
    outside = (xs < 0) | (xs >= width) | (ys < 0) | (ys >= height)
    if outside.any():
        raise InvalidArgumentError(
            "Dot {} lies outside the {}x{} image".format(
                tuple(dots[outside][0]), width, height))
    rows = _membership(height, window, stride)[np.floor(ys).astype(int)]
    cols = _membership(width, window, stride)[np.floor(xs).astype(int)]
    counts = rows.T @ cols
    values = torch.as_tensor(counts, dtype=dtype or torch.get_default_dtype())
    return RedundantCountMap(values, window, stride, height, width)


class Counter(nn.Module):
    """Two 1x1 convolutions with silu between, clamped at zero"""

    def __init__(self, dim, hidden=None):
        super(Counter, self).__init__()
        hidden = hidden or max(dim // 2, 1)
        # 1x1 convs on a channels-last grid are per-cell linear maps
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, 1)
        # the relu clamp must start open at every window
        with torch.no_grad():
            self.fc2.weight.mul_(HEAD_INIT_SCALE)
            self.fc2.bias.fill_(HEAD_INIT_BIAS)

    def forward(self, features):
        """(B, H/s, W/s, C) -> (B, H/s, W/s)"""
        return F.relu(self.fc2(F.silu(self.fc1(features)))).squeeze(-1)


def predict_redundant_map(features, head, height, width,
                          window=DEFAULT_WINDOW, stride=DEFAULT_STRIDE):
    if tuple(features.shape[1:3]) != (height // stride, width // stride):
        raise InvalidArgumentError(
            "Features {} do not match {}x{} image at stride {}".format(
                tuple(features.shape), height, width, stride))
    return RedundantCountMap(head(features), window, stride, height, width)


def save_map_text(values, path):
    """One row per line, space-separated %.12f decimals"""
    values = np.asarray(values, dtype=np.float64)
    with open(path, 'w') as fh:
        for row in values:
            fh.write(' '.join('%.12f' % v for v in row) + '\n')
    LOGGER.debug("Wrote text map %s", path)


def load_map_text(path):
    with open(path) as fh:
        return np.array([[float(v) for v in line.split()]
                         for line in fh if line.strip()])


def save_map_png(values, path):
    """16-bit grayscale, pixel = round(value / vmax * 65535)"""
    values = np.clip(np.asarray(values, dtype=np.float64), 0, None)
    vmax = float(values.max()) if values.size and values.max() > 0 else 1.0
    pixels = np.round(values / vmax * 65535).astype(np.uint16)
    info = PngImagePlugin.PngInfo()
    info.add_text(PNG_VMAX_KEY, repr(vmax))
    info.add_text(PNG_SUM_KEY, repr(float(values.sum())))
    Image.fromarray(pixels).save(path, pnginfo=info)
    LOGGER.debug("Wrote png map %s (vmax %s)", path, vmax)


def load_map_png(path):
    with Image.open(path) as img:
        vmax = float(img.text[PNG_VMAX_KEY])
        pixels = np.asarray(img, dtype=np.float64)
    return pixels / 65535 * vmax
