# -*- coding: utf-8 -*-
"""Global-Local Adaptive Fusion"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import InvalidArgumentError
from .utils import check_dims
from .const import (
    OUTPUT_STRIDE,
    DEFAULT_BETA,
    FUSION_POSITION,
    FUSION_POOLED
)


def _check_same_shape(grids):
    if not grids:
        raise InvalidArgumentError("At least one expert grid is required")
    shape = grids[0].shape
    for grid in grids[1:]:
        if grid.shape != shape:
            raise InvalidArgumentError(
                "Expert grids differ in shape: {} vs {}".format(
                    tuple(shape), tuple(grid.shape)))


def fuse_global(grids, weights):
    """sum_k alpha_k * F_k, weights (B, H, W, K) or (B, 1, 1, K)
    broadcast over channels"""
    _check_same_shape(grids)
    if weights.shape[-1] != len(grids):
        raise InvalidArgumentError(
            "{} weights for {} grids".format(weights.shape[-1], len(grids)))
    stacked = torch.stack(grids, dim=-1)
    return (stacked * weights.unsqueeze(-2)).sum(-1)


def fuse_global_local(f_global, f_local, beta=DEFAULT_BETA):
    if f_global.shape != f_local.shape:
        raise InvalidArgumentError(
            "Global {} and local {} features differ in shape".format(
                tuple(f_global.shape), tuple(f_local.shape)))
    return f_global + beta * f_local


class AdaptiveWeights(nn.Module):
    """softmax(W . concat(F_1..F_K)) per position, or per image when
    pooled; uniform 1/K when adaptive fusion is switched off"""

    def __init__(self, dim, num_experts, mode=FUSION_POSITION, adaptive=True):
        super(AdaptiveWeights, self).__init__()
        if mode not in (FUSION_POSITION, FUSION_POOLED):
            raise InvalidArgumentError(
                "Unknown fusion mode {!r}".format(mode))
        self.mode = mode
        self.adaptive = adaptive
        self.num_experts = num_experts
        self.proj = nn.Linear(dim * num_experts, num_experts) \
            if adaptive else None

    def forward(self, grids):
        _check_same_shape(grids)
        if len(grids) != self.num_experts:
            raise InvalidArgumentError("Expected {} expert grids, got {}".format(
                self.num_experts, len(grids)))
        batch, height_p, width_p, _ = grids[0].shape
        if not self.adaptive:
            return grids[0].new_full((batch, 1, 1, self.num_experts),
                                     1.0 / self.num_experts)
        features = torch.cat(grids, dim=-1)
        if self.mode == FUSION_POOLED:
            features = features.mean(dim=(1, 2), keepdim=True)
        return F.softmax(self.proj(features), dim=-1)


class LocalBranch(nn.Module):
    """Three [3x3 conv, batch norm, silu, 2x2 max pool] stages"""

    def __init__(self, out_dim, in_chans=3):
        super(LocalBranch, self).__init__()
        widths = [max(out_dim // 4, 1), max(out_dim // 2, 1), out_dim]
        layers = []
        for width in widths:
            layers += [nn.Conv2d(in_chans, width, kernel_size=3, padding=1),
                       nn.BatchNorm2d(width),
                       nn.SiLU(),
                       nn.MaxPool2d(2)]
            in_chans = width
        self.layers = nn.Sequential(*layers)

    def forward(self, image):
        """(B, 3, H, W) -> (B, H/8, W/8, out_dim)"""
        check_dims('image height', image.shape[-2], OUTPUT_STRIDE)
        check_dims('image width', image.shape[-1], OUTPUT_STRIDE)
        return self.layers(image).permute(0, 2, 3, 1)


class GlobalLocalFusion(nn.Module):
    """F_fused = sum_k alpha_k F_k + beta F_local"""

    def __init__(self, dim, num_experts, beta=DEFAULT_BETA,
                 mode=FUSION_POSITION, adaptive=True, cnn_branch=True):
        super(GlobalLocalFusion, self).__init__()
        self.beta = beta
        self.weights = AdaptiveWeights(dim, num_experts, mode, adaptive)
        self.local = LocalBranch(dim) if cnn_branch else None

    def forward(self, grids, image):
        alphas = self.weights(grids)
        fused = fuse_global(grids, alphas)
        if self.local is not None:
            fused = fuse_global_local(fused, self.local(image), self.beta)
        return fused, alphas
