# -*- coding: utf-8 -*-
"""Block is one directional state-space layer of an expert branch"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import InvalidArgumentError
from .scan import build_order, apply_order, restore_grid
from .ssm import SelectiveSSM, bidirectional_scan
from .utils import check_dims
from .const import (
    PATCH_SIZE,
    D_CONV,
    DEFAULT_CHUNK,
    DIRECTIONS
)


class PatchEmbed(nn.Module):
    """Linear projection of non-overlapping 2x2x3 patches"""

    def __init__(self, embed_dim, in_chans=3, patch_size=PATCH_SIZE):
        super(PatchEmbed, self).__init__()
        self.patch_size = patch_size
        # a stride == kernel conv is the per-patch linear map
        self.proj = nn.Conv2d(in_chans, embed_dim, kernel_size=patch_size,
                              stride=patch_size)

    def forward(self, image):
        """(B, 3, H, W) image -> (B, H/2, W/2, C0) grid"""
        if image.dim() != 4:
            raise InvalidArgumentError(
                "Expected a (batch, 3, H, W) image, got {}".format(
                    tuple(image.shape)))
        check_dims('image height', image.shape[-2], self.patch_size)
        check_dims('image width', image.shape[-1], self.patch_size)
        return self.proj(image).permute(0, 2, 3, 1)


class DirectionPath(nn.Module):
    """Depthwise causal conv plus a forward/backward SSM pair for one
    scan direction of a block"""

    def __init__(self, direction, hidden, d_state, d_conv=D_CONV,
                 use_skip=True, chunk_size=DEFAULT_CHUNK):
        super(DirectionPath, self).__init__()
        self.direction = direction
        self.d_conv = d_conv
        self.conv = nn.Conv1d(hidden, hidden, kernel_size=d_conv,
                              groups=hidden)
        self.ssm_fwd = SelectiveSSM(hidden, d_state, use_skip, chunk_size)
        self.ssm_bwd = SelectiveSSM(hidden, d_state, use_skip, chunk_size)

    def forward(self, grid):
        order = build_order(self.direction, grid.shape[1], grid.shape[2])
        seq = apply_order(grid, order)
        seq = F.pad(seq.transpose(1, 2), (self.d_conv - 1, 0))
        seq = F.silu(self.conv(seq)).transpose(1, 2)
        seq = bidirectional_scan(self.ssm_fwd, self.ssm_bwd, seq)
        return restore_grid(seq, order)


class DirectionalBlock(nn.Module):
    """Pre-norm residual block scanning the grid in one or more directions.

    out = grid + out_proj(silu(gate_proj(norm(grid))) * ssm_proj(ssm))
    where ssm sums, over the block's directions, the restored output of
    in_proj -> scan order -> causal conv + silu -> bidirectional scan.
    """

    def __init__(self, dim, directions, d_state=16, expand=1,
                 d_conv=D_CONV, use_skip=True, chunk_size=DEFAULT_CHUNK):
        super(DirectionalBlock, self).__init__()
        if isinstance(directions, str):
            directions = [directions]
        for direction in directions:
            if direction not in DIRECTIONS:
                raise InvalidArgumentError(
                    "Unknown scan direction {!r}".format(direction))
        hidden = dim * expand
        self.dim = dim
        self.directions = list(directions)
        self.norm = nn.LayerNorm(dim)
        self.in_proj = nn.Linear(dim, hidden, bias=False)
        self.gate_proj = nn.Linear(dim, hidden, bias=False)
        self.paths = nn.ModuleDict({
            d: DirectionPath(d, hidden, d_state, d_conv, use_skip, chunk_size)
            for d in self.directions})
        self.ssm_proj = nn.Linear(hidden, hidden, bias=False)
        self.out_proj = nn.Linear(hidden, dim, bias=False)

    def forward(self, grid):
        if grid.dim() != 4 or grid.shape[-1] != self.dim:
            raise InvalidArgumentError(
                "Expected a (batch, H, W, {}) grid, got {}".format(
                    self.dim, tuple(grid.shape)))
        normed = self.norm(grid)
        hidden = self.in_proj(normed)
        ssm = sum(path(hidden) for path in self.paths.values())
        gated = F.silu(self.gate_proj(normed)) * self.ssm_proj(ssm)
        return grid + self.out_proj(gated)


class PatchMerging(nn.Module):
    """2x2 merge: concat four cells, layer norm, project to out_dim"""

    def __init__(self, dim, out_dim=None):
        super(PatchMerging, self).__init__()
        self.dim = dim
        self.out_dim = out_dim or 2 * dim
        self.norm = nn.LayerNorm(4 * dim)
        self.reduction = nn.Linear(4 * dim, self.out_dim, bias=False)

    def forward(self, grid):
        height_p, width_p = grid.shape[1], grid.shape[2]
        if height_p % 2 or width_p % 2:
            raise InvalidArgumentError(
                "Cannot merge a {}x{} grid, dimensions must be even".format(
                    height_p, width_p))
        merged = torch.cat([grid[:, 0::2, 0::2], grid[:, 1::2, 0::2],
                            grid[:, 0::2, 1::2], grid[:, 1::2, 1::2]], dim=-1)
        return self.reduction(self.norm(merged))

