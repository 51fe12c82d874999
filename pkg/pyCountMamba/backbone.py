# -*- coding: utf-8 -*-
"""Multi-directional State-Space Group: parallel expert branches, each
scanning the patch grid in its own direction(s)"""

import torch.nn as nn

from .block import PatchEmbed, DirectionalBlock, PatchMerging
from .errors import InvalidArgumentError
from .utils import check_dims, parse_directions
from .const import (
    LOGGER,
    OUTPUT_STRIDE,
    NUM_STAGES,
    D_CONV,
    DEFAULT_CHUNK,
    EXPERT_GROUPS,
    EXPERTS_FOUR
)


def expert_groups(directions, experts=EXPERTS_FOUR):
    """Split a direction subset into expert branches"""
    directions = parse_directions(directions)
    try:
        groups = EXPERT_GROUPS[experts]
    except KeyError:
        raise InvalidArgumentError(
            "Unknown expert grouping {!r}, expected one of {}".format(
                experts, sorted(EXPERT_GROUPS)))
    groups = [[d for d in group if d in directions] for group in groups]
    return [group for group in groups if group]


class ExpertBranch(nn.Module):
    """patch_embed -> stage 1 -> merge -> stage 2 -> merge -> stage 3"""

    def __init__(self, directions, dims, depths, d_state, expand=1,
                 d_conv=D_CONV, use_skip=True, chunk_size=DEFAULT_CHUNK):
        super(ExpertBranch, self).__init__()
        if len(dims) != NUM_STAGES or len(depths) != NUM_STAGES:
            raise InvalidArgumentError(
                "Expected {} stage dims/depths, got {} / {}".format(
                    NUM_STAGES, dims, depths))
        self.directions = list(directions)
        self.name = ''.join(self.directions)
        self.patch_embed = PatchEmbed(dims[0])
        self.stages = nn.ModuleList()
        self.merges = nn.ModuleList()
        for idx, (dim, depth) in enumerate(zip(dims, depths)):
            self.stages.append(nn.Sequential(*[
                DirectionalBlock(dim, self.directions, d_state, expand,
                                 d_conv, use_skip, chunk_size)
                for _ in range(depth)]))
            if idx < NUM_STAGES - 1:
                self.merges.append(PatchMerging(dim, dims[idx + 1]))

    def forward(self, image):
        grid = self.patch_embed(image)
        for idx, stage in enumerate(self.stages):
            grid = stage(grid)
            if idx < len(self.merges):
                grid = self.merges[idx](grid)
        return grid


class MultiDirectionalGroup(nn.Module):
    """Independent expert branches; forward returns one grid per expert,
    all of shape (B, H/8, W/8, dims[-1])"""

    def __init__(self, dims, depths, d_state, directions='HVDA',
                 experts=EXPERTS_FOUR, expand=1, d_conv=D_CONV,
                 use_skip=True, chunk_size=DEFAULT_CHUNK):
        super(MultiDirectionalGroup, self).__init__()
        self.groups = expert_groups(directions, experts)
        self.out_dim = dims[-1]
        self.branches = nn.ModuleList([
            ExpertBranch(group, dims, depths, d_state, expand, d_conv,
                         use_skip, chunk_size)
            for group in self.groups])
        LOGGER.debug("MSSG experts %s, dims %s, depths %s",
                     [b.name for b in self.branches], dims, depths)

    @property
    def names(self):
        return [branch.name for branch in self.branches]

    def forward(self, image):
        check_dims('image height', image.shape[-2], OUTPUT_STRIDE)
        check_dims('image width', image.shape[-1], OUTPUT_STRIDE)
        return [branch(image) for branch in self.branches]
