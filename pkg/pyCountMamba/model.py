# -*- coding: utf-8 -*-
"""End-to-end counting network"""

from dataclasses import dataclass
from typing import NamedTuple, List

import torch
import torch.nn as nn

from .base import ConfigBase
from .backbone import MultiDirectionalGroup
from .fusion import GlobalLocalFusion
from .counter import (Counter, predict_redundant_map, normalize_map,
                      image_count, check_geometry)
from .errors import ConfigError, CountMambaError
from .utils import parse_directions
from .const import (
    LOGGER,
    OUTPUT_STRIDE,
    NUM_STAGES,
    D_CONV,
    DEFAULT_CHUNK,
    DEFAULT_BETA,
    DEFAULT_WINDOW,
    MODEL_PRESETS,
    EXPERT_GROUPS,
    EXPERTS_FOUR,
    FUSION_POSITION,
    FUSION_POOLED
)


@dataclass
class ModelConfig(ConfigBase):
    dims: tuple = (16, 32, 64)
    depths: tuple = (1, 1, 1)
    d_state: int = 4
    expand: int = 1
    d_conv: int = D_CONV
    directions: str = 'HVDA'
    experts: str = EXPERTS_FOUR
    adaptive_fusion: bool = True
    fusion_mode: str = FUSION_POSITION
    cnn_branch: bool = True
    beta: float = DEFAULT_BETA
    window: int = DEFAULT_WINDOW
    use_skip: bool = True
    chunk_size: int = DEFAULT_CHUNK

    @classmethod
    def from_preset(cls, name, **overrides):
        try:
            preset = dict(MODEL_PRESETS[name])
        except KeyError:
            raise ConfigError("Unknown model preset {!r}, expected one of {}"
                              .format(name, sorted(MODEL_PRESETS)))
        preset.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(preset)

    def validate(self):
        if len(self.dims) != NUM_STAGES or len(self.depths) != NUM_STAGES:
            raise ConfigError("dims and depths need {} entries".format(
                NUM_STAGES))
        if min(self.dims) < 1 or min(self.depths) < 0:
            raise ConfigError("dims must be positive, depths non-negative")
        if self.d_state < 1 or self.expand < 1 or self.d_conv < 1:
            raise ConfigError("d_state, expand and d_conv must be positive")
        if self.experts not in EXPERT_GROUPS:
            raise ConfigError("Unknown expert grouping {!r}".format(
                self.experts))
        if self.fusion_mode not in (FUSION_POSITION, FUSION_POOLED):
            raise ConfigError("Unknown fusion mode {!r}".format(
                self.fusion_mode))
        if self.window < OUTPUT_STRIDE:
            raise ConfigError("Window r={} is smaller than the stride {}"
                              .format(self.window, OUTPUT_STRIDE))
        if self.chunk_size < 0:
            raise ConfigError("chunk_size must be >= 0")
        try:
            parse_directions(self.directions)
        except CountMambaError as ex:
            raise ConfigError(str(ex))


class CountOutput(NamedTuple):
    count: torch.Tensor             # (B,)
    redundant: torch.Tensor         # (B, H/s, W/s)
    normalized: torch.Tensor        # (B, H, W)
    fusion_weights: torch.Tensor    # (B, h, w, K) or (B, 1, 1, K)
    experts: List[str]


class CountMamba(nn.Module):
    """MSSG -> global-local fusion -> counter -> normalizer"""

    def __init__(self, config=None):
        super(CountMamba, self).__init__()
        self.config = config or ModelConfig()
        self.config.validate()
        cfg = self.config
        self.backbone = MultiDirectionalGroup(
            cfg.dims, cfg.depths, cfg.d_state, cfg.directions, cfg.experts,
            cfg.expand, cfg.d_conv, cfg.use_skip, cfg.chunk_size)
        self.fusion = GlobalLocalFusion(
            cfg.dims[-1], len(self.backbone.branches), cfg.beta,
            cfg.fusion_mode, cfg.adaptive_fusion, cfg.cnn_branch)
        self.head = Counter(cfg.dims[-1])
        LOGGER.info("CountMamba experts %s, %d parameters",
                    self.backbone.names, self.num_parameters())

    @property
    def stride(self):
        return OUTPUT_STRIDE

    @property
    def experts(self):
        return self.backbone.names

    def num_parameters(self):
        return sum(p.numel() for p in self.parameters())

    def parameter_groups(self):
        """Named parameter groups: one per expert branch, fusion weights,
        cnn branch and head"""
        groups = {}
        for branch in self.backbone.branches:
            groups['branch_' + branch.name] = list(branch.parameters())
        if self.fusion.weights.proj is not None:
            groups['fusion'] = list(self.fusion.weights.parameters())
        if self.fusion.local is not None:
            groups['cnn'] = list(self.fusion.local.parameters())
        groups['head'] = list(self.head.parameters())
        return groups

    def forward(self, image):
        height, width = image.shape[-2], image.shape[-1]
        check_geometry(height, width, self.config.window, self.stride)
        grids = self.backbone(image)
        fused, alphas = self.fusion(grids, image)
        redundant = predict_redundant_map(fused, self.head, height, width,
                                          self.config.window, self.stride)
        normalized = normalize_map(redundant).values
        return CountOutput(image_count(normalized), redundant.values,
                           normalized, alphas, self.experts)
