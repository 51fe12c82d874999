# -*- coding: utf-8 -*-

import logging

LOGGER = logging.getLogger('pyCountMamba')

NAME = "pyCountMamba"
VERSION = "0.1.0"

"""Network geometry"""
PATCH_SIZE = 2
OUTPUT_STRIDE = 8
NUM_STAGES = 3
D_CONV = 4

"""Counter and normalizer (window size r, output stride s)"""
DEFAULT_WINDOW = 64
DEFAULT_STRIDE = 8
HEAD_INIT_BIAS = 1.0
HEAD_INIT_SCALE = 0.1

"""Optimization"""
DEFAULT_LR = 1e-4
DEFAULT_BETA = 1.0
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

"""State-space discretization"""
TAYLOR_THRESHOLD = 1e-6
DT_MIN = 0.001
DT_MAX = 0.1
DEFAULT_CHUNK = 16

DIRECTION_HORIZONTAL = 'H'
DIRECTION_VERTICAL = 'V'
DIRECTION_DIAGONAL = 'D'
DIRECTION_ANTIDIAGONAL = 'A'

DIRECTIONS = [
    DIRECTION_HORIZONTAL,
    DIRECTION_VERTICAL,
    DIRECTION_DIAGONAL,
    DIRECTION_ANTIDIAGONAL
]

DIRECTION_NAMES = {
    DIRECTION_HORIZONTAL: "Horizontal",
    DIRECTION_VERTICAL: "Vertical",
    DIRECTION_DIAGONAL: "Diagonal",
    DIRECTION_ANTIDIAGONAL: "AntiDiagonal",
}

EXPERTS_ONE = 'one'
EXPERTS_TWO = 'two'
EXPERTS_FOUR = 'four'

EXPERT_GROUPS = {
    EXPERTS_ONE: [['H', 'V', 'D', 'A']],
    EXPERTS_TWO: [['H', 'V'], ['D', 'A']],
    EXPERTS_FOUR: [['H'], ['V'], ['D'], ['A']],
}

FUSION_POSITION = 'position'
FUSION_POOLED = 'pooled'

MODEL_PRESETS = {
    'tiny': {'dims': (8, 16, 32), 'depths': (1, 1, 1),
             'd_state': 4, 'expand': 1},
    'small': {'dims': (16, 32, 64), 'depths': (1, 1, 1),
              'd_state': 4, 'expand': 1},
    'base': {'dims': (48, 96, 192), 'depths': (2, 2, 2),
             'd_state': 16, 'expand': 2},
}

PLACEMENT_UNIFORM = 'Uniform'
PLACEMENT_DIAGONAL = 'DiagonalBand'
PLACEMENT_ANTIDIAGONAL = 'AntiDiagonalBand'
PLACEMENT_ROW = 'RowBand'
PLACEMENT_COLUMN = 'ColumnBand'

PLACEMENTS = [
    PLACEMENT_UNIFORM,
    PLACEMENT_DIAGONAL,
    PLACEMENT_ANTIDIAGONAL,
    PLACEMENT_ROW,
    PLACEMENT_COLUMN
]

"""Dataset directory layout"""
DATASET_IMAGES = 'images'
DATASET_ANNOTATIONS = 'annotations.csv'
DATASET_MANIFEST = 'manifest'

CHECKPOINT_FORMAT = "pyCountMamba-checkpoint"
CHECKPOINT_VERSION = 1
CHECKPOINT_LAST = 'last.pt'
CHECKPOINT_BEST = 'best.pt'

CONFIG_ECHO = 'config.json'
TRAIN_LOG = 'train_log.csv'
PREDICTIONS = 'predictions.csv'
FUSION_WEIGHTS = 'fusion_weights.csv'
METRICS_TEXT = 'metrics.txt'
METRICS_CSV = 'metrics.csv'
ABLATION_CSV = 'ablation.csv'

PNG_VMAX_KEY = 'countmamba_vmax'
PNG_SUM_KEY = 'countmamba_sum'

ENV_OUTPUT_ROOT = 'COUNTMAMBA_OUTPUT'

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_INTERNAL_ERROR = 2

ABLATION_TABLES = {
    'directions': [
        {'variant': 'H', 'directions': 'H'},
        {'variant': 'A', 'directions': 'A'},
        {'variant': 'DA', 'directions': 'DA'},
        {'variant': 'VDA', 'directions': 'VDA'},
        {'variant': 'HVDA', 'directions': 'HVDA'},
    ],
    'experts': [
        {'variant': 'one', 'experts': EXPERTS_ONE},
        {'variant': 'two', 'experts': EXPERTS_TWO},
        {'variant': 'four', 'experts': EXPERTS_FOUR},
    ],
    'fusion': [
        {'variant': 'mean', 'adaptive_fusion': False, 'cnn_branch': False},
        {'variant': 'mean+cnn', 'adaptive_fusion': False, 'cnn_branch': True},
        {'variant': 'adaptive+cnn', 'adaptive_fusion': True,
         'cnn_branch': True},
    ],
}
