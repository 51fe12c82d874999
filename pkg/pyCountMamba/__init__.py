# -*- coding: utf-8 -*-
# pylint: disable=invalid-name

from .scan import ScanOrder, build_order, apply_order, restore_grid
from .ssm import (DiscreteParams, discretize_zoh, lti_scan_recurrent,
                  lti_kernel, causal_convolve, selective_scan,
                  selective_scan_ref, selective_scan_chunked,
                  bidirectional_scan, SelectiveSSM)
from .block import PatchEmbed, DirectionalBlock, PatchMerging
from .backbone import MultiDirectionalGroup, expert_groups
from .fusion import (AdaptiveWeights, GlobalLocalFusion, fuse_global,
                     fuse_global_local)
from .counter import (RedundantCountMap, NormalizedCountMap, Counter,
                      coverage_map, normalize_map, image_count,
                      window_counts_from_dots, predict_redundant_map)
from .model import ModelConfig, CountMamba, CountOutput
from .metrics import MetricsReport, compute_metrics
from .data import (Sample, SynthConfig, gen_synthetic, load_annotations,
                   load_dataset, write_dataset, crop_augment)
from .trainer import (TrainConfig, Trainer, l1_count_loss, train, evaluate,
                      save_checkpoint, load_checkpoint, run_ablation)
from .errors import (CountMambaError, InvalidArgumentError,
                     NumericDomainError, AnnotationParseError, ConfigError,
                     CheckpointError, DatasetError)
from .const import LOGGER, VERSION

__version__ = VERSION
