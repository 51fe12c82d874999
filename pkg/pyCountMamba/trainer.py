# -*- coding: utf-8 -*-
"""Training, checkpointing and evaluation"""

import csv
import os
from dataclasses import dataclass
from datetime import timedelta

import numpy as np
import torch
from torch.utils.data import DataLoader
from tqdm import tqdm

from .base import ConfigBase
from .counter import window_counts_from_dots, normalize_map, image_count
from .data import CountingDataset, collate, image_tensor, gen_synthetic
from .errors import (ConfigError, InvalidArgumentError, NumericDomainError,
                     CheckpointError, DatasetError, CountMambaError)
from .metrics import compute_metrics
from .model import CountMamba, ModelConfig
from .utils import timer, set_seed, resolve_dtype, parse_directions
from .const import (
    LOGGER,
    DEFAULT_LR,
    DEFAULT_BETA,
    DEFAULT_WINDOW,
    DEFAULT_STRIDE,
    OUTPUT_STRIDE,
    ADAM_BETAS,
    ADAM_EPS,
    MODEL_PRESETS,
    EXPERT_GROUPS,
    EXPERTS_FOUR,
    FUSION_POSITION,
    CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
    CHECKPOINT_LAST,
    CHECKPOINT_BEST,
    TRAIN_LOG,
    PREDICTIONS,
    FUSION_WEIGHTS,
    ABLATION_CSV,
    ABLATION_TABLES
)

ABLATION_FIELDS = ['mae', 'rmse', 'rmae_pct', 'rrmse_pct', 'r2']


@dataclass
class TrainConfig(ConfigBase):
    lr: float = DEFAULT_LR
    batch_size: int = 1
    epochs: int = 50
    accumulate: int = 1
    beta: float = DEFAULT_BETA
    r: int = DEFAULT_WINDOW
    s: int = DEFAULT_STRIDE
    preset: str = 'small'
    seed: int = 0
    checkpoint_dir: str = ''
    directions: str = 'HVDA'
    experts: str = EXPERTS_FOUR
    adaptive_fusion: bool = True
    fusion_mode: str = FUSION_POSITION
    cnn_branch: bool = True
    window_loss_weight: float = 0.0
    crop_size: int = 0
    dtype: str = 'float32'
    threads: int = 1
    progress: bool = False

    def validate(self):
        if not self.lr > 0:
            raise ConfigError("Learning rate must be positive, got {}".format(
                self.lr))
        if self.batch_size < 1 or self.accumulate < 1 or self.epochs < 0:
            raise ConfigError("batch_size, accumulate >= 1 and epochs >= 0")
        if self.r < self.s:
            raise ConfigError("Window r={} must be >= stride s={}".format(
                self.r, self.s))
        if self.s != OUTPUT_STRIDE:
            raise ConfigError("The network output stride is {}, got s={}"
                              .format(OUTPUT_STRIDE, self.s))
        if self.preset not in MODEL_PRESETS:
            raise ConfigError("Unknown preset {!r}, expected one of {}".format(
                self.preset, sorted(MODEL_PRESETS)))
        if self.experts not in EXPERT_GROUPS:
            raise ConfigError("Unknown expert grouping {!r}".format(
                self.experts))
        if self.window_loss_weight < 0:
            raise ConfigError("window_loss_weight must be >= 0")
        if self.crop_size and self.crop_size % OUTPUT_STRIDE:
            raise ConfigError("crop_size must be divisible by {}".format(
                OUTPUT_STRIDE))
        try:
            parse_directions(self.directions)
            resolve_dtype(self.dtype)
        except CountMambaError as ex:
            raise ConfigError(str(ex))

    def model_config(self):
        return ModelConfig.from_preset(
            self.preset, directions=self.directions, experts=self.experts,
            adaptive_fusion=self.adaptive_fusion, fusion_mode=self.fusion_mode,
            cnn_branch=self.cnn_branch, beta=self.beta, window=self.r)


def l1_count_loss(pred_counts, gt_counts):
    """(1/B) sum_i |C_i - C*_i|"""
    if not torch.is_tensor(pred_counts):
        pred_counts = torch.as_tensor(pred_counts,
                                      dtype=torch.get_default_dtype())
    gt_counts = torch.as_tensor(gt_counts, dtype=pred_counts.dtype,
                                device=pred_counts.device)
    if pred_counts.numel() == 0 or pred_counts.shape != gt_counts.shape:
        raise InvalidArgumentError(
            "Need equal nonempty batches, got {} and {}".format(
                tuple(pred_counts.shape), tuple(gt_counts.shape)))
    return (pred_counts - gt_counts).abs().mean()


def save_checkpoint(path, model, epoch=0, train_config=None):
    state = model.state_dict()
    torch.save({
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'model_config': model.config.to_dict(),
        'train_config': train_config.to_dict() if train_config else None,
        'epoch': epoch,
        'state_dict': state,
        'shapes': {k: list(v.shape) for k, v in state.items()},
    }, path)
    LOGGER.debug("Saved checkpoint %s (epoch %d)", path, epoch)
    return path


def load_checkpoint(path, model_config=None):
    """Rebuild the model stored in a checkpoint.

    When model_config is given the checkpoint must fit it; the first
    mismatching parameter is named in the error.
    """
    if not os.path.exists(path):
        raise CheckpointError("No checkpoint at {}".format(path))
    try:
        data = torch.load(path, map_location='cpu', weights_only=False)
    except Exception as ex:
        raise CheckpointError("Cannot read checkpoint {}: {}".format(path, ex))
    if not isinstance(data, dict) or data.get('format') != CHECKPOINT_FORMAT:
        raise CheckpointError("{} is not a {}".format(path, CHECKPOINT_FORMAT))
    if data.get('version') != CHECKPOINT_VERSION:
        raise CheckpointError("Unsupported checkpoint version {}".format(
            data.get('version')))
    config = model_config or ModelConfig.from_dict(data['model_config'])
    model = CountMamba(config)
    expected = model.state_dict()
    state = data['state_dict']
    for name, tensor in expected.items():
        if name not in state:
            raise CheckpointError("Checkpoint lacks parameter {}".format(name))
        if tuple(state[name].shape) != tuple(tensor.shape):
            raise CheckpointError(
                "Parameter {} has shape {} in checkpoint, model expects {}"
                .format(name, tuple(state[name].shape), tuple(tensor.shape)))
    extra = sorted(set(state) - set(expected))
    if extra:
        raise CheckpointError("Unexpected parameter {}".format(extra[0]))
    first = next(iter(state.values()), None)
    if first is not None and first.is_floating_point():
        model.to(first.dtype)
    model.load_state_dict(state)
    model.eval()
    return model, data


class Trainer(object):
    """Adam on the image-level L1 count loss"""

    def __init__(self, cfg, model=None):
        cfg.validate()
        self.cfg = cfg
        set_seed(cfg.seed, cfg.threads)
        self.dtype = resolve_dtype(cfg.dtype)
        self.model = (model or CountMamba(cfg.model_config())).to(self.dtype)
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=cfg.lr,
                                          betas=ADAM_BETAS, eps=ADAM_EPS)
        self.history = []
        self.best = None
        self._log_timer = timer(timedelta(seconds=30))

    def _loader(self, samples):
        dataset = CountingDataset(samples, self.cfg.crop_size or None,
                                  self.cfg.seed)
        generator = torch.Generator()
        generator.manual_seed(self.cfg.seed)
        return dataset, DataLoader(dataset, batch_size=self.cfg.batch_size,
                                   shuffle=True, generator=generator,
                                   collate_fn=collate, num_workers=0)

    def loss(self, images, counts, dots):
        out = self.model(images.to(self.dtype))
        loss = l1_count_loss(out.count, counts.to(self.dtype))
        if self.cfg.window_loss_weight:
            height, width = images.shape[-2:]
            target = torch.stack([
                window_counts_from_dots(d, height, width, self.cfg.r,
                                        self.cfg.s, self.dtype).values
                for d in dots])
            loss = loss + self.cfg.window_loss_weight * \
                (out.redundant - target).abs().mean()
        return loss, out

    def train_epoch(self, loader, epoch):
        self.model.train()
        total, seen = 0.0, 0
        self.optimizer.zero_grad()
        steps = 0
        for images, counts, dots, ids in loader:
            loss, _ = self.loss(images, counts, dots)
            if not torch.isfinite(loss):
                raise NumericDomainError(
                    "Non-finite loss {} at epoch {} on {}".format(
                        loss.item(), epoch, ids))
            (loss / self.cfg.accumulate).backward()
            steps += 1
            if steps % self.cfg.accumulate == 0:
                self.optimizer.step()
                self.optimizer.zero_grad()
            total += loss.item() * len(ids)
            seen += len(ids)
            if self._log_timer.check():
                LOGGER.debug("epoch %d, %d samples, running loss %.4f",
                             epoch, seen, total / seen)
        if steps % self.cfg.accumulate:
            self.optimizer.step()
            self.optimizer.zero_grad()
        return total / seen

    def train(self, samples, val_samples=None, out_dir=None):
        """Run all epochs; returns the path of the best checkpoint"""
        if not samples:
            raise DatasetError("Training set is empty")
        out_dir = out_dir or self.cfg.checkpoint_dir
        if not out_dir:
            raise ConfigError("No checkpoint directory configured")
        os.makedirs(out_dir, exist_ok=True)
        dataset, loader = self._loader(samples)
        best_path = os.path.join(out_dir, CHECKPOINT_BEST)
        save_checkpoint(os.path.join(out_dir, CHECKPOINT_LAST), self.model,
                        0, self.cfg)
        save_checkpoint(best_path, self.model, 0, self.cfg)
        log_path = os.path.join(out_dir, TRAIN_LOG)
        with open(log_path, 'w', newline='') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(['epoch', 'train_loss', 'val_mae'])
            epochs = tqdm(range(1, self.cfg.epochs + 1), desc="train",
                          disable=not self.cfg.progress)
            for epoch in epochs:
                dataset.epoch = epoch
                train_loss = self.train_epoch(loader, epoch)
                val_mae = None
                if val_samples:
                    val_mae = evaluate(self.model, val_samples).mae
                score = val_mae if val_mae is not None else train_loss
                self.history.append((epoch, train_loss, val_mae))
                writer.writerow([epoch, repr(train_loss),
                                 '' if val_mae is None else repr(val_mae)])
                fh.flush()
                LOGGER.info("epoch %d train_loss %.4f val_mae %s", epoch,
                            train_loss, 'n/a' if val_mae is None
                            else '%.4f' % val_mae)
                if self.best is None or score < self.best:
                    self.best = score
                    save_checkpoint(best_path, self.model, epoch, self.cfg)
                save_checkpoint(os.path.join(out_dir, CHECKPOINT_LAST),
                                self.model, epoch, self.cfg)
        return best_path


def train(cfg, samples, val_samples=None, out_dir=None):
    return Trainer(cfg).train(samples, val_samples, out_dir)


def predict_counts(model, samples, with_weights=False):
    """Per-image predicted counts (and mean fusion weights)"""
    model.eval()
    dtype = next(model.parameters()).dtype
    counts, weights = [], []
    with torch.no_grad():
        for sample in samples:
            out = model(image_tensor(sample.image).unsqueeze(0).to(dtype))
            counts.append(float(out.count[0]))
            if with_weights:
                weights.append(out.fusion_weights[0].mean(dim=(0, 1)).tolist())
    return (counts, weights) if with_weights else counts


def oracle_counts(samples, r, s):
    """Counts through window_counts_from_dots and the normalizer"""
    return [float(image_count(normalize_map(window_counts_from_dots(
        sample.dots, sample.height, sample.width, r, s,
        torch.float64)))) for sample in samples]


def mean_counts(samples, train_samples):
    mean = float(np.mean([s.count for s in train_samples]))
    return [mean] * len(samples)


def write_predictions(path, samples, pred):
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['id', 'gt', 'pred'])
        for sample, value in zip(samples, pred):
            writer.writerow([sample.id, sample.count, '%.6f' % value])


def write_fusion_weights(path, samples, weights, experts):
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['image_id'] + ['alpha_' + e for e in experts])
        for sample, row in zip(samples, weights):
            writer.writerow([sample.id] + ['%.6f' % w for w in row])


def evaluate(model, samples, out_dir=None, dump_fusion=False):
    """MetricsReport of model on samples; writes per-image CSVs to out_dir"""
    if not samples:
        raise DatasetError("Evaluation set is empty")
    pred, weights = predict_counts(model, samples, with_weights=True)
    report = compute_metrics([s.count for s in samples], pred)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_predictions(os.path.join(out_dir, PREDICTIONS), samples, pred)
        if dump_fusion:
            write_fusion_weights(os.path.join(out_dir, FUSION_WEIGHTS),
                                 samples, weights, model.experts)
    return report


def evaluate_checkpoint(path, samples, model_config=None, out_dir=None,
                        dump_fusion=False):
    model, _ = load_checkpoint(path, model_config)
    return evaluate(model, samples, out_dir, dump_fusion)


def run_ablation(table, synth_cfg, train_cfg, seeds=(0,), n_train=200,
                 n_test=50, out_dir=None):
    """Train and evaluate every variant of an ablation table per seed.

    The train and test splits are drawn from disjoint sample indices of
    the same synthetic generator. Returns rows of
    (table, variant, seed, MetricsReport); with out_dir each variant
    gets its own checkpoint directory next to ablation.csv.
    """
    if table not in ABLATION_TABLES:
        raise InvalidArgumentError("Unknown ablation table {!r}, expected "
                                   "one of {}".format(table,
                                                      sorted(ABLATION_TABLES)))
    rows = []
    for seed in seeds:
        data_cfg = synth_cfg.updated(seed=seed)
        samples = gen_synthetic(data_cfg, n_train + n_test)
        train_set, test_set = samples[:n_train], samples[n_train:]
        for variant in ABLATION_TABLES[table]:
            switches = {k: v for k, v in variant.items() if k != 'variant'}
            cfg = train_cfg.updated(seed=seed, **switches)
            run_dir = os.path.join(out_dir or cfg.checkpoint_dir,
                                   '{}_{}_seed{}'.format(
                                       table, variant['variant'], seed))
            trainer = Trainer(cfg)
            trainer.train(train_set, None, run_dir)
            report = evaluate(trainer.model, test_set)
            LOGGER.info("ablation %s %s seed %d: mae %.4f", table,
                        variant['variant'], seed, report.mae)
            rows.append((table, variant['variant'], seed, report))
    if out_dir:
        write_ablation(os.path.join(out_dir, ABLATION_CSV), rows)
    return rows


def write_ablation(path, rows):
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['table', 'variant', 'seed'] + ABLATION_FIELDS)
        for table, variant, seed, report in rows:
            writer.writerow([table, variant, seed] + [
                '' if getattr(report, key) is None
                else '%.6f' % getattr(report, key) for key in ABLATION_FIELDS])
