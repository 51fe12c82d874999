# -*- coding: utf-8 -*-
# pylint: disable=broad-except
"""countmamba command line: synth, train, infer, eval and ablate"""

import argparse
import json
import logging
import os
import sys

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .counter import save_map_text, save_map_png
from .data import (SynthConfig, Sample, gen_synthetic, write_dataset,
                   load_dataset, resize_sample, image_tensor)
from .errors import (CountMambaError, ConfigError, DatasetError,
                     InvalidArgumentError, NumericDomainError)
from .metrics import compute_metrics, MetricsReport
from .trainer import (TrainConfig, Trainer, load_checkpoint, evaluate,
                      oracle_counts, mean_counts, write_predictions,
                      run_ablation)
from .utils import exception_log, output_dir, prepare_output_dir
from .const import (
    LOGGER,
    VERSION,
    OUTPUT_STRIDE,
    DEFAULT_WINDOW,
    DEFAULT_STRIDE,
    PLACEMENTS,
    PLACEMENT_DIAGONAL,
    MODEL_PRESETS,
    EXPERT_GROUPS,
    ABLATION_TABLES,
    CONFIG_ECHO,
    PREDICTIONS,
    METRICS_TEXT,
    METRICS_CSV,
    EXIT_OK,
    EXIT_USER_ERROR,
    EXIT_INTERNAL_ERROR
)

CONFIG_SECTIONS = ('synth', 'train')


class _Parser(argparse.ArgumentParser):
    """Usage errors are user errors (exit 1), not argparse's exit 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def load_config(path):
    """JSON file -> {'synth': {...}, 'train': {...}}"""
    if not path:
        return {name: {} for name in CONFIG_SECTIONS}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, ValueError) as ex:
        raise ConfigError("Cannot read config {}: {}".format(path, ex))
    if not isinstance(data, dict):
        raise ConfigError("Config {} must be a JSON object".format(path))
    unknown = sorted(set(data) - set(CONFIG_SECTIONS))
    if unknown:
        raise ConfigError("Unknown config sections: {}".format(
            ", ".join(unknown)))
    return {name: data.get(name) or {} for name in CONFIG_SECTIONS}


def echo_config(path, **sections):
    os.makedirs(path, exist_ok=True)
    values = {name: cfg.to_dict() if hasattr(cfg, 'to_dict') else cfg
              for name, cfg in sections.items()}
    with open(os.path.join(path, CONFIG_ECHO), 'w') as fh:
        fh.write(json.dumps(values, indent=2, sort_keys=True) + '\n')


def _flag_off(value):
    return False if value else None


def cmd_synth(args):
    sections = load_config(args.config)
    cfg = SynthConfig.from_dict(sections['synth']).updated(
        seed=args.seed, placement=args.placement)
    out = prepare_output_dir(output_dir(args.out, 'synth'), args.force)
    samples = gen_synthetic(cfg, args.n, args.workers)
    write_dataset(out, samples, cfg)
    echo_config(out, synth=cfg, n=args.n)
    counts = [s.count for s in samples]
    print("{} samples, {} dots (min {}, mean {:.2f}, max {}) in {}".format(
        len(samples), sum(counts), min(counts, default=0),
        float(np.mean(counts)) if counts else 0.0, max(counts, default=0),
        out))
    return EXIT_OK


def train_config(args):
    sections = load_config(args.config)
    return TrainConfig.from_dict(sections['train']).updated(
        lr=args.lr, batch_size=args.batch_size, epochs=args.epochs,
        preset=args.preset, directions=args.directions, experts=args.experts,
        adaptive_fusion=_flag_off(args.no_adaptive_fusion),
        cnn_branch=_flag_off(args.no_cnn_branch), beta=args.beta, r=args.r,
        seed=args.seed)


def cmd_train(args):
    cfg = train_config(args)
    samples = load_dataset(args.data)
    if not samples:
        raise DatasetError("No images in {}".format(args.data))
    val_samples = load_dataset(args.val_data) if args.val_data else None
    out = output_dir(args.out, 'train')
    cfg = cfg.updated(checkpoint_dir=out)
    echo_config(out, train=cfg, model=cfg.model_config())
    trainer = Trainer(cfg)
    best = trainer.train(samples, val_samples, out)
    if trainer.history:
        epoch, loss, val_mae = trainer.history[-1]
        print("epoch {} train_loss {:.4f}{}".format(
            epoch, loss, '' if val_mae is None
            else ' val_mae {:.4f}'.format(val_mae)))
    print("best checkpoint {}".format(best))
    return EXIT_OK


def pad_to_stride(image, stride=OUTPUT_STRIDE, strict=False):
    """Reflection-pad (1, 3, H, W) at bottom/right to a stride multiple"""
    height, width = image.shape[-2:]
    pad_h, pad_w = -height % stride, -width % stride
    if not pad_h and not pad_w:
        return image
    if strict:
        raise InvalidArgumentError(
            "Image {}x{} is not divisible by {}".format(width, height, stride))
    if pad_h >= height or pad_w >= width:
        raise InvalidArgumentError(
            "Image {}x{} is too small to reflection-pad".format(width, height))
    LOGGER.warning("Image %dx%d padded by reflection to %dx%d", width, height,
                   width + pad_w, height + pad_h)
    return F.pad(image, (0, pad_w, 0, pad_h), mode='reflect')


def cmd_infer(args):
    model, _ = load_checkpoint(args.checkpoint)
    try:
        with Image.open(args.image) as img:
            pixels = np.asarray(img.convert('RGB'))
    except OSError as ex:
        raise DatasetError("Cannot read image {}: {}".format(args.image, ex))
    if args.resize:
        pixels = resize_sample(Sample(pixels), size=args.resize).image
    dtype = next(model.parameters()).dtype
    image = pad_to_stride(image_tensor(pixels).unsqueeze(0).to(dtype),
                          strict=args.strict)
    with torch.no_grad():
        out = model(image)
    count = float(out.count[0])
    print("count = {:.6f}".format(count))
    if args.emit_map:
        values = out.normalized[0].double().numpy()
        stem = os.path.splitext(os.path.basename(args.image))[0]
        os.makedirs(args.emit_map, exist_ok=True)
        save_map_text(values, os.path.join(args.emit_map, stem + '_map.txt'))
        save_map_png(values, os.path.join(args.emit_map, stem + '_map.png'))
        echo_config(args.emit_map, model=model.config,
                    infer={'checkpoint': args.checkpoint, 'image': args.image,
                           'resize': args.resize, 'strict': args.strict})
    return EXIT_OK


def cmd_eval(args):
    samples = load_dataset(args.data)
    if not samples:
        raise DatasetError("Evaluation set {} is empty".format(args.data))
    out = output_dir(args.out, 'eval')
    os.makedirs(out, exist_ok=True)
    gt = [s.count for s in samples]
    settings = {'data': args.data, 'checkpoint': args.checkpoint}
    if args.oracle:
        settings.update(mode='oracle', r=args.r, s=args.s)
        pred = oracle_counts(samples, args.r, args.s)
    elif args.mean_baseline:
        train_samples = load_dataset(args.train_data) if args.train_data \
            else samples
        settings.update(mode='mean', train_data=args.train_data)
        pred = mean_counts(samples, train_samples)
    else:
        if not args.checkpoint:
            raise ConfigError("eval needs --checkpoint unless --oracle or "
                              "--mean-baseline is given")
        settings.update(mode='model')
        model, _ = load_checkpoint(args.checkpoint)
        report = evaluate(model, samples, out, args.dump_fusion)
        pred = None
    if pred is not None:
        report = compute_metrics(gt, pred)
        write_predictions(os.path.join(out, PREDICTIONS), samples, pred)
    with open(os.path.join(out, METRICS_TEXT), 'w') as fh:
        fh.write(report.as_text())
    with open(os.path.join(out, METRICS_CSV), 'w') as fh:
        fh.write(MetricsReport.csv_header() + '\n' + report.as_csv_row() + '\n')
    echo_config(out, eval=settings)
    print(report.as_text(), end='')
    return EXIT_OK


def cmd_ablate(args):
    sections = load_config(args.config)
    synth = dict(sections['synth'])
    synth.setdefault('placement', PLACEMENT_DIAGONAL)
    synth_cfg = SynthConfig.from_dict(synth)
    train_cfg = TrainConfig.from_dict(sections['train'])
    try:
        seeds = [int(s) for s in args.seeds.split(',') if s.strip()]
    except ValueError:
        raise ConfigError("--seeds must be comma-separated integers")
    if not seeds:
        raise ConfigError("--seeds is empty")
    out = output_dir(args.out, 'ablate')
    os.makedirs(out, exist_ok=True)
    echo_config(out, synth=synth_cfg, train=train_cfg,
                ablate={'table': args.table, 'seeds': seeds,
                        'n_train': args.n_train, 'n_test': args.n_test})
    rows = run_ablation(args.table, synth_cfg, train_cfg, seeds,
                        args.n_train, args.n_test, out)
    for table, variant, seed, report in rows:
        print("{} {} seed {}: mae {:.4f} rmse {:.4f}".format(
            table, variant, seed, report.mae, report.rmse))
    return EXIT_OK


def build_parser():
    parser = _Parser(prog='countmamba',
                     description="Plant counting with multi-directional "
                                 "state-space scans")
    parser.add_argument('--version', action='version', version=VERSION)
    level = parser.add_mutually_exclusive_group()
    level.add_argument('--verbose', '-v', action='store_true',
                       help="debug logging")
    level.add_argument('--quiet', '-q', action='store_true',
                       help="warnings and errors only")
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    synth = commands.add_parser('synth', help="generate a synthetic dataset")
    synth.add_argument('--config', help="JSON config with a 'synth' section")
    synth.add_argument('--out', help="dataset directory "
                                     "(default $COUNTMAMBA_OUTPUT/synth)")
    synth.add_argument('--n', type=int, default=100, help="number of images")
    synth.add_argument('--seed', type=int, help="generator seed")
    synth.add_argument('--placement', choices=PLACEMENTS,
                       help="dot placement distribution")
    synth.add_argument('--workers', type=int, default=1,
                       help="generation threads")
    synth.add_argument('--force', action='store_true',
                       help="write into a non-empty directory")
    synth.set_defaults(func=cmd_synth)

    train = commands.add_parser('train', help="train a model")
    train.add_argument('--config', help="JSON config with a 'train' section")
    train.add_argument('--data', required=True, help="dataset directory")
    train.add_argument('--val-data', help="validation dataset directory")
    train.add_argument('--out', help="checkpoint directory "
                                     "(default $COUNTMAMBA_OUTPUT/train)")
    train.add_argument('--epochs', type=int)
    train.add_argument('--lr', type=float, help="Adam learning rate")
    train.add_argument('--batch-size', type=int)
    train.add_argument('--preset', choices=sorted(MODEL_PRESETS))
    train.add_argument('--directions', help="scan direction subset, e.g. HVDA")
    train.add_argument('--experts', choices=sorted(EXPERT_GROUPS),
                       help="expert grouping of the directions")
    train.add_argument('--no-adaptive-fusion', action='store_true',
                       help="average the experts uniformly")
    train.add_argument('--no-cnn-branch', action='store_true',
                       help="drop the local convolutional branch")
    train.add_argument('--beta', type=float, help="local branch weight")
    train.add_argument('--r', type=int, help="counting window size")
    train.add_argument('--seed', type=int)
    train.set_defaults(func=cmd_train)

    infer = commands.add_parser('infer', help="count plants in one image")
    infer.add_argument('--checkpoint', required=True)
    infer.add_argument('--image', required=True)
    infer.add_argument('--emit-map', metavar='DIR',
                       help="write the normalized count map as .txt and .png")
    infer.add_argument('--strict', action='store_true',
                       help="fail instead of padding images not divisible "
                            "by {}".format(OUTPUT_STRIDE))
    infer.add_argument('--resize', type=int, metavar='N',
                       help="resize the image to N x N first")
    infer.set_defaults(func=cmd_infer)

    evaluate_ = commands.add_parser('eval', help="evaluate on a dataset")
    evaluate_.add_argument('--checkpoint')
    evaluate_.add_argument('--data', required=True)
    evaluate_.add_argument('--out', help="report directory "
                                         "(default $COUNTMAMBA_OUTPUT/eval)")
    mode = evaluate_.add_mutually_exclusive_group()
    mode.add_argument('--oracle', action='store_true',
                      help="count ground-truth dots through the normalizer")
    mode.add_argument('--mean-baseline', action='store_true',
                      help="predict the mean training count")
    evaluate_.add_argument('--train-data',
                           help="training set for --mean-baseline")
    evaluate_.add_argument('--r', type=int, default=DEFAULT_WINDOW,
                           help="oracle window size")
    evaluate_.add_argument('--s', type=int, default=DEFAULT_STRIDE,
                           help="oracle window stride")
    evaluate_.add_argument('--dump-fusion', action='store_true',
                           help="write per-image mean fusion weights")
    evaluate_.set_defaults(func=cmd_eval)

    ablate = commands.add_parser('ablate', help="run an ablation table")
    ablate.add_argument('--config', help="JSON config, 'synth' and 'train'")
    ablate.add_argument('--out', help="results directory "
                                      "(default $COUNTMAMBA_OUTPUT/ablate)")
    ablate.add_argument('--table', choices=sorted(ABLATION_TABLES),
                        default='directions')
    ablate.add_argument('--seeds', default='0,1,2',
                        help="comma-separated seeds")
    ablate.add_argument('--n-train', type=int, default=200)
    ablate.add_argument('--n-test', type=int, default=50)
    ablate.set_defaults(func=cmd_ablate)
    return parser


def setup_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else \
        logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    LOGGER.setLevel(level)


def main(argv=None):
    """Run one command; returns the process exit code"""
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.verbose, args.quiet)
        return args.func(args)
    except NumericDomainError as ex:
        LOGGER.error("%s", ex)
        return EXIT_INTERNAL_ERROR
    except CountMambaError as ex:
        LOGGER.error("%s", ex)
        print("error: {}".format(ex), file=sys.stderr)
        return EXIT_USER_ERROR
    except Exception as ex:
        exception_log(ex, "Internal error in countmamba {}",
                      ' '.join(argv if argv is not None else sys.argv[1:]))
        return EXIT_INTERNAL_ERROR
