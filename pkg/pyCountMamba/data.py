# -*- coding: utf-8 -*-
"""Synthetic counting data, dataset I/O and crop augmentation.

On disk a dataset is a directory with images/<id>.png, annotations.csv
(header image,x,y; one dot per row; x = column, origin top-left) and a
manifest recording the generating config and seed.
"""

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image
from torch.utils.data import Dataset

from .base import ConfigBase
from .errors import (ConfigError, InvalidArgumentError, AnnotationParseError,
                     DatasetError)
from .const import (
    LOGGER,
    OUTPUT_STRIDE,
    PLACEMENTS,
    PLACEMENT_UNIFORM,
    PLACEMENT_DIAGONAL,
    PLACEMENT_ANTIDIAGONAL,
    PLACEMENT_ROW,
    PLACEMENT_COLUMN,
    DATASET_IMAGES,
    DATASET_ANNOTATIONS,
    DATASET_MANIFEST
)

POINT_HEADER = ['image', 'x', 'y']
BOX_HEADER = ['image', 'x1', 'y1', 'x2', 'y2']

# plants are rendered green-dominant on a darker soil background
BLOB_COLOR = np.array([0.45, 1.0, 0.35])
SOIL_COLOR = np.array([0.35, 0.27, 0.2])


@dataclass
class Sample:
    image: np.ndarray                 # (H, W, 3) uint8
    dots: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    id: str = ''

    def __post_init__(self):
        self.dots = np.asarray(self.dots, dtype=np.float64).reshape(-1, 2)

    @property
    def height(self):
        return self.image.shape[0]

    @property
    def width(self):
        return self.image.shape[1]

    @property
    def count(self):
        return len(self.dots)

    def check_dots(self):
        xs, ys = self.dots[:, 0], self.dots[:, 1]
        if ((xs < 0) | (xs >= self.width) | (ys < 0) |
                (ys >= self.height)).any():
            raise InvalidArgumentError(
                "Sample {} has dots outside its {}x{} image".format(
                    self.id, self.width, self.height))


@dataclass
class SynthConfig(ConfigBase):
    image_size: int = 128
    count_min: int = 0
    count_max: int = 15
    radius_min: float = 2.0
    radius_max: float = 4.0
    intensity_min: float = 0.6
    intensity_max: float = 1.0
    noise: float = 0.03
    placement: str = PLACEMENT_UNIFORM
    band_width: float = 0.15
    margin: int = 0
    seed: int = 0

    def validate(self):
        if self.image_size < OUTPUT_STRIDE or self.image_size % OUTPUT_STRIDE:
            raise ConfigError("image_size must be a positive multiple of {}"
                              .format(OUTPUT_STRIDE))
        if not 0 <= self.count_min <= self.count_max:
            raise ConfigError("Need 0 <= count_min <= count_max")
        if not 0 < self.radius_min <= self.radius_max:
            raise ConfigError("Need 0 < radius_min <= radius_max")
        if not 0 < self.intensity_min <= self.intensity_max:
            raise ConfigError("Need 0 < intensity_min <= intensity_max")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")
        if self.placement not in PLACEMENTS:
            raise ConfigError("Unknown placement {!r}, expected one of {}"
                              .format(self.placement, PLACEMENTS))
        if not 0 < self.band_width <= 1:
            raise ConfigError("band_width must be in (0, 1]")
        if not 0 <= 2 * self.margin < self.image_size:
            raise ConfigError("margin leaves no room for dots")


def band_offset(cfg, x, y):
    """Normalized distance of (x, y) from the placement's centre line"""
    size = float(cfg.image_size)
    u, v = np.asarray(x) / size, np.asarray(y) / size
    if cfg.placement == PLACEMENT_DIAGONAL:
        return np.abs(u - v)
    if cfg.placement == PLACEMENT_ANTIDIAGONAL:
        return np.abs(u + v - 1)
    if cfg.placement == PLACEMENT_ROW:
        return np.abs(v - 0.5)
    if cfg.placement == PLACEMENT_COLUMN:
        return np.abs(u - 0.5)
    return np.zeros(np.shape(u))


def _place(cfg, rng, count):
    size = cfg.image_size
    low, high = cfg.margin, size - cfg.margin
    dots = []
    while len(dots) < count:
        if cfg.placement == PLACEMENT_UNIFORM:
            x, y = rng.uniform(low, high, size=2)
        else:
            t = rng.uniform(0, 1)
            d = rng.uniform(-cfg.band_width, cfg.band_width)
            if cfg.placement == PLACEMENT_DIAGONAL:
                u, v = t + d / 2, t - d / 2
            elif cfg.placement == PLACEMENT_ANTIDIAGONAL:
                u, v = t + d / 2, 1 - t + d / 2
            elif cfg.placement == PLACEMENT_ROW:
                u, v = t, 0.5 + d
            else:
                u, v = 0.5 + d, t
            x, y = u * size, v * size
        if low <= x < high and low <= y < high:
            dots.append((x, y))
    return np.array(dots, dtype=np.float64).reshape(-1, 2)


def _render(cfg, rng, dots):
    size = cfg.image_size
    canvas = np.broadcast_to(SOIL_COLOR, (size, size, 3)).copy()
    if cfg.noise:
        canvas += rng.normal(0, cfg.noise, size=canvas.shape)
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    for x, y in dots:
        radius = rng.uniform(cfg.radius_min, cfg.radius_max)
        amp = rng.uniform(cfg.intensity_min, cfg.intensity_max)
        sigma2 = 2 * (radius / 2) ** 2
        blob = amp * np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / sigma2)
        canvas += blob[..., None] * BLOB_COLOR
    return np.clip(np.round(canvas * 255), 0, 255).astype(np.uint8)


def _gen_one(cfg, index):
    rng = np.random.default_rng([cfg.seed, index])
    count = int(rng.integers(cfg.count_min, cfg.count_max + 1))
    dots = _place(cfg, rng, count)
    return Sample(_render(cfg, rng, dots), dots, 'synth_{:05d}'.format(index))


def gen_synthetic(cfg, n, workers=1):
    """n samples; sample i depends only on (cfg, seed, i)"""
    cfg.validate()
    if n < 0:
        raise InvalidArgumentError("Sample count must be >= 0")
    LOGGER.debug("Generating %d samples, %s placement, seed %s",
                 n, cfg.placement, cfg.seed)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda i: _gen_one(cfg, i), range(n)))
    return [_gen_one(cfg, i) for i in range(n)]


def load_annotations(path):
    """image id -> list of (x, y); box rows become box centres"""
    dots = {}
    with open(path, newline='') as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return dots
        header = [h.strip() for h in header]
        if header not in (POINT_HEADER, BOX_HEADER):
            raise AnnotationParseError(path, 1, "unexpected header {}".format(
                ','.join(header)))
        for row in reader:
            line = reader.line_num
            if not row or not ''.join(row).strip():
                continue
            if len(row) != len(header):
                raise AnnotationParseError(
                    path, line, "expected {} fields, got {}".format(
                        len(header), len(row)))
            try:
                values = [float(v) for v in row[1:]]
            except ValueError as ex:
                raise AnnotationParseError(path, line, str(ex))
            if not np.isfinite(values).all():
                raise AnnotationParseError(path, line, "non-finite coordinate")
            if header == BOX_HEADER:
                x1, y1, x2, y2 = values
                values = [(x1 + x2) / 2, (y1 + y2) / 2]
            dots.setdefault(row[0].strip(), []).append(tuple(values))
    return dots


def save_annotations(path, samples):
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(POINT_HEADER)
        for sample in samples:
            for x, y in sample.dots:
                writer.writerow([sample.id + '.png', repr(float(x)),
                                 repr(float(y))])


def write_dataset(path, samples, cfg=None):
    images = os.path.join(path, DATASET_IMAGES)
    os.makedirs(images, exist_ok=True)
    for sample in samples:
        Image.fromarray(sample.image).save(
            os.path.join(images, sample.id + '.png'))
    save_annotations(os.path.join(path, DATASET_ANNOTATIONS), samples)
    manifest = {'samples': len(samples),
                'config': cfg.to_dict() if cfg is not None else None,
                'seed': cfg.seed if cfg is not None else None}
    with open(os.path.join(path, DATASET_MANIFEST), 'w') as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + '\n')
    LOGGER.info("Wrote %d samples to %s", len(samples), path)


def load_dataset(path, size=None, ratio=None):
    """Samples of a dataset directory, optionally resized"""
    images = os.path.join(path, DATASET_IMAGES)
    if not os.path.isdir(images):
        raise DatasetError("No dataset at {} (missing {}/)".format(
            path, DATASET_IMAGES))
    annotations = os.path.join(path, DATASET_ANNOTATIONS)
    dots = load_annotations(annotations) if os.path.exists(annotations) \
        else {}
    names = sorted(n for n in os.listdir(images) if n.lower().endswith('.png'))
    unknown = sorted(set(dots) - set(names))
    if unknown:
        LOGGER.warning("%d annotated images missing from %s: %s",
                       len(unknown), images, unknown[:5])
    samples = []
    for name in names:
        with Image.open(os.path.join(images, name)) as img:
            image = np.asarray(img.convert('RGB'))
        sample = Sample(image, dots.get(name, []), os.path.splitext(name)[0])
        sample.check_dots()
        if size is not None or ratio is not None:
            sample = resize_sample(sample, size, ratio)
        samples.append(sample)
    LOGGER.debug("Loaded %d samples from %s", len(samples), path)
    return samples


def resize_sample(sample, size=None, ratio=None):
    """Resize to size x size, or scale both sides by ratio; dots follow"""
    if size is not None:
        new_w = new_h = int(size)
    elif ratio is not None:
        new_w = int(round(sample.width * ratio))
        new_h = int(round(sample.height * ratio))
    else:
        return sample
    if new_w < 1 or new_h < 1:
        raise InvalidArgumentError("Resize to {}x{} is empty".format(
            new_w, new_h))
    image = np.asarray(Image.fromarray(sample.image).resize(
        (new_w, new_h), Image.BILINEAR))
    scale = np.array([new_w / sample.width, new_h / sample.height])
    dots = sample.dots * scale
    dots = np.minimum(dots, np.array([new_w, new_h]) - 1e-6)
    return Sample(image, dots, sample.id)


def crop(sample, top, left, size):
    """Fixed size x size crop; dots outside are dropped"""
    if not (0 <= top <= sample.height - size and
            0 <= left <= sample.width - size):
        raise InvalidArgumentError(
            "Crop {}x{} at ({}, {}) leaves the {}x{} image".format(
                size, size, left, top, sample.width, sample.height))
    image = sample.image[top:top + size, left:left + size]
    dots = sample.dots - np.array([left, top])
    keep = (dots[:, 0] >= 0) & (dots[:, 0] < size) & \
        (dots[:, 1] >= 0) & (dots[:, 1] < size)
    return Sample(image, dots[keep], sample.id)


def crop_augment(sample, size, seed):
    """Uniformly placed size x size crop, deterministic in seed"""
    if size > min(sample.height, sample.width):
        raise InvalidArgumentError(
            "Crop size {} exceeds the {}x{} image".format(
                size, sample.width, sample.height))
    if size % OUTPUT_STRIDE:
        raise InvalidArgumentError(
            "Crop size {} is not divisible by {}".format(size, OUTPUT_STRIDE))
    rng = np.random.default_rng(seed)
    top = int(rng.integers(0, sample.height - size + 1))
    left = int(rng.integers(0, sample.width - size + 1))
    return crop(sample, top, left, size)


def image_tensor(image):
    """(H, W, 3) uint8 -> (3, H, W) float in [0, 1]"""
    return torch.tensor(image).permute(2, 0, 1) \
        .to(torch.get_default_dtype()) / 255.0


class CountingDataset(Dataset):
    """Samples as (image, count, dots, id); crops are re-drawn per epoch
    from (seed, epoch, index)"""

    def __init__(self, samples, crop_size=None, seed=0):
        if not samples:
            raise DatasetError("Dataset is empty")
        self.samples = samples
        self.crop_size = crop_size
        self.seed = seed
        self.epoch = 0

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, idx):
        sample = self.samples[idx]
        if self.crop_size:
            sample = crop_augment(sample, self.crop_size,
                                  [self.seed, self.epoch, idx])
        return (image_tensor(sample.image), float(sample.count),
                sample.dots, sample.id)


def collate(batch):
    images, counts, dots, ids = zip(*batch)
    return (torch.stack(images), torch.tensor(counts), list(dots), list(ids))
