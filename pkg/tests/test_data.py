# -*- coding: utf-8 -*-

import filecmp
import os

import numpy as np
import pytest
import torch

from pyCountMamba.data import (CountingDataset, Sample, SynthConfig,
                               band_offset, collate, crop, crop_augment,
                               gen_synthetic, image_tensor, load_annotations,
                               load_dataset, resize_sample, write_dataset)
from pyCountMamba.errors import (AnnotationParseError, ConfigError,
                                 DatasetError, InvalidArgumentError)


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_zero_count_gives_plain_background():
    cfg = SynthConfig(image_size=16, count_min=0, count_max=0, noise=0.0)
    samples = gen_synthetic(cfg, 3)
    assert [s.count for s in samples] == [0, 0, 0]
    for sample in samples:
        assert (sample.image == sample.image[0, 0]).all()


def test_fixed_count():
    cfg = SynthConfig(image_size=32, count_min=5, count_max=5, seed=2)
    samples = gen_synthetic(cfg, 100)
    assert all(s.count == 5 for s in samples)
    for sample in samples:
        sample.check_dots()
        assert sample.image.shape == (32, 32, 3)
        assert sample.image.dtype == np.uint8


def test_generation_is_deterministic():
    cfg = SynthConfig(image_size=32, seed=9)
    first, second = gen_synthetic(cfg, 5), gen_synthetic(cfg, 5, workers=3)
    for a, b in zip(first, second):
        assert a.id == b.id
        assert np.array_equal(a.image, b.image)
        assert np.array_equal(a.dots, b.dots)
    other = gen_synthetic(cfg.updated(seed=10), 5)
    assert any(not np.array_equal(a.image, b.image)
               for a, b in zip(first, other))


def test_sample_prefix_is_stable():
    cfg = SynthConfig(image_size=16, seed=4)
    assert np.array_equal(gen_synthetic(cfg, 2)[1].image,
                          gen_synthetic(cfg, 6)[1].image)


@pytest.mark.parametrize('placement', ['DiagonalBand', 'AntiDiagonalBand',
                                       'RowBand', 'ColumnBand'])
def test_band_placements(placement):
    cfg = SynthConfig(image_size=64, count_min=10, count_max=10,
                      placement=placement, band_width=0.1, seed=5)
    dots = np.concatenate([s.dots for s in gen_synthetic(cfg, 20)])
    inside = band_offset(cfg, dots[:, 0], dots[:, 1]) <= cfg.band_width
    assert inside.mean() >= 0.9


def test_margin_is_respected():
    cfg = SynthConfig(image_size=64, count_min=8, count_max=8, margin=14)
    dots = np.concatenate([s.dots for s in gen_synthetic(cfg, 10)])
    assert (dots >= 14).all() and (dots < 50).all()


@pytest.mark.parametrize('values', [
    {'image_size': 20}, {'count_min': 3, 'count_max': 2},
    {'placement': 'Spiral'}, {'radius_min': 0}, {'noise': -1},
    {'margin': 40, 'image_size': 64},
])
def test_invalid_synth_config(values):
    with pytest.raises(ConfigError):
        SynthConfig.from_dict(values)


def test_unknown_synth_key():
    with pytest.raises(ConfigError):
        SynthConfig.from_dict({'imagesize': 32})


def test_annotations_points(tmp_path):
    path = _write(tmp_path / 'a.csv', "image,x,y\na.png,10,20\n"
                                      "a.png,1.5,2\nb.png,0,0\n")
    dots = load_annotations(path)
    assert dots == {'a.png': [(10.0, 20.0), (1.5, 2.0)], 'b.png': [(0.0, 0.0)]}


def test_annotations_header_only(tmp_path):
    assert load_annotations(_write(tmp_path / 'a.csv', "image,x,y\n")) == {}


def test_annotations_boxes(tmp_path):
    path = _write(tmp_path / 'a.csv', "image,x1,y1,x2,y2\na.png,10,20,30,40\n")
    assert load_annotations(path) == {'a.png': [(20.0, 30.0)]}


@pytest.mark.parametrize('text, line', [
    ("image,x,y\na.png,1,2\na.png,oops,3\n", 3),
    ("image,x,y\na.png,1\n", 2),
    ("image,x,y\na.png,1,2\n\na.png,nan,1\n", 4),
    ("img,x,y\n", 1),
])
def test_annotation_errors(tmp_path, text, line):
    path = _write(tmp_path / 'bad.csv', text)
    with pytest.raises(AnnotationParseError) as err:
        load_annotations(path)
    assert err.value.line == line
    assert str(err.value).startswith('{}:{}:'.format(path, line))


def test_dataset_round_trip(tmp_path, tiny_synth):
    samples = gen_synthetic(tiny_synth, 4)
    path = str(tmp_path / 'ds')
    write_dataset(path, samples, tiny_synth)
    assert sorted(os.listdir(path)) == ['annotations.csv', 'images',
                                        'manifest']
    loaded = load_dataset(path)
    assert [s.id for s in loaded] == [s.id for s in samples]
    for a, b in zip(samples, loaded):
        assert np.array_equal(a.image, b.image)
        np.testing.assert_allclose(a.dots, b.dots)


def test_dataset_bytes_are_reproducible(tmp_path, tiny_synth):
    for name in ('one', 'two'):
        write_dataset(str(tmp_path / name), gen_synthetic(tiny_synth, 3),
                      tiny_synth)
    match, mismatch, errors = filecmp.cmpfiles(
        str(tmp_path / 'one'), str(tmp_path / 'two'),
        ['annotations.csv', 'manifest'] +
        ['images/synth_{:05d}.png'.format(i) for i in range(3)],
        shallow=False)
    assert not mismatch and not errors and len(match) == 5


def test_missing_dataset(tmp_path):
    with pytest.raises(DatasetError):
        load_dataset(str(tmp_path / 'nothing'))


def test_dataset_rejects_dots_outside(tmp_path, tiny_synth):
    path = str(tmp_path / 'ds')
    write_dataset(path, gen_synthetic(tiny_synth, 1), tiny_synth)
    _write(tmp_path / 'ds' / 'annotations.csv',
           "image,x,y\nsynth_00000.png,16,3\n")
    with pytest.raises(InvalidArgumentError):
        load_dataset(path)


def test_resize_modes():
    sample = Sample(np.zeros((64, 32, 3), dtype=np.uint8), [(16, 32)])
    square = resize_sample(sample, size=16)
    assert square.image.shape == (16, 16, 3)
    np.testing.assert_allclose(square.dots, [(8, 8)])
    small = resize_sample(sample, ratio=1 / 8.)
    assert small.image.shape == (8, 4, 3)
    np.testing.assert_allclose(small.dots, [(2, 4)])
    assert small.count == sample.count


def test_crop_example():
    sample = Sample(np.zeros((512, 512, 3), dtype=np.uint8), [(100, 100)])
    cropped = crop(sample, 64, 64, 256)
    np.testing.assert_allclose(cropped.dots, [(36, 36)])
    assert cropped.image.shape == (256, 256, 3)


def test_crop_full_size_is_identity():
    sample = gen_synthetic(SynthConfig(image_size=32, count_min=3), 1)[0]
    cropped = crop_augment(sample, 32, seed=0)
    assert np.array_equal(cropped.image, sample.image)
    np.testing.assert_allclose(cropped.dots, sample.dots)


def test_crop_drops_outside_dots():
    sample = Sample(np.zeros((32, 32, 3), dtype=np.uint8),
                    [(2, 2), (20, 20), (30, 5)])
    cropped = crop(sample, 16, 16, 16)
    np.testing.assert_allclose(cropped.dots, [(4, 4)])


def test_crop_augment_properties():
    sample = gen_synthetic(SynthConfig(image_size=64, count_min=10,
                                       count_max=10), 1)[0]
    for seed in range(20):
        cropped = crop_augment(sample, 32, seed)
        assert cropped.count <= sample.count
        cropped.check_dots()
        again = crop_augment(sample, 32, seed)
        assert np.array_equal(cropped.image, again.image)


@pytest.mark.parametrize('size', [72, 20])
def test_crop_augment_rejects(size):
    sample = Sample(np.zeros((64, 64, 3), dtype=np.uint8))
    with pytest.raises(InvalidArgumentError):
        crop_augment(sample, size, 0)


def test_image_tensor_range():
    image = np.full((8, 8, 3), 255, dtype=np.uint8)
    tensor = image_tensor(image)
    assert tensor.shape == (3, 8, 8)
    assert torch.equal(tensor, torch.ones(3, 8, 8))


@pytest.mark.filterwarnings('error')
def test_image_tensor_copies_read_only_pixels():
    image = np.zeros((8, 8, 3), dtype=np.uint8)
    image.flags.writeable = False
    tensor = image_tensor(image)
    tensor += 1
    assert (image == 0).all()


def test_counting_dataset_and_collate():
    samples = gen_synthetic(SynthConfig(image_size=32, seed=1), 3)
    dataset = CountingDataset(samples, crop_size=16, seed=0)
    images, counts, dots, ids = collate([dataset[i] for i in range(3)])
    assert images.shape == (3, 3, 16, 16)
    assert counts.tolist() == [float(len(d)) for d in dots]
    assert ids == [s.id for s in samples]
    dataset.epoch = 1
    first = dataset[0][0]
    assert torch.equal(dataset[0][0], first)
    with pytest.raises(DatasetError):
        CountingDataset([])
