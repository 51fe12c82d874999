# -*- coding: utf-8 -*-

import itertools

import numpy as np
import pytest
import torch

from pyCountMamba.counter import (Counter, RedundantCountMap, coverage_map,
                                  image_count, load_map_png, load_map_text,
                                  normalize_map, predict_redundant_map,
                                  save_map_png, save_map_text, window_areas,
                                  window_counts_from_dots)
from pyCountMamba.errors import InvalidArgumentError
from pyCountMamba.utils import zero_biases

D64 = torch.float64


def _brute_coverage(height, width, r, s):
    cover = np.zeros((height, width), dtype=np.int64)
    for a, b in itertools.product(range(height // s), range(width // s)):
        cover[a * s:a * s + r, b * s:b * s + r] += 1
    return cover


def _brute_windows(dots, height, width, r, s):
    counts = np.zeros((height // s, width // s))
    for x, y in dots:
        for a, b in itertools.product(range(height // s), range(width // s)):
            if a * s <= y < a * s + r and b * s <= x < b * s + r:
                counts[a, b] += 1
    return counts


def _map(values, r, s):
    height, width = values.shape[-2] * s, values.shape[-1] * s
    return RedundantCountMap(values, r, s, height, width)


def test_coverage_without_overlap():
    assert (coverage_map(16, 8, 4, 4) == 1).all()


def test_coverage_small_example():
    cover = coverage_map(8, 8, 4, 2)
    assert (cover[2:6, 2:6] == 4).all()
    assert cover[0, 0] == 1
    assert np.array_equal(cover.numpy(), _brute_coverage(8, 8, 4, 2))


def test_coverage_default_window():
    cover = coverage_map(512, 512, 64, 8)
    assert (cover[64:448, 64:448] == 64).all()


def test_coverage_rejects_window_below_stride():
    with pytest.raises(InvalidArgumentError):
        coverage_map(8, 8, 2, 4)
    with pytest.raises(InvalidArgumentError):
        coverage_map(10, 8, 4, 4)


@pytest.mark.parametrize('r, s', [(2, 1), (4, 2), (8, 2), (12, 4), (16, 8)])
def test_overlap_fraction(r, s):
    height = width = 4 * r
    cover = np.zeros((height, width), dtype=int)
    cover[0:r, 0:r] += 1
    cover[0:r, s:s + r] += 1
    shared = int((cover == 2).sum())
    assert shared == (r - s) * r
    assert shared / (r * r) == pytest.approx((r - s) / r)


def test_window_areas_are_clipped():
    areas = window_areas(8, 8, 4, 2)
    assert areas[0, 0] == 16
    assert areas[-1, -1] == 4


def test_normalize_without_overlap():
    values = torch.rand(4, 4, dtype=D64)
    normalized = normalize_map(_map(values, 4, 4))
    assert normalized.values.shape == (16, 16)
    assert image_count(normalized).item() == pytest.approx(values.sum().item())


@pytest.mark.parametrize('r, s', [(8, 2), (64, 8), (4, 2)])
def test_conservation_under_full_coverage(r, s):
    size = 4 * r
    values = torch.rand(size // s, size // s, dtype=D64)
    first = (r - s) // s
    values[:first] = 0
    values[:, :first] = 0
    k = (r // s) ** 2
    total = image_count(normalize_map(_map(values, r, s))).item()
    assert total == pytest.approx(values.sum().item() / k, rel=1e-6)


def test_single_center_dot():
    windows = window_counts_from_dots([(32, 32)], 64, 64, 8, 2, D64)
    normalized = normalize_map(windows)
    assert image_count(normalized).item() == pytest.approx(1.0, abs=1e-6)


def test_exact_recovery_random_dots(rng):
    r, s, size = 8, 2, 64
    low = 2 * r - s
    for _ in range(100):
        n = int(rng.integers(0, 20))
        dots = rng.uniform(low, size, size=(n, 2))
        windows = window_counts_from_dots(dots, size, size, r, s, D64)
        count = image_count(normalize_map(windows)).item()
        assert count == pytest.approx(n, abs=1e-4)


def test_normalize_is_linear():
    a = torch.rand(2, 8, 8, dtype=D64)
    b = torch.rand(2, 8, 8, dtype=D64)
    lhs = normalize_map(_map(2 * a - 3 * b, 8, 4)).values
    rhs = 2 * normalize_map(_map(a, 8, 4)).values - \
        3 * normalize_map(_map(b, 8, 4)).values
    torch.testing.assert_close(lhs, rhs)


def test_normalize_keeps_sign():
    normalized = normalize_map(_map(torch.rand(3, 5, 5), 16, 8))
    assert normalized.values.shape == (3, 40, 40)
    assert (normalized.values >= 0).all()


def test_image_count_examples():
    assert image_count(torch.zeros(4, 6)).item() == 0
    assert image_count(torch.full((4, 6), 1 / 24.)).item() == \
        pytest.approx(1.0)


def test_window_counts_examples():
    empty = window_counts_from_dots([], 8, 8, 4, 4)
    assert torch.equal(empty.values, torch.zeros(2, 2))
    center = window_counts_from_dots([(4, 4)], 8, 8, 4, 4)
    assert center.values.sum().item() == 1
    assert center.values[1, 1].item() == 1


def test_window_counts_match_enumeration(rng):
    for _ in range(20):
        dots = rng.uniform(0, 32, size=(int(rng.integers(0, 12)), 2))
        windows = window_counts_from_dots(dots, 32, 32, 8, 2, D64)
        np.testing.assert_allclose(windows.values.numpy(),
                                   _brute_windows(dots, 32, 32, 8, 2))


@pytest.mark.parametrize('dot', [(-1, 3), (3, 8), (8, 0), (0, 9.5)])
def test_window_counts_reject_outside(dot):
    with pytest.raises(InvalidArgumentError):
        window_counts_from_dots([dot], 8, 8, 4, 2)


def test_map_shape_checked():
    with pytest.raises(InvalidArgumentError):
        RedundantCountMap(torch.zeros(3, 4), 8, 4, 16, 16)


def test_counter_head():
    head = zero_biases(Counter(6))
    assert torch.equal(head(torch.zeros(2, 4, 4, 6)), torch.zeros(2, 4, 4))
    assert (Counter(6)(torch.randn(2, 4, 4, 6)) >= 0).all()


@pytest.mark.parametrize('seed', range(10))
def test_counter_starts_open(seed):
    torch.manual_seed(seed)
    head = Counter(16)
    counts = head(torch.randn(2, 4, 4, 16))
    assert (counts > 0).all()
    counts.sum().backward()
    assert head.fc1.weight.grad.abs().sum() > 0


def test_counter_hand_trace():
    head = Counter(1, hidden=1)
    with torch.no_grad():
        head.fc1.weight.fill_(2.0)
        head.fc1.bias.fill_(0.0)
        head.fc2.weight.fill_(1.0)
        head.fc2.bias.fill_(-0.5)
    features = torch.tensor([[0.0, 1.0], [-1.0, 2.0]]).reshape(1, 2, 2, 1)
    silu = torch.nn.functional.silu(2 * features.squeeze(-1))
    torch.testing.assert_close(head(features), torch.relu(silu - 0.5))


def test_predict_redundant_map_shape():
    head = Counter(8)
    count_map = predict_redundant_map(torch.rand(1, 32, 32, 8), head, 256,
                                      256, 64, 8)
    assert count_map.values.shape == (1, 32, 32)
    with pytest.raises(InvalidArgumentError):
        predict_redundant_map(torch.rand(1, 16, 32, 8), head, 256, 256, 64, 8)


def test_text_map_round_trip(tmp_path):
    values = np.random.rand(5, 7)
    path = str(tmp_path / 'map.txt')
    save_map_text(values, path)
    np.testing.assert_allclose(load_map_text(path), values, atol=1e-12)
    first = open(path).readline().split()
    assert len(first) == 7 and all(len(v.split('.')[1]) == 12 for v in first)


def test_png_map_round_trip(tmp_path):
    values = np.random.rand(6, 4) * 0.01
    path = str(tmp_path / 'map.png')
    save_map_png(values, path)
    decoded = load_map_png(path)
    step = values.max() / 65535
    np.testing.assert_allclose(decoded, values, atol=step)
    assert abs(decoded.sum() - values.sum()) < values.size * step


def test_png_blank_map(tmp_path):
    path = str(tmp_path / 'blank.png')
    save_map_png(np.zeros((3, 3)), path)
    assert load_map_png(path).sum() == 0


@pytest.mark.filterwarnings('error')
def test_normalize_map_without_tensor_warnings():
    count_map = RedundantCountMap(torch.ones(1, 5, 3), 16, 8, 40, 24)
    normalized = normalize_map(count_map)
    assert normalized.values.shape == (1, 40, 24)
