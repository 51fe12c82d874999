# -*- coding: utf-8 -*-

import math

import pytest
import torch

from pyCountMamba.block import DirectionalBlock, PatchEmbed, PatchMerging
from pyCountMamba.errors import InvalidArgumentError
from pyCountMamba.utils import zero_biases

D64 = torch.float64


def test_patch_embed_shape():
    embed = PatchEmbed(48)
    assert embed(torch.rand(1, 3, 32, 32)).shape == (1, 16, 16, 48)


def test_patch_embed_zero_image():
    embed = zero_biases(PatchEmbed(8))
    grid = embed(torch.zeros(2, 3, 8, 8))
    assert torch.equal(grid, torch.zeros(2, 4, 4, 8))


def test_patch_embed_constant_image():
    embed = PatchEmbed(3)
    with torch.no_grad():
        embed.proj.weight.zero_()
        for c in range(3):
            embed.proj.weight[c, c, 0, 0] = 1.0
        embed.proj.bias.zero_()
    image = torch.full((1, 3, 8, 8), 0.25)
    torch.testing.assert_close(embed(image), torch.full((1, 4, 4, 3), 0.25))


@pytest.mark.parametrize('shape', [(1, 3, 7, 8), (1, 3, 8, 9), (3, 8, 8)])
def test_patch_embed_rejects(shape):
    with pytest.raises(InvalidArgumentError):
        PatchEmbed(4)(torch.zeros(shape))


@pytest.mark.parametrize('directions', ['H', 'V', 'D', 'A', ['H', 'V'],
                                        ['H', 'V', 'D', 'A']])
@pytest.mark.parametrize('size', [(1, 1), (2, 3), (5, 4)])
def test_block_preserves_shape(directions, size):
    block = DirectionalBlock(6, directions, d_state=3, expand=2)
    grid = torch.randn(2, size[0], size[1], 6)
    assert block(grid).shape == grid.shape


def test_block_residual_identity():
    block = DirectionalBlock(4, ['H', 'D'], d_state=2)
    with torch.no_grad():
        block.out_proj.weight.zero_()
    grid = torch.randn(1, 3, 3, 4)
    torch.testing.assert_close(block(grid), grid)


def test_block_rejects_wrong_channels():
    with pytest.raises(InvalidArgumentError):
        DirectionalBlock(4, 'H')(torch.zeros(1, 2, 2, 5))
    with pytest.raises(InvalidArgumentError):
        DirectionalBlock(4, 'Q')


def test_vertical_block_is_transposed_horizontal():
    horizontal = DirectionalBlock(4, 'H', d_state=2).to(D64)
    vertical = DirectionalBlock(4, 'V', d_state=2).to(D64)
    vertical.load_state_dict({k.replace('paths.H', 'paths.V'): v
                              for k, v in horizontal.state_dict().items()})
    grid = torch.randn(1, 3, 5, 4, dtype=D64)
    torch.testing.assert_close(
        vertical(grid),
        horizontal(grid.transpose(1, 2)).transpose(1, 2))


def test_horizontal_block_scans_rows_as_one_sequence():
    block = DirectionalBlock(3, 'H', d_state=2).to(D64)
    grid = torch.randn(2, 3, 4, 3, dtype=D64)
    flat = block(grid.reshape(2, 1, 12, 3)).reshape(2, 3, 4, 3)
    torch.testing.assert_close(block(grid), flat)


def test_block_gradcheck():
    block = DirectionalBlock(2, 'H', d_state=1).to(D64)
    grid = torch.randn(1, 2, 2, 2, dtype=D64, requires_grad=True)
    assert torch.autograd.gradcheck(block, (grid,), eps=1e-6, atol=1e-5)


def test_block_parameter_gradcheck():
    block = DirectionalBlock(2, 'A', d_state=1).to(D64)
    grid = torch.randn(1, 2, 2, 2, dtype=D64)
    names, params = zip(*block.named_parameters())
    assert sum(p.numel() for p in params) < 2000

    def run(*values):
        return torch.func.functional_call(block, dict(zip(names, values)),
                                          (grid,))

    inputs = tuple(p.detach().clone().requires_grad_() for p in params)
    assert torch.autograd.gradcheck(run, inputs, eps=1e-6, atol=1e-5)


def test_merging_shapes():
    merge = PatchMerging(48, 96)
    assert merge(torch.randn(1, 8, 8, 48)).shape == (1, 4, 4, 96)
    assert PatchMerging(4)(torch.randn(2, 4, 2, 4)).shape == (2, 2, 1, 8)


def test_merging_zero_grid():
    merge = PatchMerging(3)
    out = merge(torch.zeros(1, 4, 4, 3))
    assert torch.equal(out, torch.zeros(1, 2, 2, 6))


def test_merging_hand_example():
    merge = PatchMerging(1, 1)
    with torch.no_grad():
        merge.reduction.weight.copy_(torch.tensor([[1., 2., 3., 4.]]))
    grid = torch.tensor([[1., 2.], [3., 4.]]).reshape(1, 2, 2, 1)
    out = merge(grid)
    assert out.shape == (1, 1, 1, 1)
    # cells concatenate as (0,0), (1,0), (0,1), (1,1) -> [1, 3, 2, 4]
    expected = 4.0 / math.sqrt(1.25 + 1e-5)
    assert out.item() == pytest.approx(expected, rel=1e-5)


def test_merging_rejects_odd():
    with pytest.raises(InvalidArgumentError):
        PatchMerging(2)(torch.zeros(1, 3, 4, 2))
