# -*- coding: utf-8 -*-

import pytest
import torch

from pyCountMamba.errors import ConfigError, InvalidArgumentError
from pyCountMamba.model import CountMamba, ModelConfig
from pyCountMamba.utils import zero_biases


def _tiny(**overrides):
    values = dict(window=8)
    values.update(overrides)
    return CountMamba(ModelConfig.from_preset('tiny', **values))


def test_presets():
    base = ModelConfig.from_preset('base')
    assert base.dims == (48, 96, 192) and base.depths == (2, 2, 2)
    assert base.d_state == 16 and base.window == 64
    assert ModelConfig.from_preset('tiny', d_state=None).d_state == 4
    with pytest.raises(ConfigError):
        ModelConfig.from_preset('huge')


@pytest.mark.parametrize('values', [
    {'dims': [8, 16]}, {'window': 4}, {'experts': 'five'},
    {'fusion_mode': 'sideways'}, {'directions': 'XY'}, {'chunk_size': -1},
])
def test_invalid_model_config(values):
    with pytest.raises(ConfigError):
        ModelConfig.from_dict(values)


def test_config_lists_become_tuples():
    cfg = ModelConfig.from_dict({'dims': [4, 8, 8], 'depths': [1, 0, 1]})
    assert cfg.dims == (4, 8, 8)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


def test_model_output_shapes():
    model = _tiny(window=16)
    out = model(torch.rand(2, 3, 32, 24))
    assert out.count.shape == (2,)
    assert out.redundant.shape == (2, 4, 3)
    assert out.normalized.shape == (2, 32, 24)
    assert out.fusion_weights.shape == (2, 4, 3, 4)
    assert out.experts == ['H', 'V', 'D', 'A']
    torch.testing.assert_close(out.count, out.normalized.sum((-2, -1)))


def test_model_rejects_bad_images():
    with pytest.raises(InvalidArgumentError):
        _tiny()(torch.rand(1, 3, 20, 16))


def test_blank_image_zero_bias_counts_zero():
    model = zero_biases(_tiny()).eval()
    out = model(torch.zeros(1, 3, 16, 16))
    assert out.count.item() == 0.0


def test_parameter_groups():
    groups = _tiny().parameter_groups()
    assert sorted(groups) == ['branch_A', 'branch_D', 'branch_H', 'branch_V',
                              'cnn', 'fusion', 'head']
    plain = _tiny(adaptive_fusion=False, cnn_branch=False, directions='DA',
                  experts='two')
    assert sorted(plain.parameter_groups()) == ['branch_DA', 'head']
