from __future__ import annotations

import numpy as np
import pytest

from gadgetforge.errors import ShapeMismatch
from gadgetforge.nn.heads import HeadSpec, classification_head, head_backward, head_forward, preset


def _weights(rng, spec, d):
    return [(rng.normal(size=s), rng.normal(size=s[1])) for s in spec.linear_shapes(d)]


def test_inference_dropout_is_identity():
    rng = np.random.default_rng(0)
    spec = HeadSpec((("dropout", 0.5), ("linear", 3)))
    w = _weights(rng, spec, 4)
    x = rng.normal(size=(5, 4))
    out = classification_head(x, spec, w, rng, training=False)
    assert np.array_equal(out, x @ w[0][0] + w[0][1])


def test_relu_zeroes_negatives():
    spec = HeadSpec((("relu", None), ("linear", 1)))
    out = classification_head(np.array([[-3.0, -0.5]]), spec, [(np.ones((2, 1)), np.zeros(1))])
    assert out[0, 0] == 0.0


def test_bert_style_spec_matches_sequential_oracle():
    rng = np.random.default_rng(1)
    spec = preset("roberta", 2, 6)
    w = _weights(rng, spec, 4)
    x = rng.normal(size=(3, 4))
    h = np.tanh(x @ w[0][0] + w[0][1])
    ref = h @ w[1][0] + w[1][1]
    assert np.allclose(classification_head(x, spec, w), ref, atol=1e-14)
    bert = preset("bert", 2, 16)
    wb = _weights(rng, bert, 4)
    assert np.allclose(classification_head(x, bert, wb), x @ wb[0][0] + wb[0][1])


def test_training_dropout_scales_survivors():
    rng = np.random.default_rng(2)
    spec = HeadSpec((("dropout", 0.25), ("linear", 2)))
    x = np.ones((2000, 4))
    w = [(np.eye(4)[:, :2], np.zeros(2))]
    out, _ = head_forward(x, spec, w, rng, training=True)
    vals = set(np.round(out.ravel(), 12))
    assert vals <= {0.0, round(1 / 0.75, 12)}
    assert abs((out == 0).mean() - 0.25) < 0.03


def test_head_backward_numeric():
    rng = np.random.default_rng(3)
    spec = preset("distilbert", 3, 5)
    w = _weights(rng, spec, 4)
    x = rng.normal(size=(2, 4))
    G = rng.normal(size=(2, 3))
    _, cache = head_forward(x, spec, w)
    dx, grads = head_backward(G, spec, w, cache)
    num = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        o = x[idx]
        x[idx] = o + 1e-6
        a = (head_forward(x, spec, w)[0] * G).sum()
        x[idx] = o - 1e-6
        b = (head_forward(x, spec, w)[0] * G).sum()
        x[idx] = o
        num[idx] = (a - b) / 2e-6
    assert np.allclose(num, dx, atol=1e-6)
    assert [g[0].shape for g in grads] == [s for s in spec.linear_shapes(4)]


def test_spec_validation_and_text():
    spec = preset("roberta", 2, 8)
    assert HeadSpec.parse(spec.to_text()) == spec
    assert spec.num_classes == 2
    for bad in ((("relu", None),), (("dropout", 1.0), ("linear", 2)), (("conv", 1), ("linear", 2))):
        with pytest.raises(ValueError):
            HeadSpec(bad)
    with pytest.raises(ValueError):
        preset("xlnet", 2, 8)
    with pytest.raises(ShapeMismatch):
        classification_head(np.zeros((1, 3)), preset("gptj", 2, 4), [(np.zeros((4, 2)), np.zeros(2))])
