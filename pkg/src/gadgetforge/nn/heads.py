"""Classification heads stacked on pooled features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch

LAYER_KINDS = ("dropout", "linear", "relu", "tanh")


@dataclass(frozen=True)
class HeadSpec:
    """Ordered layers, each ``(kind, arg)``; ``arg`` is p for dropout, width for linear."""

    layers: tuple

    def __post_init__(self):
        if not self.layers or self.layers[-1][0] != "linear":
            raise ValueError("a head must end with a linear layer")
        for kind, arg in self.layers:
            if kind not in LAYER_KINDS:
                raise ValueError(f"unknown head layer {kind!r}")
            if kind == "dropout" and not 0.0 <= arg < 1.0:
                raise ValueError(f"dropout probability {arg} outside [0, 1)")
            if kind == "linear" and int(arg) < 1:
                raise ValueError("linear width must be positive")

    @property
    def num_classes(self) -> int:
        return int(self.layers[-1][1])

    def linear_shapes(self, in_dim: int) -> list[tuple[int, int]]:
        shapes, d = [], in_dim
        for kind, arg in self.layers:
            if kind == "linear":
                shapes.append((d, int(arg)))
                d = int(arg)
        return shapes

    def to_text(self) -> str:
        return ",".join(kind if kind in ("relu", "tanh") else f"{kind}:{arg}" for kind, arg in self.layers)

    @classmethod
    def parse(cls, text: str) -> "HeadSpec":
        layers = []
        for item in text.split(","):
            kind, _, arg = item.strip().partition(":")
            if kind == "dropout":
                layers.append((kind, float(arg)))
            elif kind == "linear":
                layers.append((kind, int(arg)))
            else:
                layers.append((kind, None))
        return cls(tuple(layers))


def preset(name: str, num_classes: int, width: int, dropout: float = 0.1) -> HeadSpec:
    """Heads shaped after the common checkpoint families, with ``width`` as the hidden size."""
    p = dropout
    table = {
        "bert": (("dropout", p), ("linear", num_classes)),
        "distilbert": (("linear", width), ("relu", None), ("dropout", p), ("linear", num_classes)),
        "roberta": (("dropout", p), ("linear", width), ("tanh", None), ("dropout", p),
                    ("linear", num_classes)),
        "gpt2": (("dropout", p), ("linear", num_classes)),
        "gptj": (("linear", num_classes),),
    }
    if name not in table:
        raise ValueError(f"unknown head preset {name!r}; choose from {sorted(table)}")
    return HeadSpec(table[name])


def head_forward(features, spec: HeadSpec, weights: list, rng=None, training: bool = False):
    """Apply the head; ``weights`` holds one (W, b) pair per linear layer.

    Returns the logits and a cache for ``head_backward``.
    """
    x = np.asarray(features)
    cache = []
    li = 0
    for kind, arg in spec.layers:
        if kind == "dropout":
            if training and arg > 0.0:
                keep = (rng.random(x.shape) >= arg).astype(x.dtype) / (1.0 - arg)
                x = x * keep
                cache.append(keep)
            else:
                cache.append(None)
        elif kind == "linear":
            W, b = weights[li]
            li += 1
            if x.shape[-1] != W.shape[0]:
                raise ShapeMismatch(f"head input dim {x.shape[-1]} != {W.shape[0]}")
            cache.append(x)
            x = x @ W + b
        elif kind == "relu":
            cache.append(x > 0)
            x = np.maximum(x, 0.0)
        else:
            x = np.tanh(x)
            cache.append(x)
    return x, cache


def head_backward(dlogits, spec: HeadSpec, weights: list, cache):
    """Returns (d features, [(dW, db) per linear layer])."""
    d = dlogits
    grads = []
    li = len(weights)
    for (kind, _), c in zip(reversed(spec.layers), reversed(cache)):
        if kind == "dropout":
            if c is not None:
                d = d * c
        elif kind == "linear":
            li -= 1
            W, _ = weights[li]
            x = c
            grads.append((x.reshape(-1, x.shape[-1]).T @ d.reshape(-1, d.shape[-1]),
                          d.reshape(-1, d.shape[-1]).sum(axis=0)))
            d = d @ W.T
        elif kind == "relu":
            d = d * c
        else:
            d = d * (1.0 - c * c)
    grads.reverse()
    return d, grads


def classification_head(features, spec: HeadSpec, weights: list, rng=None, training: bool = False):
    return head_forward(features, spec, weights, rng, training)[0]
