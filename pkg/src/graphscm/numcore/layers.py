"""Affine layers and small perceptrons built on the tensor ops."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from . import tensor as T
from .tensor import Tensor


def kaiming_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def activate(x: Tensor, activation: str) -> Tensor:
    if activation == "relu":
        return T.relu(x)
    if activation == "sigmoid":
        return T.sigmoid(x)
    raise ConfigError(f"unknown activation {activation!r}; expected 'relu' or 'sigmoid'")


class Linear:
    """y = x @ W + b with weight shape (in_dim, out_dim)."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, name: str):
        self.weight = Tensor(kaiming_uniform(rng, in_dim, out_dim), requires_grad=True, name=f"{name}.W")
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True, name=f"{name}.b")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x: Tensor) -> Tensor:
        return T.add(T.matmul(x, self.weight), self.bias)

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


class Mlp:
    """A stack of Linear layers with an activation between consecutive layers.

    ``n_layers`` counts weight layers: 2 means weight-activation-weight,
    3 means weight-activation-weight-activation-weight.
    """

    def __init__(
        self,
        in_dim: int,
        hidden_dim: int,
        out_dim: int,
        n_layers: int,
        activation: str,
        rng: np.random.Generator,
        name: str,
    ):
        if n_layers < 1:
            raise ConfigError("Mlp needs at least one layer")
        dims = [in_dim] + [hidden_dim] * (n_layers - 1) + [out_dim]
        self.layers = [
            Linear(dims[i], dims[i + 1], rng, f"{name}.{i}") for i in range(n_layers)
        ]
        self.activation = activation

    def __call__(self, x: Tensor) -> Tensor:
        out = self.layers[0](x)
        for layer in self.layers[1:]:
            out = layer(activate(out, self.activation))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]
