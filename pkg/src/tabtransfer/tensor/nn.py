"""Small module system on top of the tensor ops: parameters, buffers, layers."""

from __future__ import annotations

from typing import Iterator, Optional

import numpy as np

from . import ops
from .autograd import Tensor, default_dtype


class Module:
    """Base class. Parameters are ``Tensor`` attributes with ``requires_grad``;
    submodules are ``Module`` attributes or lists of modules; buffers are
    numpy arrays whose attribute names are listed in ``_buffer_names``.
    """

    def __init__(self):
        self.training = True
        self._buffer_names: list[str] = []
        self.rng: Optional[np.random.Generator] = None

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        setattr(self, name, value)
        if name not in self._buffer_names:
            self._buffer_names.append(name)

    def _children(self) -> Iterator[tuple[str, "Module"]]:
        for key, value in vars(self).items():
            if isinstance(value, Module):
                yield key, value
            elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Module) for v in value):
                for i, v in enumerate(value):
                    yield f"{key}.{i}", v

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for key, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                out[prefix + key] = value
        for key, child in self._children():
            out.update(child.named_parameters(prefix + key + "."))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def named_buffers(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {prefix + name: getattr(self, name) for name in self._buffer_names}
        for key, child in self._children():
            out.update(child.named_buffers(prefix + key + "."))
        return out

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, child in self._children():
            yield from child.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def set_rng(self, rng: Optional[np.random.Generator]) -> "Module":
        for m in self.modules():
            m.rng = rng
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        sd = {k: v.data.copy() for k, v in self.named_parameters().items()}
        sd.update({k: v.copy() for k, v in self.named_buffers().items()})
        return sd

    def load_state_dict(self, state: dict, strict: bool = True) -> None:
        params = self.named_parameters()
        buffers = self.named_buffers()
        expected = set(params) | set(buffers)
        if strict:
            missing = expected - set(state)
            unexpected = set(state) - expected
            if missing or unexpected:
                raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for name, p in params.items():
            if name in state:
                value = np.asarray(state[name])
                if value.shape != p.shape:
                    raise ValueError(f"{name}: shape {value.shape} != {p.shape}")
                p.data = value.astype(p.dtype).copy()
        for name, buf in buffers.items():
            if name in state:
                buf[...] = state[name]

    def n_parameters(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):  # pragma: no cover - abstract
        raise NotImplementedError


def _uniform(rng: np.random.Generator, bound: float, shape) -> Tensor:
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(default_dtype()), requires_grad=True)


class Linear(Module):
    """``y = x @ W + b`` with ``W`` stored as ``(in, out)``.

    Initialized like the classic Kaiming-uniform default: both weight and bias
    drawn from ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``.
    """

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        bound = 1.0 / np.sqrt(d_in)
        self.weight = _uniform(rng, bound, (d_in, d_out))
        self.bias = _uniform(rng, bound, (d_out,)) if bias else None
        self.d_in, self.d_out = d_in, d_out

    def forward(self, x: Tensor) -> Tensor:
        y = ops.matmul(x, self.weight)
        return ops.add(y, self.bias) if self.bias is not None else y


class LayerNorm(Module):
    def __init__(self, d: int):
        super().__init__()
        dt = default_dtype()
        self.weight = Tensor(np.ones(d, dtype=dt), requires_grad=True)
        self.bias = Tensor(np.zeros(d, dtype=dt), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.weight, self.bias)


class BatchNorm1d(Module):
    def __init__(self, d: int, momentum: float = 0.1):
        super().__init__()
        dt = default_dtype()
        self.weight = Tensor(np.ones(d, dtype=dt), requires_grad=True)
        self.bias = Tensor(np.zeros(d, dtype=dt), requires_grad=True)
        self.register_buffer("running_mean", np.zeros(d, dtype=dt))
        self.register_buffer("running_var", np.ones(d, dtype=dt))
        self.momentum = momentum

    def forward(self, x: Tensor) -> Tensor:
        # a single-row batch has no spread to normalize by
        training = self.training and x.shape[0] > 1
        return ops.batch_norm(x, self.weight, self.bias, self.running_mean, self.running_var, training, self.momentum)


class Embedding(Module):
    def __init__(self, n: int, d: int, rng: np.random.Generator):
        super().__init__()
        self.weight = Tensor((rng.standard_normal((n, d)) / np.sqrt(d)).astype(default_dtype()), requires_grad=True)

    def forward(self, index: np.ndarray) -> Tensor:
        return ops.embedding(self.weight, index)


class Dropout(Module):
    def __init__(self, p: float):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {p}")
        self.p = p

    def forward(self, x: Tensor) -> Tensor:
        return ops.dropout(x, self.p, self.rng, self.training)
