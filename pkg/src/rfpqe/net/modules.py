from __future__ import annotations

import math
from typing import Iterator, Mapping

import numpy as np

from ..autograd import ops
from ..autograd.tensor import Tensor
from ..errors import BindingError


class Module:
    """Parameter container; parameters are discovered from attributes in definition order."""

    def _children(self) -> Iterator[tuple[str, object]]:
        for key, value in vars(self).items():
            if key.startswith("_"):
                continue
            if isinstance(value, (Tensor, Module)):
                yield key, value
            elif isinstance(value, list) and value and isinstance(value[0], Module):
                for i, m in enumerate(value):
                    yield f"{key}.{i}", m

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for key, value in self._children():
            name = f"{prefix}{key}"
            if isinstance(value, Tensor):
                out[name] = value
            else:
                out.update(value.named_parameters(name + "."))
        return out

    def parameter_count(self) -> int:
        return sum(p.size for p in self.named_parameters().values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = sorted(set(params) - set(state))
        extra = sorted(set(state) - set(params))
        wrong = sorted(k for k in set(params) & set(state) if tuple(np.shape(state[k])) != params[k].shape)
        if missing or extra or wrong:
            parts = []
            if missing:
                parts.append(f"missing: {', '.join(missing)}")
            if extra:
                parts.append(f"unexpected: {', '.join(extra)}")
            if wrong:
                parts.append(f"shape mismatch: {', '.join(wrong)}")
            raise BindingError("cannot bind weights (" + "; ".join(parts) + ")")
        for k, p in params.items():
            p.data = np.array(state[k], dtype=p.dtype).reshape(p.shape)
            p.grad = None

    def astype(self, dtype) -> "Module":
        for p in self.named_parameters().values():
            p.data = p.data.astype(dtype)
            p.grad = None
        return self

    def zero_(self) -> "Module":
        for p in self.named_parameters().values():
            p.data[...] = 0
        return self


def kaiming_uniform(rng: np.random.Generator, shape: tuple[int, ...], dtype) -> np.ndarray:
    fan_in = int(np.prod(shape[1:]))
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, kernel: int, rng: np.random.Generator, dtype=np.float32):
        self.kernel = kernel
        self.weight = Tensor(kaiming_uniform(rng, (cout, cin, kernel, kernel), dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=1, padding=self.kernel // 2)
