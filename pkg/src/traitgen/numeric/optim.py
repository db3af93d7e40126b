"""Trainable parameters, the Adam update, and global gradient clipping."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from ..errors import DivergenceError, ShapeError
from .matrix import Matrix


class Parameter:
    """A weight matrix with its gradient and Adam state.

    ``value``, ``grad``, ``opt_m`` and ``opt_v`` always share one shape.
    Updates require exclusive access; everything else is read-only safe.
    """

    __slots__ = ("name", "value", "grad", "opt_m", "opt_v", "step_count")

    def __init__(self, name: str, value: Matrix):
        self.name = name
        self.value = value
        self.grad = Matrix.zeros(value.rows, value.cols)
        self.opt_m = Matrix.zeros(value.rows, value.cols)
        self.opt_v = Matrix.zeros(value.rows, value.cols)
        self.step_count = 0

    def zero_grad(self) -> None:
        self.grad.a.fill(0.0)

    def add_grad(self, g: Matrix) -> None:
        if g.shape != self.value.shape:
            raise ShapeError(
                f"gradient shape {g.shape} != parameter {self.name!r} shape {self.value.shape}"
            )
        self.grad.a += g.a

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, {self.value.rows}x{self.value.cols})"


def zero_grads(params: Iterable[Parameter]) -> None:
    for p in params:
        p.zero_grad()


def adam_step(
    param: Parameter,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Parameter:
    """One Adam update with bias correction.

    Increments ``step_count`` and updates ``value`` in place; the gradient
    buffer is left intact until ``zero_grad`` is called.
    """
    g = param.grad.a
    if not np.isfinite(g).all():
        raise DivergenceError(f"non-finite gradient in parameter {param.name!r}")
    param.step_count += 1
    t = param.step_count
    m, v = param.opt_m.a, param.opt_v.a
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    param.value.a -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return param


def clip_global_norm(params: Iterable[Parameter], max_norm: float = 5.0) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``.

    Returns the scale that was applied (1.0 when no clipping happened).
    """
    params = list(params)
    total = 0.0
    for p in params:
        g = p.grad.a
        total += float((g * g).sum())
    norm = float(np.sqrt(total))
    if norm <= max_norm or norm == 0.0:
        return 1.0
    scale = max_norm / norm
    for p in params:
        p.grad.a *= scale
    return scale
