"""Finite-difference verification of analytic gradients.

Compares each sampled parameter coordinate's analytic gradient against a
central difference of the loss. Failures are reported, never raised, so a
report can cover every parameter of a model in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .optim import Parameter, zero_grads
from .rng import Rng


@dataclass
class GradCheckReport:
    tol: float
    max_rel_error: dict[str, float] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values()) if self.max_rel_error else 0.0

    @property
    def passed(self) -> bool:
        return self.worst < self.tol

    def summary(self) -> str:
        lines = [
            f"{name}: max relative error {err:.3e}"
            for name, err in sorted(self.max_rel_error.items())
        ]
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"overall: {self.worst:.3e} vs tolerance {self.tol:.1e} -> {verdict}")
        return "\n".join(lines)


def gradient_check(
    loss_fn: Callable[[], float],
    grad_fn: Callable[[], float],
    params: Sequence[Parameter],
    *,
    h: float = 1e-5,
    tol: float = 1e-4,
    rng: Rng | None = None,
    max_coords_per_param: int | None = None,
) -> GradCheckReport:
    """Check analytic gradients of a scalar loss against central differences.

    ``loss_fn`` runs the forward pass only; ``grad_fn`` runs forward plus
    backward, accumulating into each parameter's ``grad``. Both must be
    deterministic functions of the parameter values. When
    ``max_coords_per_param`` is given, that many coordinates are sampled per
    parameter using ``rng``; otherwise every coordinate is checked.
    """
    params = list(params)
    zero_grads(params)
    grad_fn()
    analytic = {p.name: p.grad.a.copy() for p in params}

    report = GradCheckReport(tol=tol)
    for p in params:
        flat_value = p.value.a.reshape(-1)
        n = flat_value.size
        if max_coords_per_param is None or max_coords_per_param >= n:
            coords = range(n)
        else:
            if rng is None:
                raise ValueError("sampling coordinates requires an rng")
            coords = sorted({rng.randint(n) for _ in range(max_coords_per_param)})
        worst = 0.0
        flat_analytic = analytic[p.name].reshape(-1)
        for idx in coords:
            original = flat_value[idx]
            flat_value[idx] = original + h
            plus = loss_fn()
            flat_value[idx] = original - h
            minus = loss_fn()
            flat_value[idx] = original
            numeric = (plus - minus) / (2.0 * h)
            a = flat_analytic[idx]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > worst:
                worst = rel
        report.max_rel_error[p.name] = worst
    return report
