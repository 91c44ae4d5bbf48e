"""Adam optimizer over named parameter groups."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = ["Adam", "TrainingDivergenceError", "adam_apply"]


class TrainingDivergenceError(RuntimeError):
    """Non-finite gradient or loss; carries the optimizer step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


def adam_apply(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    step: int,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> None:
    """One bias-corrected Adam update, in place on param/m/v.

    ``step`` is the 1-based count of updates including this one.
    """
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Adam over a named parameter dict; moments are keyed by name.

    A missing gradient counts as zero (the moments still decay), so
    parameters untouched by the current loss stay put only while their
    moments are zero.
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 3e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self) -> None:
        self.step_count += 1
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            elif not np.all(np.isfinite(g)):
                raise TrainingDivergenceError(
                    f"non-finite gradient for {name}", self.step_count
                )
            adam_apply(
                p.data, g, self.m[name], self.v[name],
                self.step_count, self.lr, self.beta1, self.beta2, self.eps,
            )

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Moment tensors under stable names, for checkpointing."""
        out: dict[str, np.ndarray] = {}
        for k in self.params:
            out[f"m.{k}"] = self.m[k]
            out[f"v.{k}"] = self.v[k]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], step_count: int) -> None:
        for k in self.params:
            self.m[k] = arrays[f"m.{k}"].copy()
            self.v[k] = arrays[f"v.{k}"].copy()
        self.step_count = step_count
