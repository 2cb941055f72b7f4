"""
Adaptive-moment optimizer.

`adam_step` is the functional update; `Adam` owns the state for a named set
of parameters and is what the trainer uses.
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from ..exceptions import ShapeMismatchError
from .tensor import Parameter

DEFAULT_LR = 1e-4
DEFAULT_BETAS = (0.9, 0.999)
DEFAULT_EPS = 1e-8


def _round32(values: np.ndarray) -> np.ndarray:
    return values.astype(np.float32).astype(np.float64)


@dataclass
class OptimizerState:
    """First and second moment estimates per parameter name."""

    lr: float = DEFAULT_LR
    betas: Tuple[float, float] = DEFAULT_BETAS
    eps: float = DEFAULT_EPS
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
) -> Dict[str, np.ndarray]:
    """
    One bias-corrected Adam update.

    Args:
        params: Current values by name
        grads: Gradients by name (same shapes)
        state: Moments and step count; updated in place

    Returns:
        New parameter values by name
    """
    beta1, beta2 = state.betas
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step

    updated = {}
    for name, value in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != np.shape(value):
            raise ShapeMismatchError(
                f"Gradient for '{name}' has shape {grad.shape}, parameter has {np.shape(value)}"
            )
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(grad)
            v = np.zeros_like(grad)
        # moments kept at checkpoint precision
        m = _round32(beta1 * m + (1.0 - beta1) * grad)
        v = _round32(beta2 * v + (1.0 - beta2) * grad * grad)
        state.m[name], state.v[name] = m, v
        m_hat = m / correction1
        v_hat = v / correction2
        updated[name] = np.asarray(value) - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return updated


class Adam:
    """
    Adam over a dict of named Parameters.

    Usage:
        optimizer = Adam(model.parameters(), lr=1e-4)
        optimizer.zero_grad()
        loss = ...
        backward(loss)
        optimizer.step()
    """

    def __init__(self, params: Mapping[str, Parameter], lr: float = DEFAULT_LR,
                 betas: Tuple[float, float] = DEFAULT_BETAS, eps: float = DEFAULT_EPS):
        self.params = dict(params)
        self.state = OptimizerState(lr=lr, betas=betas, eps=eps)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    def step(self) -> None:
        grads = {
            name: param.grad if param.grad is not None else np.zeros_like(param.data)
            for name, param in self.params.items()
        }
        values = {name: param.data for name, param in self.params.items()}
        for name, value in adam_step(values, grads, self.state).items():
            self.params[name].assign(value)

    def state_dict(self) -> Dict:
        return {
            'lr': self.state.lr,
            'betas': list(self.state.betas),
            'eps': self.state.eps,
            'step': self.state.step,
            'm': dict(self.state.m),
            'v': dict(self.state.v),
        }

    def load_state_dict(self, state: Dict, strict: bool = True) -> None:
        unknown = set(state.get('m', {})) - set(self.params)
        if strict and unknown:
            raise ShapeMismatchError(f"Optimizer state references unknown parameters {sorted(unknown)}")
        self.state = OptimizerState(
            lr=float(state['lr']),
            betas=tuple(state['betas']),
            eps=float(state['eps']),
            step=int(state['step']),
            m={k: np.asarray(a, dtype=np.float64) for k, a in state['m'].items()},
            v={k: np.asarray(a, dtype=np.float64) for k, a in state['v'].items()},
        )
