"""
Tensor and Tape

Reverse-mode differentiation for the autoencoder networks.

Operations create output tensors holding a closure that pushes the output
gradient to their parents. While recording is enabled, every output that
depends on a parameter is appended to the active thread's tape; since nodes
are appended after their parents, walking the tape backwards is a reverse
topological order.
"""

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import BackwardError, NonFiniteError, ShapeMismatchError

BackwardFn = Callable[[np.ndarray], None]


class Tensor:
    """
    Dense float array with an optional gradient slot.

    Values are held in float64; Parameter rounds its stored values to
    float32 so checkpoints round-trip exactly.
    """

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name
        self.grad: Optional[np.ndarray] = None
        self._backward: Optional[BackwardFn] = None
        self._parents: Tuple['Tensor', ...] = ()

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise ShapeMismatchError(
                f"Gradient shape {grad.shape} does not match value shape {self.data.shape}"
            )
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ''
        return f"<Tensor shape={self.shape}{label} requires_grad={self.requires_grad}>"

    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)


class Parameter(Tensor):
    """Trainable tensor with 32-bit storage."""

    def __init__(self, data, name: Optional[str] = None):
        super().__init__(np.asarray(data, dtype=np.float32), requires_grad=True, name=name)

    def assign(self, values: np.ndarray) -> None:
        values = np.asarray(values)
        if values.shape != self.data.shape:
            raise ShapeMismatchError(
                f"Cannot assign shape {values.shape} to parameter {self.name} of shape {self.data.shape}"
            )
        self.data = values.astype(np.float32).astype(np.float64)


class Tape:
    """Ordered record of differentiable operations for one forward pass."""

    def __init__(self):
        self._nodes: List[Tensor] = []
        self._ids = set()

    def __len__(self) -> int:
        return len(self._nodes)

    def record(self, node: Tensor) -> None:
        self._nodes.append(node)
        self._ids.add(id(node))

    def clear(self) -> None:
        for node in self._nodes:
            node._backward = None
            node._parents = ()
        self._nodes = []
        self._ids = set()

    def backward(self, loss: Tensor) -> None:
        if id(loss) not in self._ids:
            raise BackwardError(
                "backward() called before a forward pass recorded the loss on this thread's tape"
            )
        if loss.data.size != 1:
            raise ShapeMismatchError(f"Loss must be a scalar, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        try:
            for node in reversed(self._nodes):
                if node.grad is not None and node._backward is not None:
                    node._backward(node.grad)
                    # Intermediate gradients are not needed once propagated
                    if not isinstance(node, Parameter):
                        node.grad = None
        finally:
            self.clear()


_state = threading.local()


def get_tape() -> Tape:
    """Return this thread's tape, creating it on first use."""
    tape = getattr(_state, 'tape', None)
    if tape is None:
        tape = Tape()
        _state.tape = tape
    return tape


def is_recording() -> bool:
    return getattr(_state, 'recording', True)


@contextmanager
def no_grad():
    """Disable tape recording, e.g. for evaluation forward passes."""
    previous = is_recording()
    _state.recording = False
    try:
        yield
    finally:
        _state.recording = previous


def check_finite(values: np.ndarray, op_name: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"Non-finite values produced by {op_name}")


def make_node(data: np.ndarray, parents: Sequence[Tensor], backward_fn: BackwardFn, op_name: str) -> Tensor:
    """Wrap an op result and record it when any parent needs a gradient."""
    check_finite(data, op_name)
    needs_grad = is_recording() and any(p.requires_grad for p in parents)
    node = Tensor(data, requires_grad=needs_grad)
    if needs_grad:
        node._backward = backward_fn
        node._parents = tuple(parents)
        get_tape().record(node)
    return node


def backward(loss: Tensor, parameters: Optional[Iterable[Parameter]] = None) -> List[np.ndarray]:
    """
    Run the reverse pass from a scalar loss.

    Args:
        loss: Scalar produced by recorded operations
        parameters: Optional parameters whose gradients are returned; those
            the loss does not depend on receive zeros

    Returns:
        Gradients of `parameters` in order (empty list when none given)
    """
    get_tape().backward(loss)
    grads = []
    for param in parameters or ():
        if param.grad is None:
            param.grad = np.zeros_like(param.data)
        grads.append(param.grad)
    return grads


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)
