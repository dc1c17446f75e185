"""Tensor type, parameter store and the reverse-mode gradient engine.

Every differentiable operation records its parents and a backward closure on
the tensor it produces (define-by-run). ``backward`` replays the recorded graph
in reverse topological order and accumulates gradients.
"""

import contextlib
import threading
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from app.exceptions import ContractError, DimensionError

ArrayLike = Union[np.ndarray, float, int, Sequence]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_local = threading.local()


def get_default_dtype() -> np.dtype:
    """Return the float type new tensors are created with in this thread."""
    return getattr(_local, "dtype", np.float32)


def is_grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


@contextlib.contextmanager
def use_float64():
    """Create tensors in 64-bit precision inside the block (gradient checking)."""
    previous = get_default_dtype()
    _local.dtype = np.float64
    try:
        yield
    finally:
        _local.dtype = previous


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    previous = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


class Tensor:
    """Dense array with optional gradient tracking."""

    __slots__ = ("data", "requires_grad", "grad", "name", "op", "_parents", "_backward")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[np.dtype] = None,
    ):
        self.data = np.asarray(data, dtype=dtype or get_default_dtype())
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.op = "leaf"
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward: BackwardFn,
        op: str,
    ) -> "Tensor":
        """Wrap the result of an operation, recording it when gradients are needed."""
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out.op = op
        out.requires_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # Shape helpers

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def __repr__(self) -> str:
        label = self.name or self.op
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={label}, requires_grad={self.requires_grad})"

    # Arithmetic

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        from app.tensor.ops import matmul
        return matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return sum_axis(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(value: Union[Tensor, ArrayLike], like: Optional[Tensor] = None) -> Tensor:
    """Wrap constants as non-trainable tensors matching ``like``'s precision."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(value, dtype=dtype)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _pair(a, b) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


def add(a, b) -> Tensor:
    a, b = _pair(a, b)

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)

    def backward(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = _pair(a, b)

    def backward(g):
        ga = g / b.data
        gb = -g * a.data / (b.data * b.data)
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return Tensor.from_op(a.data / b.data, (a, b), backward, "div")


def power(x: Tensor, exponent: float) -> Tensor:
    def backward(g):
        return (g * exponent * np.power(x.data, exponent - 1),)

    return Tensor.from_op(np.power(x.data, exponent), (x,), backward, "pow")


def sum_axis(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor.from_op(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), backward, "sum")


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    def backward(g):
        return (g.reshape(x.shape),)

    return Tensor.from_op(x.data.reshape(shape), (x,), backward, "reshape")


def swapaxes(x: Tensor, axis1: int, axis2: int) -> Tensor:
    def backward(g):
        return (np.swapaxes(g, axis1, axis2),)

    return Tensor.from_op(np.swapaxes(x.data, axis1, axis2), (x,), backward, "swapaxes")


# Graph traversal


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor, params: Optional["ParamStore"] = None) -> None:
    """Populate ``grad`` on every tensor reachable from a scalar loss.

    Leaf tensors accumulate (``+=``) so gradients of several losses can be
    summed; intermediate tensors hold the gradient of this call only.

    Args:
        loss: Scalar tensor produced by a recorded forward computation.
        params: Optional store; used only to report parameters left without a gradient.

    Raises:
        ContractError: If ``loss`` is not a scalar.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        logger.warning("backward called on a loss that does not depend on any trainable tensor")
        return

    order = _topological_order(loss)
    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}

    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        node.grad = g
        for parent, parent_grad in zip(node._parents, node._backward(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + parent_grad
            else:
                grads[key] = parent_grad

    if params is not None:
        missing = [name for name, p in params.items() if p.grad is None]
        if missing:
            logger.debug(f"{len(missing)} parameters received no gradient: {missing[:5]}")


def find_first_nonfinite(root: Tensor) -> Optional[str]:
    """Describe the first tensor, in forward order, holding NaN or Inf."""
    for node in _topological_order(root):
        if not np.all(np.isfinite(node.data)):
            label = node.name or node.op
            return f"{label} {tuple(node.shape)}"
    if not np.all(np.isfinite(root.data)):
        return f"{root.name or root.op} {tuple(root.shape)}"
    return None


class ParamStore:
    """Named collection of trainable tensors, iterated in lexicographic order."""

    def __init__(self, dtype: Optional[np.dtype] = None):
        self.dtype = np.dtype(dtype or get_default_dtype())
        self._tensors: Dict[str, Tensor] = {}

    def declare(self, name: str, value: ArrayLike) -> Tensor:
        """Register ``name`` with an initial value, or return the existing entry.

        Raises:
            DimensionError: If ``name`` exists with a different shape.
        """
        value = np.asarray(value)
        existing = self._tensors.get(name)
        if existing is not None:
            if existing.shape != value.shape:
                raise DimensionError(
                    f"parameter '{name}' has shape {existing.shape}, model expects {value.shape}"
                )
            return existing
        tensor = Tensor(np.array(value, dtype=self.dtype), requires_grad=True, name=name, dtype=self.dtype)
        self._tensors[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names())

    def names(self) -> List[str]:
        return sorted(self._tensors)

    def items(self) -> List[Tuple[str, Tensor]]:
        return [(name, self._tensors[name]) for name in self.names()]

    def num_parameters(self) -> int:
        return int(sum(t.size for t in self._tensors.values()))

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.grad = None

    def astype(self, dtype: np.dtype) -> "ParamStore":
        """Copy every tensor into a new store of the given precision."""
        store = ParamStore(dtype=dtype)
        for name, tensor in self.items():
            store.declare(name, tensor.data.astype(dtype))
        return store

    def state(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self.items()}

    def load_state(self, state: Dict[str, np.ndarray]) -> None:
        for name, value in state.items():
            if name in self._tensors:
                target = self._tensors[name]
                if target.shape != np.shape(value):
                    raise DimensionError(
                        f"parameter '{name}' has shape {target.shape}, state holds {np.shape(value)}"
                    )
                target.data[...] = value
            else:
                self.declare(name, value)
