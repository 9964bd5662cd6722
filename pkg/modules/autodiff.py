"""
Reverse-mode automatic differentiation over dense float64 arrays.

Operations on tensors that require gradients are recorded into the active
Graph (entered with ``with Graph() as graph:``) in creation order. Backward
walks the recorded nodes in reverse creation order, keeps adjoints of
intermediate results local to the pass and accumulates (+=) into the
``grad`` buffers of leaf tensors such as network parameters.
"""
import math
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, GraphError, NonFiniteGradientError, ShapeError, UsageError

logger = logging.getLogger(__name__)

LOG_CLAMP_EPS = 1e-7

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_local = threading.local()


def _graph_stack() -> List['Graph']:
    stack = getattr(_local, 'stack', None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def current_graph() -> Optional['Graph']:
    """Return the innermost active graph of this thread, or None."""
    stack = _graph_stack()
    return stack[-1] if stack else None


class Tensor:
    """
    n-dimensional float64 buffer with a gradient slot and graph identity.

    Leaf tensors (created directly) have ``node_id`` None. Tensors produced by
    an operation on gradient-requiring inputs carry the id of the node that
    produced them inside their graph.
    """
    __slots__ = ('data', 'requires_grad', 'grad', 'node_id', 'graph', 'name')

    def __init__(self, data: Any, requires_grad: bool=False, name: Optional[str]=None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self.node_id: Optional[int] = None
        self.graph: Optional['Graph'] = None
        self.name = name

    @classmethod
    def _wrap(cls, data: np.ndarray) -> 'Tensor':
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = False
        out.grad = None
        out.node_id = None
        out.graph = None
        out.name = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError('item', self.shape, detail='tensor is not a scalar')
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> 'Tensor':
        """Same values, cut from the graph; no gradient flows back through it."""
        return Tensor._wrap(self.data)

    def zero_grad(self) -> None:
        if self.requires_grad:
            if self.grad is None or self.grad.shape != self.data.shape:
                self.grad = np.zeros_like(self.data)
            else:
                self.grad.fill(0.0)

    def backward(self) -> None:
        backward(self)

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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        label = f' name={self.name!r}' if self.name else ''
        return f'Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad}, node_id={self.node_id})'


TensorLike = Union[Tensor, float, int, np.ndarray]


@dataclass
class Node:
    """One recorded operation."""
    node_id: int
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward_fn: BackwardFn


class Graph:
    """
    Computation graph confined to one thread, built eagerly per minibatch.

    Nodes are stored in creation order; a node's inputs are leaves or outputs
    of earlier nodes of the same graph, so the graph is acyclic.
    """

    def __init__(self, name: str='graph'):
        self.name = name
        self.nodes: List[Node] = []

    def __enter__(self) -> 'Graph':
        _graph_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _graph_stack()
        if stack and stack[-1] is self:
            stack.pop()
        elif self in stack:
            stack.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, output: Tensor, inputs: Tuple[Tensor, ...], backward_fn: BackwardFn, op: str) -> None:
        for tensor in inputs:
            if tensor.node_id is not None and tensor.graph is not self:
                raise GraphError(f'{op}: input was produced in a different graph')
        output.node_id = len(self.nodes)
        output.graph = self
        self.nodes.append(Node(output.node_id, op, inputs, output, backward_fn))

    def backward(self, loss: Tensor) -> None:
        """
        Propagate dLoss/dTensor to every gradient-requiring leaf reachable from loss.

        Args:
            loss: Scalar tensor produced in this graph
        """
        if loss.size != 1:
            raise GraphError(f'backward requires a scalar loss, got shape {loss.shape}')
        if loss.graph is not self:
            raise GraphError('loss does not belong to this graph')
        adjoints: Dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
        for node in reversed(self.nodes[:loss.node_id + 1]):
            upstream = adjoints.pop(node.node_id, None)
            if upstream is None:
                continue
            node.output.grad = upstream
            contributions = node.backward_fn(upstream)
            for tensor, contribution in zip(node.inputs, contributions):
                if contribution is None or not tensor.requires_grad:
                    continue
                if tensor.node_id is not None and tensor.graph is self:
                    previous = adjoints.get(tensor.node_id)
                    adjoints[tensor.node_id] = contribution if previous is None else previous + contribution
                else:
                    if tensor.grad is None:
                        tensor.grad = np.zeros_like(tensor.data)
                    tensor.grad += contribution


def backward(loss: Tensor) -> None:
    """
    Run reverse-mode differentiation from a scalar loss.

    Gradients accumulate: calling backward twice without zeroing doubles them.
    """
    if loss.size != 1:
        raise GraphError(f'backward requires a scalar loss, got shape {loss.shape}')
    if loss.graph is None:
        if not loss.requires_grad:
            raise GraphError('backward called on a tensor that does not require gradients')
        loss.grad += np.ones_like(loss.data)
        return
    loss.graph.backward(loss)


def as_tensor(value: TensorLike) -> Tensor:
    """Pass tensors through; wrap numbers and arrays as constants."""
    if isinstance(value, Tensor):
        return value
    return Tensor._wrap(np.asarray(value, dtype=np.float64))


def make_op(data: np.ndarray, inputs: Sequence[Tensor], backward_fn: BackwardFn, op: str) -> Tensor:
    """
    Create the output of a differentiable operation.

    The output joins the active graph when any input requires gradients.

    Args:
        data: Forward value
        inputs: Operand tensors
        backward_fn: Maps the upstream adjoint to one contribution per input (None to skip)
        op: Operation name used in diagnostics

    Returns:
        Tensor: Output tensor
    """
    out = Tensor._wrap(np.asarray(data, dtype=np.float64))
    inputs = tuple(inputs)
    if any(t.requires_grad for t in inputs):
        graph = current_graph()
        if graph is None:
            raise GraphError(f'{op}: no active graph; run the computation inside "with Graph():"')
        out.requires_grad = True
        graph.record(out, inputs, backward_fn, op)
    return out


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape == b.shape:
        return
    if a.ndim == 0 or b.ndim == 0:
        return
    if b.shape == a.shape[1:] or a.shape == b.shape[1:]:
        return
    raise ShapeError(op, a.shape, b.shape)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def add(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise sum; b may be a bias broadcast over the leading batch axis."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('add', a, b)

    def _backward(g):
        return (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))
    return make_op(a.data + b.data, (a, b), _backward, 'add')


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('sub', a, b)

    def _backward(g):
        return (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))
    return make_op(a.data - b.data, (a, b), _backward, 'sub')


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise (Hadamard) product."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('mul', a, b)

    def _backward(g):
        return (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape))
    return make_op(a.data * b.data, (a, b), _backward, 'mul')


def neg(t: TensorLike) -> Tensor:
    t = as_tensor(t)
    return make_op(-t.data, (t,), lambda g: (-g,), 'neg')


def scale(t: TensorLike, factor: float) -> Tensor:
    """Multiply by a constant."""
    t = as_tensor(t)
    factor = float(factor)
    return make_op(t.data * factor, (t,), lambda g: (g * factor,), 'scale')


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    """Matrix product of a[m x k] and b[k x n]."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError('matmul', a.shape, b.shape, 'inner dimensions must match')

    def _backward(g):
        return (g @ b.data.T, a.data.T @ g)
    return make_op(a.data @ b.data, (a, b), _backward, 'matmul')


def concat(a: TensorLike, b: TensorLike, axis: int=1) -> Tensor:
    """Join two tensors along an axis."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != b.ndim or not 0 <= axis < a.ndim:
        raise ShapeError('concat', a.shape, b.shape, f'axis {axis}')
    for dim in range(a.ndim):
        if dim != axis and a.shape[dim] != b.shape[dim]:
            raise ShapeError('concat', a.shape, b.shape, f'axis {axis}')
    split = a.shape[axis]

    def _backward(g):
        head, tail = np.split(g, [split], axis=axis)
        return (head, tail)
    return make_op(np.concatenate([a.data, b.data], axis=axis), (a, b), _backward, 'concat')


def slice_range(t: TensorLike, axis: int, start: int, stop: int) -> Tensor:
    """Extract the contiguous range [start, stop) along an axis."""
    t = as_tensor(t)
    if not 0 <= axis < t.ndim:
        raise ShapeError('slice', t.shape, detail=f'axis {axis} out of range')
    if start < 0 or stop > t.shape[axis] or start > stop:
        raise ShapeError('slice', t.shape, detail=f'range [{start}, {stop}) out of bounds on axis {axis}')
    index = [slice(None)] * t.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def _backward(g):
        full = np.zeros_like(t.data)
        full[index] = g
        return (full,)
    return make_op(t.data[index], (t,), _backward, 'slice')


def relu(t: TensorLike) -> Tensor:
    t = as_tensor(t)
    mask = t.data > 0
    return make_op(np.where(mask, t.data, 0.0), (t,), lambda g: (g * mask,), 'relu')


def sigmoid(t: TensorLike) -> Tensor:
    t = as_tensor(t)
    s = 0.5 * (1.0 + np.tanh(0.5 * t.data))
    return make_op(s, (t,), lambda g: (g * s * (1.0 - s),), 'sigmoid')


def clamp(t: TensorLike, low: float, high: float) -> Tensor:
    """Clip values into [low, high]; gradient is zero where clipping is active."""
    t = as_tensor(t)
    inside = (t.data >= low) & (t.data <= high)
    return make_op(np.clip(t.data, low, high), (t,), lambda g: (g * inside,), 'clamp')


def log(t: TensorLike) -> Tensor:
    """Natural logarithm; inputs must be strictly positive."""
    t = as_tensor(t)
    if not np.all(t.data > 0):
        raise DomainError(f'log: non-positive input (min {float(np.min(t.data))!r}); clamp discriminator outputs first')
    return make_op(np.log(t.data), (t,), lambda g: (g / t.data,), 'log')


def clamped_log(t: TensorLike, eps: float=LOG_CLAMP_EPS) -> Tensor:
    """log(clamp(t, eps, 1 - eps)) for probabilities produced by discriminators."""
    return log(clamp(t, eps, 1.0 - eps))


def absolute(t: TensorLike) -> Tensor:
    t = as_tensor(t)
    sign = np.sign(t.data)
    return make_op(np.abs(t.data), (t,), lambda g: (g * sign,), 'abs')


def square(t: TensorLike) -> Tensor:
    t = as_tensor(t)
    return make_op(t.data * t.data, (t,), lambda g: (2.0 * t.data * g,), 'square')


def sum(t: TensorLike) -> Tensor:
    """Sum of all entries as a scalar tensor."""
    t = as_tensor(t)
    return make_op(np.sum(t.data), (t,), lambda g: (np.full_like(t.data, float(g)),), 'sum')


def mean(t: TensorLike) -> Tensor:
    """Mean of all entries as a scalar tensor."""
    t = as_tensor(t)
    if t.size == 0:
        raise ShapeError('mean', t.shape, detail='empty tensor')
    n = t.size
    return make_op(np.mean(t.data), (t,), lambda g: (np.full_like(t.data, float(g) / n),), 'mean')


def _check_same_shape(op: str, pred: Tensor, target: Tensor) -> None:
    if pred.shape != target.shape:
        raise ShapeError(op, pred.shape, target.shape)


def mse_loss(pred: TensorLike, target: TensorLike) -> Tensor:
    """Mean of squared differences."""
    pred, target = as_tensor(pred), as_tensor(target)
    _check_same_shape('mse_loss', pred, target)
    return mean(square(sub(pred, target)))


def l1_loss(pred: TensorLike, target: TensorLike) -> Tensor:
    """Mean of absolute differences (sign subgradient 0 at exact zero)."""
    pred, target = as_tensor(pred), as_tensor(target)
    _check_same_shape('l1_loss', pred, target)
    return mean(absolute(sub(pred, target)))


def format_tolerance(value: float) -> str:
    """Compact scientific form used in reports, e.g. 1e-4."""
    return np.format_float_scientific(value, trim='-', exp_digits=1)


@dataclass
class GradCheckReport:
    """Per-parameter maximum relative error between analytic and central-difference gradients."""
    errors: Dict[str, float]
    tolerance: float
    step: float
    order: int = 2
    entries_checked: int = 0
    details: Dict[str, Tuple[int, float, float]] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def worst_parameter(self) -> Optional[str]:
        if not self.errors:
            return None
        return max(self.errors, key=self.errors.get)

    @property
    def failed_parameters(self) -> List[str]:
        return [name for name, err in self.errors.items() if err >= self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failed_parameters

    def summary(self) -> str:
        if self.passed:
            return f'PASS max_rel_err={self.max_error:.3e} < {format_tolerance(self.tolerance)}'
        return f'FAIL max_rel_err={self.max_error:.3e} >= {format_tolerance(self.tolerance)} (worst: {self.worst_parameter})'


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|a - n| / max(|a|, |n|, 1e-8), elementwise."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


CENTRAL_STENCILS: Dict[int, Tuple[Tuple[float, float], ...]] = {2: ((1.0, 0.5), (-1.0, -0.5)), 4: ((2.0, -1.0 / 12.0), (1.0, 8.0 / 12.0), (-1.0, -8.0 / 12.0), (-2.0, 1.0 / 12.0))}


def _evaluate_scalar(f: Callable[[], Tensor]) -> float:
    with Graph('grad-check-eval'):
        value = f()
        if value.size != 1:
            raise GraphError(f'grad_check expects a scalar function, got shape {value.shape}')
        return float(value.data.reshape(-1)[0])


def grad_check(f: Callable[[], Tensor], inputs: Union[Mapping[str, Tensor], Sequence[Tensor]], step: float=1e-5, tolerance: float=1e-4, order: int=2) -> GradCheckReport:
    """
    Compare analytic gradients with central finite differences.

    Args:
        f: Deterministic zero-argument function returning a scalar tensor built from `inputs`
        inputs: Tensors to check, by name or as a sequence (named param0, param1, ...)
        step: Finite-difference step, within [1e-7, 1e-3]
        tolerance: Maximum accepted relative error
        order: Accuracy order of the central stencil, 2 (x +- h) or 4 (x +- h, x +- 2h)

    Returns:
        GradCheckReport: Per-parameter maximum relative error

    Raises:
        NonFiniteGradientError: A value or gradient is NaN/inf; the error names the parameter
    """
    if not 1e-7 <= step <= 1e-3:
        raise UsageError(f'grad_check step {step} outside [1e-7, 1e-3]')
    if order not in CENTRAL_STENCILS:
        raise UsageError(f'grad_check order must be one of {sorted(CENTRAL_STENCILS)}, got {order}')
    stencil = CENTRAL_STENCILS[order]
    if isinstance(inputs, Mapping):
        named = dict(inputs)
    else:
        named = {f'param{i}': t for i, t in enumerate(inputs)}
    for tensor in named.values():
        if not tensor.requires_grad:
            tensor.requires_grad = True
        tensor.zero_grad()
    with Graph('grad-check') as graph:
        loss = f()
        if not np.all(np.isfinite(loss.data)):
            raise NonFiniteGradientError(next(iter(named), '?'), 'grad_check: loss is not finite')
        if loss.graph is graph:
            graph.backward(loss)
        else:
            backward(loss)
    report = GradCheckReport(errors={}, tolerance=tolerance, step=step, order=order)
    for name, tensor in named.items():
        analytic = tensor.grad.copy()
        if not np.all(np.isfinite(analytic)):
            raise NonFiniteGradientError(name, f'grad_check: analytic gradient of {name} is not finite')
        if not (tensor.data.flags.c_contiguous and tensor.data.flags.writeable):
            tensor.data = np.array(tensor.data, dtype=np.float64, order='C')
        numeric = np.zeros_like(tensor.data)
        flat = tensor.data.reshape(-1)
        numeric_flat = numeric.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            total = 0.0
            for offset, weight in stencil:
                flat[i] = original + offset * step
                value = _evaluate_scalar(f)
                if not math.isfinite(value):
                    flat[i] = original
                    raise NonFiniteGradientError(name, f'grad_check: non-finite value while perturbing {name}[{i}]')
                total += weight * value
            flat[i] = original
            numeric_flat[i] = total / step
        errors = relative_error(analytic, numeric)
        worst = int(np.argmax(errors)) if errors.size else 0
        report.errors[name] = float(errors.reshape(-1)[worst]) if errors.size else 0.0
        if errors.size:
            report.details[name] = (worst, float(analytic.reshape(-1)[worst]), float(numeric.reshape(-1)[worst]))
        report.entries_checked += flat.size
        tensor.zero_grad()
    if report.passed:
        logger.debug(f'grad_check {report.summary()} over {report.entries_checked} entries')
    else:
        logger.warning(f'grad_check {report.summary()}')
    return report
