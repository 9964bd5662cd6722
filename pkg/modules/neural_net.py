"""
Dense layers, multilayer perceptrons, parameter initialisation and Adam.
All sub-networks of the imputation model are built from these pieces.
"""
import math
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .autodiff import Tensor, as_tensor, add, matmul, relu, sigmoid
from .errors import DimensionError, NonFiniteGradientError, UsageError

logger = logging.getLogger(__name__)

ACTIVATIONS = ('relu', 'sigmoid', 'none')


def init_params(shape: Sequence[int], rng: np.random.Generator) -> Tensor:
    """
    Initialise a parameter tensor.

    Two-dimensional shapes are weights drawn uniformly from
    +-sqrt(6 / (fan_in + fan_out)); one-dimensional shapes are zero biases.

    Args:
        shape: (fan_in, fan_out) for weights or (out,) for biases
        rng: Seeded generator

    Returns:
        Tensor: Parameter with requires_grad set
    """
    shape = tuple(int(d) for d in shape)
    if not shape or any(d <= 0 for d in shape):
        raise DimensionError(f'init_params: invalid shape {shape}')
    if len(shape) == 1:
        return Tensor(np.zeros(shape), requires_grad=True)
    if len(shape) != 2:
        raise DimensionError(f'init_params: expected 1 or 2 dimensions, got {shape}')
    bound = math.sqrt(6.0 / (shape[0] + shape[1]))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class DenseLayer:
    """Affine transform followed by an activation."""

    def __init__(self, weight: Tensor, bias: Tensor, activation: str='relu'):
        if activation not in ACTIVATIONS:
            raise UsageError(f'unknown activation {activation!r}; expected one of {ACTIVATIONS}')
        if weight.ndim != 2 or bias.shape != (weight.shape[1],):
            raise DimensionError(f'dense layer: weight {weight.shape} and bias {bias.shape} disagree')
        weight.requires_grad = True
        bias.requires_grad = True
        weight.zero_grad()
        bias.zero_grad()
        self.weight = weight
        self.bias = bias
        self.activation = activation

    @classmethod
    def create(cls, in_dim: int, out_dim: int, activation: str, rng: np.random.Generator) -> 'DenseLayer':
        return cls(init_params((in_dim, out_dim), rng), init_params((out_dim,), rng), activation)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]

    def forward(self, batch: Tensor) -> Tensor:
        z = add(matmul(batch, self.weight), self.bias)
        if self.activation == 'relu':
            return relu(z)
        if self.activation == 'sigmoid':
            return sigmoid(z)
        return z

    def parameter_count(self) -> int:
        return self.in_dim * self.out_dim + self.out_dim


class Mlp:
    """
    Ordered stack of dense layers.

    Hidden layers use ReLU; the final activation depends on the network's role.
    """

    def __init__(self, layers: List[DenseLayer], name: str='mlp'):
        if not layers:
            raise DimensionError(f'{name}: an MLP needs at least one layer')
        for i in range(len(layers) - 1):
            if layers[i].out_dim != layers[i + 1].in_dim:
                raise DimensionError(f'{name}: layer {i} outputs {layers[i].out_dim} but layer {i + 1} expects {layers[i + 1].in_dim}')
        self.layers = layers
        self.name = name

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], rng: np.random.Generator, output_activation: str='none', hidden_activation: str='relu', name: str='mlp') -> 'Mlp':
        """
        Build an MLP from layer widths, e.g. [in, 64, 64, out].

        Args:
            sizes: Input width, hidden widths, output width
            rng: Seeded generator for initialisation
            output_activation: Activation of the final layer
            hidden_activation: Activation of every other layer
            name: Prefix used for parameter names
        """
        if len(sizes) < 2:
            raise DimensionError(f'{name}: need at least input and output widths, got {list(sizes)}')
        layers = []
        for i in range(len(sizes) - 1):
            activation = output_activation if i == len(sizes) - 2 else hidden_activation
            layers.append(DenseLayer.create(sizes[i], sizes[i + 1], activation, rng))
        return cls(layers, name=name)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def forward(self, batch: Union[Tensor, np.ndarray]) -> Tensor:
        """
        Run the batch through every layer inside the active graph.

        Args:
            batch: Tensor of shape (b, input_dim)

        Returns:
            Tensor: (b, output_dim)
        """
        batch = as_tensor(batch)
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise DimensionError(f'{self.name}: expected batch width {self.input_dim}, got shape {batch.shape}')
        out = batch
        for layer in self.layers:
            out = layer.forward(out)
        return out

    __call__ = forward

    def parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for i, layer in enumerate(self.layers):
            params[f'{self.name}.{i}.weight'] = layer.weight
            params[f'{self.name}.{i}.bias'] = layer.bias
        return params

    def count_params(self) -> int:
        """Sum over layers of in*out + out."""
        return int(sum(layer.parameter_count() for layer in self.layers))

    def layer_shapes(self) -> List[Tuple[int, int, str]]:
        return [(layer.in_dim, layer.out_dim, layer.activation) for layer in self.layers]

    def zero_grad(self) -> None:
        for param in self.parameters().values():
            param.zero_grad()

    def clone(self, name: Optional[str]=None) -> 'Mlp':
        layers = [DenseLayer(Tensor(layer.weight.data), Tensor(layer.bias.data), layer.activation) for layer in self.layers]
        return Mlp(layers, name=name or self.name)

    def __repr__(self) -> str:
        widths = [self.input_dim] + [layer.out_dim for layer in self.layers]
        return f'Mlp(name={self.name!r}, widths={widths}, params={self.count_params()})'


@dataclass
class AdamSettings:
    """Optimizer hyper-parameters; beta1 = 0.5 is the usual choice for adversarial training."""
    learning_rate: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-08

    def __post_init__(self):
        if not self.learning_rate > 0 or not math.isfinite(self.learning_rate):
            raise UsageError(f'learning rate must be positive, got {self.learning_rate}')
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise UsageError(f'betas must lie in [0, 1), got {self.beta1}, {self.beta2}')
        if not self.eps > 0:
            raise UsageError(f'eps must be positive, got {self.eps}')

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'AdamSettings':
        known = {k: data[k] for k in ('learning_rate', 'beta1', 'beta2', 'eps') if k in data}
        return cls(**known)


@dataclass
class AdamState:
    """First/second moment buffers per parameter name and the step counter."""
    learning_rate: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-08
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_settings(cls, settings: AdamSettings) -> 'AdamState':
        return cls(learning_rate=settings.learning_rate, beta1=settings.beta1, beta2=settings.beta2, eps=settings.eps)


def adam_step(state: AdamState, params: Mapping[str, Tensor], grads: Optional[Mapping[str, np.ndarray]]=None) -> None:
    """
    Apply one bias-corrected Adam update in place; no entry moves by more than the learning rate.

    Args:
        state: Moment buffers and step counter (t increases by one)
        params: Parameters by name
        grads: Gradients by name; defaults to each parameter's accumulated grad

    Raises:
        NonFiniteGradientError: Any gradient holds NaN/inf; no parameter is modified
    """
    if grads is None:
        grads = {name: p.grad for name, p in params.items()}
    for name, param in params.items():
        g = grads.get(name)
        if g is None:
            raise NonFiniteGradientError(name, f'missing gradient for parameter {name}')
        if g.shape != param.data.shape:
            raise DimensionError(f'gradient for {name} has shape {g.shape}, parameter has {param.data.shape}')
        if not np.all(np.isfinite(g)):
            logger.error(f'Aborting Adam step {state.t + 1}: non-finite gradient in {name}')
            raise NonFiniteGradientError(name)
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, param in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(param.data)
            state.v[name] = np.zeros_like(param.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        step = state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        # |step| <= lr needs (1 - beta1) <= sqrt(1 - beta2); beta1 = 0.5 breaks that after a sudden jump in |g|.
        param.data -= np.clip(step, -state.learning_rate, state.learning_rate)


class Adam:
    """Adam optimizer bound to a fixed set of named parameters."""

    def __init__(self, params: Mapping[str, Tensor], settings: Optional[AdamSettings]=None, name: str='adam'):
        self.params = dict(params)
        self.settings = settings or AdamSettings()
        self.state = AdamState.from_settings(self.settings)
        self.name = name

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    def step(self) -> None:
        adam_step(self.state, self.params)

    @property
    def steps(self) -> int:
        return self.state.t
