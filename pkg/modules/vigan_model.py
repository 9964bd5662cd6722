"""
The imputation model: two cross-view generators, two discriminators and a
multi-modal denoising autoencoder over the concatenated pair, together with
every loss used to train them.

All losses take minibatches in normalised units (numpy arrays or tensors) and
must be evaluated inside an active Graph when gradients are wanted.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .autodiff import Graph, Tensor, as_tensor, add, clamped_log, concat, mean, scale, slice_range, square, absolute, sub
from . import autodiff as ad
from .data import NormalizationStats
from .errors import DimensionError, EmptyBatchError, UntrainedModelError, UsageError
from .neural_net import DenseLayer, Mlp

logger = logging.getLogger(__name__)

ArrayOrTensor = Union[np.ndarray, Tensor]

DIRECTIONS = ('x2y', 'y2x')
IMPUTE_PATHS = ('vigan', 'generator', 'dae')
GENERATOR_LOSSES = ('minimax', 'non_saturating')
NETWORK_NAMES = ('g1', 'g2', 'd_x', 'd_y', 'dae')


@dataclass
class ArchitectureConfig:
    """
    Hidden-layer widths of the five networks.

    The autoencoder mirrors `dae_hidden` around a shared code of width `dae_code`,
    giving len(dae_hidden) + 1 encoder and as many decoder layers.
    """
    generator_hidden: List[int] = field(default_factory=lambda: [64, 64])
    discriminator_hidden: List[int] = field(default_factory=lambda: [64, 64])
    dae_hidden: List[int] = field(default_factory=lambda: [64, 32])
    dae_code: int = 16

    def __post_init__(self):
        for name in ('generator_hidden', 'discriminator_hidden', 'dae_hidden'):
            widths = [int(w) for w in getattr(self, name)]
            if any(w < 1 for w in widths):
                raise UsageError(f'{name} widths must be >= 1, got {widths}')
            setattr(self, name, widths)
        if int(self.dae_code) < 1:
            raise UsageError(f'dae_code must be >= 1, got {self.dae_code}')
        self.dae_code = int(self.dae_code)

    def dae_sizes(self, width: int) -> List[int]:
        return [width] + self.dae_hidden + [self.dae_code] + list(reversed(self.dae_hidden)) + [width]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'ArchitectureConfig':
        names = cls.__dataclass_fields__.keys()
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass
class LossWeights:
    """Balance of the reconstruction and cycle terms in the joint objective."""
    lambda_ae: float = 10.0
    lambda_cyc: float = 10.0

    def __post_init__(self):
        for name in ('lambda_ae', 'lambda_cyc'):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise UsageError(f'{name} must be finite and >= 0, got {value}')
            setattr(self, name, value)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'LossWeights':
        return cls(**{k: data[k] for k in ('lambda_ae', 'lambda_cyc') if k in data})


@dataclass
class LossBreakdown:
    """Loss components of one evaluation; `total` is the tensor to differentiate."""
    loss_ae: Tensor
    loss_cyc: Tensor
    loss_gan_x: Tensor
    loss_gan_y: Tensor
    total: Tensor

    def as_dict(self) -> Dict[str, float]:
        return {'loss_ae': self.loss_ae.item(), 'loss_cyc': self.loss_cyc.item(), 'loss_gan_x': self.loss_gan_x.item(), 'loss_gan_y': self.loss_gan_y.item(), 'total': self.total.item()}


class ViganModel:
    """
    G1: X -> Y, G2: Y -> X, discriminators D_X and D_Y, and the autoencoder
    A: X x Y -> X x Y, plus the metadata needed to impute in raw units.
    """

    def __init__(self, g1: Mlp, g2: Mlp, d_x: Mlp, d_y: Mlp, dae: Mlp, stats: Optional[NormalizationStats]=None, x_binary: Optional[Sequence[bool]]=None, y_binary: Optional[Sequence[bool]]=None, x_names: Optional[Sequence[str]]=None, y_names: Optional[Sequence[str]]=None, hyperparams: Optional[Dict[str, Any]]=None, trained: bool=False):
        dim_x, dim_y = g1.input_dim, g1.output_dim
        if g2.input_dim != dim_y or g2.output_dim != dim_x:
            raise DimensionError(f'G2 must map {dim_y} -> {dim_x}, got {g2.input_dim} -> {g2.output_dim}')
        if d_x.input_dim != dim_x or d_x.output_dim != 1:
            raise DimensionError(f'D_X must map {dim_x} -> 1, got {d_x.input_dim} -> {d_x.output_dim}')
        if d_y.input_dim != dim_y or d_y.output_dim != 1:
            raise DimensionError(f'D_Y must map {dim_y} -> 1, got {d_y.input_dim} -> {d_y.output_dim}')
        if dae.input_dim != dim_x + dim_y or dae.output_dim != dim_x + dim_y:
            raise DimensionError(f'autoencoder must map {dim_x + dim_y} -> {dim_x + dim_y}, got {dae.input_dim} -> {dae.output_dim}')
        self.g1, self.g2, self.d_x, self.d_y, self.dae = g1, g2, d_x, d_y, dae
        self.stats = stats or NormalizationStats.identity(dim_x, dim_y)
        self.x_binary = tuple(bool(b) for b in (x_binary or [False] * dim_x))
        self.y_binary = tuple(bool(b) for b in (y_binary or [False] * dim_y))
        self.x_names = tuple(x_names or [f'x{j + 1}' for j in range(dim_x)])
        self.y_names = tuple(y_names or [f'y{j + 1}' for j in range(dim_y)])
        if len(self.x_binary) != dim_x or len(self.y_binary) != dim_y:
            raise DimensionError('binary flags must match the view widths')
        self.hyperparams = dict(hyperparams or {})
        self.trained = trained

    @property
    def dim_x(self) -> int:
        return self.g1.input_dim

    @property
    def dim_y(self) -> int:
        return self.g1.output_dim

    def networks(self) -> Dict[str, Mlp]:
        return {'g1': self.g1, 'g2': self.g2, 'd_x': self.d_x, 'd_y': self.d_y, 'dae': self.dae}

    def generator_params(self) -> Dict[str, Tensor]:
        return {**self.g1.parameters(), **self.g2.parameters()}

    def discriminator_params(self) -> Dict[str, Tensor]:
        return {**self.d_x.parameters(), **self.d_y.parameters()}

    def dae_params(self) -> Dict[str, Tensor]:
        return self.dae.parameters()

    def parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for net in self.networks().values():
            params.update(net.parameters())
        return params

    def count_params(self) -> int:
        return int(np.sum([net.count_params() for net in self.networks().values()]))

    def zero_grad(self) -> None:
        for net in self.networks().values():
            net.zero_grad()

    def snapshot(self) -> Dict[str, np.ndarray]:
        """Copies of every parameter, for before/after comparisons."""
        return {name: p.data.copy() for name, p in self.parameters().items()}

    def project_x(self, pair: ArrayOrTensor) -> Tensor:
        """P_X: the first dim_x columns of a concatenated pair."""
        pair = self._check_pair(pair, 'project_x')
        return slice_range(pair, 1, 0, self.dim_x)

    def project_y(self, pair: ArrayOrTensor) -> Tensor:
        """P_Y: the last dim_y columns of a concatenated pair."""
        pair = self._check_pair(pair, 'project_y')
        return slice_range(pair, 1, self.dim_x, self.dim_x + self.dim_y)

    def _check_pair(self, pair: ArrayOrTensor, op: str) -> Tensor:
        pair = as_tensor(pair)
        if pair.ndim != 2 or pair.shape[1] != self.dim_x + self.dim_y:
            raise DimensionError(f'{op}: expected pair width {self.dim_x + self.dim_y}, got shape {pair.shape}')
        return pair

    def refine_from_x(self, x: ArrayOrTensor) -> Tensor:
        """A(x, G1(x))."""
        x = as_tensor(x)
        return self.dae(concat(x, self.g1(x), axis=1))

    def refine_from_y(self, y: ArrayOrTensor) -> Tensor:
        """A(G2(y), y)."""
        y = as_tensor(y)
        return self.dae(concat(self.g2(y), y, axis=1))

    def clone(self) -> 'ViganModel':
        return ViganModel(self.g1.clone(), self.g2.clone(), self.d_x.clone(), self.d_y.clone(), self.dae.clone(), stats=self.stats, x_binary=self.x_binary, y_binary=self.y_binary, x_names=self.x_names, y_names=self.y_names, hyperparams=self.hyperparams, trained=self.trained)

    def mirrored(self) -> 'ViganModel':
        """
        The same model with the two views swapped.

        G1 and G2 trade places, as do D_X and D_Y; the autoencoder's input
        rows and output columns are permuted so it reads and writes (y, x).
        """
        dx, dy = self.dim_x, self.dim_y
        layers = []
        last = len(self.dae.layers) - 1
        for i, layer in enumerate(self.dae.layers):
            weight = layer.weight.data.copy()
            bias = layer.bias.data.copy()
            if i == 0:
                weight = np.concatenate([weight[dx:], weight[:dx]], axis=0)
            if i == last:
                weight = np.concatenate([weight[:, dx:], weight[:, :dx]], axis=1)
                bias = np.concatenate([bias[dx:], bias[:dx]])
            layers.append(DenseLayer(Tensor(weight), Tensor(bias), layer.activation))
        stats = NormalizationStats(self.stats.y_min, self.stats.y_span, self.stats.x_min, self.stats.x_span)
        return ViganModel(self.g2.clone('g1'), self.g1.clone('g2'), self.d_y.clone('d_x'), self.d_x.clone('d_y'), Mlp(layers, name='dae'), stats=stats, x_binary=self.y_binary, y_binary=self.x_binary, x_names=self.y_names, y_names=self.x_names, hyperparams=self.hyperparams, trained=self.trained)

    def describe(self) -> Dict[str, Any]:
        return {'dim_x': self.dim_x, 'dim_y': self.dim_y, 'trained': self.trained, 'parameters': self.count_params(), 'layers': {name: net.layer_shapes() for name, net in self.networks().items()}}

    def __repr__(self) -> str:
        return f'ViganModel(dim_x={self.dim_x}, dim_y={self.dim_y}, params={self.count_params()}, trained={self.trained})'


def build_model(dim_x: int, dim_y: int, arch: Optional[ArchitectureConfig]=None, rng: Optional[np.random.Generator]=None, **metadata) -> ViganModel:
    """
    Initialise the five networks for the given view widths.

    Generators, discriminators and the autoencoder all end in a sigmoid since
    training data is normalised to [0, 1]. Networks are initialised in the
    order G1, G2, D_X, D_Y, A from a single generator.

    Args:
        dim_x: Width of view 1
        dim_y: Width of view 2
        arch: Hidden widths (defaults to ArchitectureConfig())
        rng: Seeded generator
        **metadata: Passed through to ViganModel (stats, binary flags, names, hyperparams)
    """
    if dim_x < 1 or dim_y < 1:
        raise DimensionError(f'view widths must be >= 1, got {dim_x} and {dim_y}')
    arch = arch or ArchitectureConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    g1 = Mlp.from_sizes([dim_x] + arch.generator_hidden + [dim_y], rng, output_activation='sigmoid', name='g1')
    g2 = Mlp.from_sizes([dim_y] + arch.generator_hidden + [dim_x], rng, output_activation='sigmoid', name='g2')
    d_x = Mlp.from_sizes([dim_x] + arch.discriminator_hidden + [1], rng, output_activation='sigmoid', name='d_x')
    d_y = Mlp.from_sizes([dim_y] + arch.discriminator_hidden + [1], rng, output_activation='sigmoid', name='d_y')
    dae = Mlp.from_sizes(arch.dae_sizes(dim_x + dim_y), rng, output_activation='sigmoid', name='dae')
    hyperparams = dict(metadata.pop('hyperparams', {}) or {})
    hyperparams.setdefault('architecture', arch.to_dict())
    model = ViganModel(g1, g2, d_x, d_y, dae, hyperparams=hyperparams, **metadata)
    logger.debug(f'Built {model!r}')
    return model


def _batch(value: ArrayOrTensor, width: int, label: str) -> Tensor:
    tensor = as_tensor(value)
    if tensor.ndim != 2 or tensor.shape[1] != width:
        raise DimensionError(f'{label}: expected width {width}, got shape {tensor.shape}')
    if tensor.shape[0] == 0:
        raise EmptyBatchError(f'{label}: batch is empty')
    return tensor


def _sum_sq_per_example(pred: Tensor, target: Tensor) -> Tensor:
    """Squared coordinates summed per example, averaged over the batch."""
    return scale(ad.sum(square(sub(pred, target))), 1.0 / pred.shape[0])


def _sum_abs_per_example(pred: Tensor, target: Tensor) -> Tensor:
    return scale(ad.sum(absolute(sub(pred, target))), 1.0 / pred.shape[0])


def _adversarial(d: Mlp, real: Tensor, fake: Tensor) -> Tensor:
    """mean log D(real) + mean log(1 - D(fake)), with clamped logs."""
    return add(mean(clamped_log(d(real))), mean(clamped_log(sub(1.0, d(fake)))))


def _generator_adversarial(d: Mlp, fake: Tensor, generator_loss: str) -> Tensor:
    """The fake-sample term a generator minimises."""
    if generator_loss == 'minimax':
        return mean(clamped_log(sub(1.0, d(fake))))
    if generator_loss == 'non_saturating':
        return ad.neg(mean(clamped_log(d(fake))))
    raise UsageError(f'unknown generator loss {generator_loss!r}; expected one of {GENERATOR_LOSSES}')


def loss_ae(model: ViganModel, paired_x: ArrayOrTensor, paired_y: ArrayOrTensor) -> Tensor:
    """
    Reconstruction loss of the autoencoder on generator-completed pairs.

    Batch mean of |A(x, G1(x)) - (x, y)|^2 + |A(G2(y), y) - (x, y)|^2 with both
    view blocks weighted equally.

    Raises:
        EmptyBatchError: The paired batch is empty
    """
    x = _batch(paired_x, model.dim_x, 'loss_ae x')
    y = _batch(paired_y, model.dim_y, 'loss_ae y')
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f'loss_ae: {x.shape[0]} x rows vs {y.shape[0]} y rows')
    target = concat(x, y, axis=1)
    return add(_sum_sq_per_example(model.refine_from_x(x), target), _sum_sq_per_example(model.refine_from_y(y), target))


def loss_dae_pretrain(model: ViganModel, paired_x: ArrayOrTensor, paired_y: ArrayOrTensor) -> Tensor:
    """Reconstruction of (x, y) from the inputs (x, y), (x, 0) and (0, y), summed."""
    x = _batch(paired_x, model.dim_x, 'pretrain x')
    y = _batch(paired_y, model.dim_y, 'pretrain y')
    target = concat(x, y, axis=1)
    zeros_x = as_tensor(np.zeros(x.shape))
    zeros_y = as_tensor(np.zeros(y.shape))
    full = _sum_sq_per_example(model.dae(target), target)
    x_present = _sum_sq_per_example(model.dae(concat(x, zeros_y, axis=1)), target)
    y_present = _sum_sq_per_example(model.dae(concat(zeros_x, y, axis=1)), target)
    return add(add(full, x_present), y_present)


def loss_aegan_y(model: ViganModel, x_batch: ArrayOrTensor, y_batch: ArrayOrTensor) -> Tensor:
    """D_Y judging real y against P_Y(A(x, G1(x)))."""
    x = _batch(x_batch, model.dim_x, 'loss_aegan_y x')
    y = _batch(y_batch, model.dim_y, 'loss_aegan_y y')
    return _adversarial(model.d_y, y, model.project_y(model.refine_from_x(x)))


def loss_aegan_x(model: ViganModel, x_batch: ArrayOrTensor, y_batch: ArrayOrTensor) -> Tensor:
    """D_X judging real x against P_X(A(G2(y), y))."""
    x = _batch(x_batch, model.dim_x, 'loss_aegan_x x')
    y = _batch(y_batch, model.dim_y, 'loss_aegan_x y')
    return _adversarial(model.d_x, x, model.project_x(model.refine_from_y(y)))


def loss_cyc(model: ViganModel, x_batch: ArrayOrTensor, y_batch: ArrayOrTensor) -> Tensor:
    """Batch mean of |G2(G1(x)) - x|_1 plus batch mean of |G1(G2(y)) - y|_1."""
    x = _batch(x_batch, model.dim_x, 'loss_cyc x')
    y = _batch(y_batch, model.dim_y, 'loss_cyc y')
    return add(_sum_abs_per_example(model.g2(model.g1(x)), x), _sum_abs_per_example(model.g1(model.g2(y)), y))


def _has_rows(batch: Optional[ArrayOrTensor]) -> bool:
    return batch is not None and as_tensor(batch).size > 0


def loss_total(model: ViganModel, weights: LossWeights, paired_x: Optional[ArrayOrTensor], paired_y: Optional[ArrayOrTensor], x_batch: ArrayOrTensor, y_batch: ArrayOrTensor) -> LossBreakdown:
    """
    lambda_ae * L_AE + lambda_cyc * L_CYC + L_AEGAN^X + L_AEGAN^Y.

    An empty or missing paired batch makes the reconstruction term exactly 0.

    Returns:
        LossBreakdown: The four components and their weighted sum
    """
    if not _has_rows(x_batch) and not _has_rows(y_batch):
        raise EmptyBatchError('loss_total: both unpaired batches are empty')
    cyc = loss_cyc(model, x_batch, y_batch)
    gan_x = loss_aegan_x(model, x_batch, y_batch)
    gan_y = loss_aegan_y(model, x_batch, y_batch)
    total = add(add(scale(cyc, weights.lambda_cyc), gan_x), gan_y)
    if _has_rows(paired_x) or _has_rows(paired_y):
        ae = loss_ae(model, paired_x, paired_y)
        total = add(total, scale(ae, weights.lambda_ae))
    else:
        ae = as_tensor(0.0)
    return LossBreakdown(loss_ae=ae, loss_cyc=cyc, loss_gan_x=gan_x, loss_gan_y=gan_y, total=total)


def loss_cyclegan(model: ViganModel, x_batch: ArrayOrTensor, y_batch: ArrayOrTensor, weights: Optional[LossWeights]=None) -> LossBreakdown:
    """
    Standalone cycle-consistent GAN objective; the autoencoder takes no part.

    L_GAN(G1, D_Y) + L_GAN(G2, D_X) + lambda_cyc * L_CYC, where the
    discriminators see raw generator outputs. `loss_ae` is reported as 0.
    """
    weights = weights or LossWeights()
    x = _batch(x_batch, model.dim_x, 'loss_cyclegan x')
    y = _batch(y_batch, model.dim_y, 'loss_cyclegan y')
    gan_y = _adversarial(model.d_y, y, model.g1(x))
    gan_x = _adversarial(model.d_x, x, model.g2(y))
    cyc = loss_cyc(model, x, y)
    total = add(add(gan_y, gan_x), scale(cyc, weights.lambda_cyc))
    return LossBreakdown(loss_ae=as_tensor(0.0), loss_cyc=cyc, loss_gan_x=gan_x, loss_gan_y=gan_y, total=total)


def discriminator_objective(model: ViganModel, x_batch: ArrayOrTensor, y_batch: ArrayOrTensor, fake_x: np.ndarray, fake_y: np.ndarray) -> Tensor:
    """
    Negated adversarial terms for a discriminator descent step.

    Fakes arrive as plain arrays so no gradient reaches the networks that produced them.
    """
    x = _batch(x_batch, model.dim_x, 'discriminator x')
    y = _batch(y_batch, model.dim_y, 'discriminator y')
    gain = add(_adversarial(model.d_x, x, as_tensor(fake_x)), _adversarial(model.d_y, y, as_tensor(fake_y)))
    return ad.neg(gain)


def cyclegan_generator_objective(model: ViganModel, x_batch: ArrayOrTensor, y_batch: ArrayOrTensor, weights: LossWeights, generator_loss: str='minimax') -> Tuple[Tensor, LossBreakdown]:
    """
    Objective minimised by G1 and G2 in the CycleGAN stage, with the logged breakdown.

    With the minimax form this is loss_cyclegan itself.
    """
    breakdown = loss_cyclegan(model, x_batch, y_batch, weights)
    if generator_loss == 'minimax':
        return breakdown.total, breakdown
    x, y = as_tensor(x_batch), as_tensor(y_batch)
    adversarial = add(_generator_adversarial(model.d_y, model.g1(x), generator_loss), _generator_adversarial(model.d_x, model.g2(y), generator_loss))
    return add(adversarial, scale(breakdown.loss_cyc, weights.lambda_cyc)), breakdown


def joint_generator_objective(model: ViganModel, weights: LossWeights, paired_x: Optional[ArrayOrTensor], paired_y: Optional[ArrayOrTensor], x_batch: ArrayOrTensor, y_batch: ArrayOrTensor, generator_loss: str='minimax') -> Tuple[Tensor, LossBreakdown]:
    """
    Objective minimised jointly by G1, G2 and A in the joint stage, with the logged breakdown.

    With the minimax form this is loss_total itself; the non-saturating form
    replaces the fake-sample terms with -log D(fake).
    """
    breakdown = loss_total(model, weights, paired_x, paired_y, x_batch, y_batch)
    if generator_loss == 'minimax':
        return breakdown.total, breakdown
    x, y = as_tensor(x_batch), as_tensor(y_batch)
    fake_y = model.project_y(model.refine_from_x(x))
    fake_x = model.project_x(model.refine_from_y(y))
    objective = add(add(scale(breakdown.loss_cyc, weights.lambda_cyc), _generator_adversarial(model.d_x, fake_x, generator_loss)), _generator_adversarial(model.d_y, fake_y, generator_loss))
    if _has_rows(paired_x):
        objective = add(objective, scale(breakdown.loss_ae, weights.lambda_ae))
    return objective, breakdown


def predict_normalized(model: ViganModel, inputs: np.ndarray, direction: str='x2y', path: str='vigan') -> np.ndarray:
    """
    Forward pass in normalised units, without thresholding.

    Args:
        model: Model to run
        inputs: (b, width of the present view), normalised
        direction: 'x2y' or 'y2x'
        path: 'vigan' (autoencoder-refined), 'generator' (raw G1/G2) or 'dae' (A with the missing view zeroed)
    """
    if direction not in DIRECTIONS:
        raise UsageError(f'unknown direction {direction!r}; expected one of {DIRECTIONS}')
    if path not in IMPUTE_PATHS:
        raise UsageError(f'unknown imputation path {path!r}; expected one of {IMPUTE_PATHS}')
    width = model.dim_x if direction == 'x2y' else model.dim_y
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != width:
        raise DimensionError(f'impute {direction}: model expects input width {width}, got shape {inputs.shape}')
    if inputs.shape[0] == 0:
        return np.zeros((0, model.dim_y if direction == 'x2y' else model.dim_x))
    # parameters require grad, so the forward pass needs a graph; it is discarded afterwards
    with Graph('inference'):
        batch = as_tensor(inputs)
        if direction == 'x2y':
            if path == 'vigan':
                out = model.project_y(model.refine_from_x(batch))
            elif path == 'generator':
                out = model.g1(batch)
            else:
                out = model.project_y(model.dae(concat(batch, as_tensor(np.zeros((inputs.shape[0], model.dim_y))), axis=1)))
        elif path == 'vigan':
            out = model.project_x(model.refine_from_y(batch))
        elif path == 'generator':
            out = model.g2(batch)
        else:
            out = model.project_x(model.dae(concat(as_tensor(np.zeros((inputs.shape[0], model.dim_x))), batch, axis=1)))
        return out.data.copy()


def threshold_binary(values: np.ndarray, flags: Sequence[bool]) -> np.ndarray:
    """Round binary-flagged columns at 0.5 (ties round up)."""
    values = np.array(values, dtype=np.float64)
    mask = np.asarray(flags, dtype=bool)
    if mask.any():
        values[..., mask] = (values[..., mask] >= 0.5).astype(np.float64)
    return values


def impute(model: ViganModel, inputs: np.ndarray, direction: str='x2y', path: str='vigan', allow_untrained: bool=False) -> np.ndarray:
    """
    Impute the missing view from the present one, in raw units.

    x2y returns P_Y(A(x, G1(x))) and y2x returns P_X(A(G2(y), y)) for the
    default path; results are denormalised and binary features thresholded.

    Args:
        model: Trained model
        inputs: One vector or a (b, width) batch of the present view, raw units
        direction: 'x2y' or 'y2x'
        path: 'vigan', 'generator' or 'dae'
        allow_untrained: Skip the trained-model check (ablations, tests)

    Returns:
        np.ndarray: Imputed vector(s), same rank as `inputs`

    Raises:
        UntrainedModelError: The model was never trained
        DimensionError: Input width does not match the present view
    """
    if not model.trained and not allow_untrained:
        raise UntrainedModelError('model has not been trained; train it first or pass allow_untrained')
    if direction not in DIRECTIONS:
        raise UsageError(f'unknown direction {direction!r}; expected one of {DIRECTIONS}')
    raw = np.asarray(inputs, dtype=np.float64)
    single = raw.ndim == 1
    batch = raw.reshape(1, -1) if single else raw
    present, missing = ('x', 'y') if direction == 'x2y' else ('y', 'x')
    width = model.dim_x if present == 'x' else model.dim_y
    if batch.ndim != 2 or batch.shape[1] != width:
        raise DimensionError(f'impute {direction}: model expects input width {width}, got shape {raw.shape}')
    normalized = model.stats.normalize(batch, present)
    predicted = predict_normalized(model, normalized, direction, path)
    restored = model.stats.denormalize(predicted, missing)
    flags = model.y_binary if missing == 'y' else model.x_binary
    result = threshold_binary(restored, flags)
    return result[0] if single else result
