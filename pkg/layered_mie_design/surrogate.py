"""
Fully connected surrogate networks mapping normalised thicknesses to
normalised spectra.

Two layouts share the same code:

* ``tcnn``: two independent sub-networks, the first predicting the short
  wavelength half of the spectrum and the second the long wavelength half.
* ``fcnn``: one network predicting the whole spectrum.

Hidden layers use SELU, the output layer is linear. Weights are stored with
shape ``(fan_in, fan_out)`` and a layer computes ``a @ W + b``.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from layered_mie_design import __version__
from layered_mie_design.artifacts import write_bytes
from layered_mie_design.common import (MODEL_MAGIC, FileFormatError,
                                       NumericError)
from layered_mie_design.dataset import DatasetManifest, Normalizer
from layered_mie_design.fileformat import decode_container, encode_container
from layered_mie_design.oracle import LayerStack, Spectrum

LOGGER = logging.getLogger(__name__)

SELU_ALPHA = 1.6732632423543772848170429916717
SELU_SCALE = 1.0507009873554804934193349852946

KIND_TCNN = 'tcnn'
KIND_FCNN = 'fcnn'
DEFAULT_HIDDEN_LAYERS = 7
DEFAULT_WIDTH = {KIND_TCNN: 250, KIND_FCNN: 520}


def selu(x):
    """lambda * x for x > 0, lambda * alpha * (exp(x) - 1) otherwise"""
    x = np.asarray(x, dtype=float)
    return SELU_SCALE * np.where(x > 0, x,
                                 SELU_ALPHA * np.expm1(np.minimum(x, 0.0)))


def selu_derivative(x):
    x = np.asarray(x, dtype=float)
    return SELU_SCALE * np.where(x > 0, 1.0,
                                 SELU_ALPHA * np.exp(np.minimum(x, 0.0)))


@dataclass(frozen=True)
class Architecture:
    """Shape of a surrogate network"""
    kind: str
    input_dim: int
    output_dim: int
    hidden_layers: int = DEFAULT_HIDDEN_LAYERS
    hidden_width: int = None

    def __post_init__(self):
        if self.kind not in DEFAULT_WIDTH:
            raise ValueError(
                f"kind must be one of {sorted(DEFAULT_WIDTH)}, got '{self.kind}'")
        if self.hidden_width is None:
            object.__setattr__(self, 'hidden_width', DEFAULT_WIDTH[self.kind])
        for name in ('input_dim', 'output_dim', 'hidden_layers',
                     'hidden_width'):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f'{name} must be a positive integer, got {value}')
            object.__setattr__(self, name, int(value))
        if self.kind == KIND_TCNN and self.output_dim % 2:
            raise ValueError(
                f'A tcnn needs an even output_dim, got {self.output_dim}')

    @property
    def num_channels(self):
        return 2 if self.kind == KIND_TCNN else 1

    @property
    def channel_output_dim(self):
        return self.output_dim // self.num_channels

    def layer_shapes(self):
        """Weight shapes of one channel, input layer first"""
        widths = [self.input_dim] + [self.hidden_width] * self.hidden_layers \
            + [self.channel_output_dim]
        return list(zip(widths[:-1], widths[1:]))

    def channel_slice(self, channel):
        """Slice of the output spectrum produced by a channel"""
        size = self.channel_output_dim
        return slice(channel * size, (channel + 1) * size)

    @property
    def num_parameters(self):
        per_channel = sum(rows * cols + cols
                          for rows, cols in self.layer_shapes())
        return per_channel * self.num_channels

    def to_dict(self):
        return {
            'kind': self.kind,
            'input_dim': self.input_dim,
            'output_dim': self.output_dim,
            'hidden_layers': self.hidden_layers,
            'hidden_width': self.hidden_width,
        }

    @classmethod
    def from_dict(cls, m_dict):
        return cls(**{key: m_dict[key] for key in
                      ('kind', 'input_dim', 'output_dim', 'hidden_layers',
                       'hidden_width')})


@dataclass(eq=False)
class MlpModel:
    """
    Network parameters together with everything needed to use them.

    ``channels`` holds, for every channel, a list of ``(W, b)`` pairs ordered
    from the input layer to the output layer.
    """
    architecture: Architecture
    channels: list = field(repr=False)
    normalizer: Normalizer = None
    manifest: DatasetManifest = field(default=None, repr=False)
    train_config: dict = field(default_factory=dict)
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        arch = self.architecture
        if len(self.channels) != arch.num_channels:
            raise ValueError(
                f'Expected {arch.num_channels} channel(s), got {len(self.channels)}'
            )
        for layers in self.channels:
            shapes = arch.layer_shapes()
            if len(layers) != len(shapes):
                raise ValueError('Number of layers does not match the architecture')
            for (weights, bias), (rows, cols) in zip(layers, shapes):
                if weights.shape != (rows, cols) or bias.shape != (cols, ):
                    raise ValueError(
                        f'Parameter shapes {weights.shape}/{bias.shape} do not '
                        f'match ({rows}, {cols})')

    def parameter_arrays(self):
        """Flat list [W, b, W, b, ...] in storage order"""
        return [array for layers in self.channels
                for pair in layers for array in pair]

    def with_parameter_arrays(self, arrays):
        """Copy of the model holding ``arrays`` in storage order"""
        arrays = list(arrays)
        per_channel = 2 * (self.architecture.hidden_layers + 1)
        channels = []
        for channel in range(self.architecture.num_channels):
            chunk = arrays[channel * per_channel:(channel + 1) * per_channel]
            channels.append(list(zip(chunk[0::2], chunk[1::2])))
        return replace(self, channels=channels)

    def flat_parameters(self):
        return np.concatenate(
            [array.ravel() for array in self.parameter_arrays()])

    def with_flat_parameters(self, vector):
        vector = np.asarray(vector, dtype=float)
        if vector.size != self.architecture.num_parameters:
            raise ValueError(
                f'Expected {self.architecture.num_parameters} parameters, got {vector.size}'
            )
        arrays = []
        offset = 0
        for array in self.parameter_arrays():
            arrays.append(vector[offset:offset + array.size].reshape(
                array.shape).copy())
            offset += array.size
        return self.with_parameter_arrays(arrays)


def init_network(arch, seed, normalizer=None, manifest=None):
    """
    Random network: weights from N(0, 1 / fan_in), biases zero

    :param arch: the :class:`Architecture`
    :param seed: seed of the weight sampler
    """
    rng = np.random.default_rng(seed)
    channels = []
    for _ in range(arch.num_channels):
        layers = []
        for fan_in, fan_out in arch.layer_shapes():
            weights = rng.normal(0.0, np.sqrt(1.0 / fan_in), (fan_in, fan_out))
            layers.append((weights, np.zeros(fan_out)))
        channels.append(layers)
    return MlpModel(arch, channels, normalizer=normalizer, manifest=manifest)


def _as_batch(model, inputs):
    inputs = np.asarray(inputs, dtype=float)
    single = inputs.ndim == 1
    batch = np.atleast_2d(inputs)
    if batch.ndim != 2 or batch.shape[1] != model.architecture.input_dim:
        raise ValueError(
            f'Input of shape {inputs.shape} does not match input_dim '
            f'{model.architecture.input_dim}')
    return batch, single


def _channel_forward(layers, inputs):
    """Pre-activations and activations of every layer of one channel"""
    activations = [inputs]
    pre_activations = []
    last = len(layers) - 1
    for index, (weights, bias) in enumerate(layers):
        z = activations[-1] @ weights + bias
        pre_activations.append(z)
        out = z if index == last else selu(z)
        if not np.all(np.isfinite(out)):
            raise NumericError('Non-finite activations', layer=index)
        activations.append(out)
    return pre_activations, activations


def forward(model, inputs):
    """
    Predict normalised spectra

    :param inputs: normalised thicknesses, shape (input_dim,) or
        (batch, input_dim)
    :returns: array of shape (output_dim,) or (batch, output_dim)
    """
    batch, single = _as_batch(model, inputs)
    outputs = np.concatenate(
        [_channel_forward(layers, batch)[1][-1] for layers in model.channels],
        axis=1)
    return outputs[0] if single else outputs


def _check_pair(pred, target):
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(
            f'Prediction shape {pred.shape} differs from target {target.shape}')
    return pred, target


def loss_weights(n_points, m):
    """Per-point weights: m on the first half, 1 - m on the second"""
    if n_points % 2:
        raise ValueError(f'The split loss needs an even length, got {n_points}')
    if not 0.0 <= m <= 1.0:
        raise ValueError(f'm must lie in [0, 1], got {m}')
    half = n_points // 2
    return np.concatenate([np.full(half, m), np.full(half, 1.0 - m)])


def loss_tcnn(pred, target, m):
    """
    Weighted split-spectrum loss, summed over the last axis

    m * SSE(first half) + (1 - m) * SSE(second half)
    """
    pred, target = _check_pair(pred, target)
    weights = loss_weights(pred.shape[-1], m)
    result = np.sum(weights * (pred - target)**2, axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def validation_error(pred, target):
    """Sum of squared differences over the last axis"""
    pred, target = _check_pair(pred, target)
    result = np.sum((pred - target)**2, axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def point_weights(arch, m):
    """Per-point weights of the training loss of an architecture"""
    if arch.kind == KIND_TCNN:
        return loss_weights(arch.output_dim, m)
    return np.ones(arch.output_dim)


def training_loss(model, pred, target, m):
    """Split loss for a tcnn, plain SSE for an fcnn"""
    if model.architecture.kind == KIND_TCNN:
        return loss_tcnn(pred, target, m)
    return validation_error(pred, target)


def _channel_backward(layers, pre_activations, activations, delta):
    """
    Gradients of one channel given dLoss/d(output)

    :returns: (list of (dW, db), dLoss/d(input))
    """
    grads = []
    for index in range(len(layers) - 1, -1, -1):
        weights = layers[index][0]
        grads.append((activations[index].T @ delta, delta.sum(axis=0)))
        delta = delta @ weights.T
        if index > 0:
            delta = delta * selu_derivative(pre_activations[index - 1])
        if not np.all(np.isfinite(delta)):
            raise NumericError('Non-finite gradient', layer=index)
    grads.reverse()
    return grads, delta


def backprop(model, inputs, targets, m=0.6):
    """
    Gradient of the mean per-example training loss

    Both channels of a tcnn are differentiated in the same pass.

    :param inputs: normalised thicknesses, shape (batch, input_dim)
    :param targets: normalised spectra, shape (batch, output_dim)
    :param m: weight of the first half for a tcnn, ignored for an fcnn
    :returns: tuple ``(mean loss, gradients)`` where the gradients mirror
        :meth:`MlpModel.parameter_arrays`
    """
    batch, _ = _as_batch(model, inputs)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if len(batch) == 0:
        raise ValueError('backprop needs a nonempty batch')
    if targets.shape != (len(batch), model.architecture.output_dim):
        raise ValueError(
            f'Targets of shape {targets.shape} do not match the batch')

    arch = model.architecture
    weights = point_weights(arch, m)
    gradients = []
    loss = 0.0
    for channel, layers in enumerate(model.channels):
        part = arch.channel_slice(channel)
        pre, act = _channel_forward(layers, batch)
        residual = act[-1] - targets[:, part]
        loss += np.sum(weights[part] * residual**2)
        delta = 2.0 * weights[part] * residual / len(batch)
        grads, _ = _channel_backward(layers, pre, act, delta)
        gradients.extend(array for pair in grads for array in pair)
    return loss / len(batch), gradients


def input_gradient(model, inputs, target):
    """
    Sum of squared errors between the prediction and ``target`` and its
    gradient with respect to the normalised input, for a single input
    vector.
    """
    batch, _ = _as_batch(model, inputs)
    if len(batch) != 1:
        raise ValueError('input_gradient works on a single input vector')
    target = np.asarray(target, dtype=float).reshape(1, -1)
    arch = model.architecture
    if target.shape[1] != arch.output_dim:
        raise ValueError(
            f'Target length {target.shape[1]} does not match output_dim {arch.output_dim}'
        )
    error = 0.0
    gradient = np.zeros_like(batch)
    for channel, layers in enumerate(model.channels):
        part = arch.channel_slice(channel)
        pre, act = _channel_forward(layers, batch)
        residual = act[-1] - target[:, part]
        error += float(np.sum(residual**2))
        _, delta = _channel_backward(layers, pre, act, 2.0 * residual)
        gradient += delta
    return error, gradient[0]


def predict_spectrum(model, stack):
    """
    Surrogate spectrum of a stack in the units of the training data

    Negative predictions are clipped to zero.
    """
    if model.normalizer is None or model.manifest is None:
        raise ValueError('The model carries no normalizer or dataset manifest')
    thicknesses = stack.thicknesses if isinstance(stack, LayerStack) else stack
    normalized = forward(model, model.normalizer.apply_input(thicknesses))
    values = model.normalizer.invert_output(normalized)
    return Spectrum(model.manifest.grid, np.maximum(values, 0.0),
                    model.manifest.unit)


def model_to_bytes(model):
    header = {
        'version': __version__,
        'architecture': model.architecture.to_dict(),
        'normalizer': model.normalizer.to_dict() if model.normalizer else None,
        'manifest': model.manifest.to_dict() if model.manifest else None,
        'train_config': model.train_config,
        'history': [list(row) for row in model.history],
        'parameter_order': 'channel, layer, weights (fan_in x fan_out, row-major), bias',
    }
    return encode_container(MODEL_MAGIC, header, model.flat_parameters())


def model_from_bytes(data):
    header, payload = decode_container(
        data, MODEL_MAGIC, ['architecture', 'normalizer', 'manifest'])
    try:
        arch = Architecture.from_dict(header['architecture'])
        normalizer = Normalizer.from_dict(
            header['normalizer']) if header['normalizer'] else None
        manifest = DatasetManifest.from_dict(
            header['manifest']) if header['manifest'] else None
    except (KeyError, TypeError, ValueError) as error:
        raise FileFormatError(f'Invalid model header: {error}')
    if payload.size != arch.num_parameters:
        raise FileFormatError(
            f'Payload holds {payload.size} values, the architecture needs '
            f'{arch.num_parameters}')
    template = MlpModel(arch, [[(np.zeros(shape), np.zeros(shape[1]))
                               for shape in arch.layer_shapes()]
                              for _ in range(arch.num_channels)])
    model = template.with_flat_parameters(payload)
    model.normalizer = normalizer
    model.manifest = manifest
    model.train_config = header.get('train_config') or {}
    model.history = [tuple(row) for row in header.get('history', [])]
    return model


def save_model(model, path):
    write_bytes(path, model_to_bytes(model))
    LOGGER.info('Saved %s model with %d parameters to %s',
                model.architecture.kind, model.architecture.num_parameters,
                path)


def load_model(path):
    with open(path, 'rb') as handle:
        return model_from_bytes(handle.read())
