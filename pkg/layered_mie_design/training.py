"""
Mini-batch Adam training of the surrogate networks
"""
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from layered_mie_design.common import NumericError, TrainingError
from layered_mie_design.dataset import fit_normalizer
from layered_mie_design.surrogate import backprop, forward, validation_error

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of :func:`train`"""
    m: float = 0.6
    epochs: int = 1000
    batch_size: int = 256
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.m <= 1.0:
            raise ValueError(f'm must lie in [0, 1], got {self.m}')
        if self.epochs < 1:
            raise ValueError(f'epochs must be at least 1, got {self.epochs}')
        if self.batch_size < 1:
            raise ValueError(
                f'batch_size must be at least 1, got {self.batch_size}')
        if not self.lr > 0:
            raise ValueError(f'lr must be positive, got {self.lr}')
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError('Adam decays must lie in [0, 1)')
        if not self.eps > 0:
            raise ValueError(f'eps must be positive, got {self.eps}')

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, m_dict):
        return cls(**m_dict)


@dataclass
class AdamState:
    """First and second moments of every parameter array"""
    step: int = 0
    first: list = field(default_factory=list, repr=False)
    second: list = field(default_factory=list, repr=False)

    @classmethod
    def for_model(cls, model):
        arrays = model.parameter_arrays()
        return cls(0, [np.zeros_like(array) for array in arrays],
                   [np.zeros_like(array) for array in arrays])


def adam_step(model, gradients, state, lr=1e-3, beta1=0.9, beta2=0.999,
              eps=1e-8):
    """
    One bias-corrected Adam update

    :returns: tuple ``(updated model, updated state)``; the inputs are not
        modified
    """
    arrays = model.parameter_arrays()
    if len(gradients) != len(arrays) or len(state.first) != len(arrays):
        raise ValueError('Gradient or optimizer state does not match the model')
    step = state.step + 1
    first = []
    second = []
    updated = []
    correction1 = 1.0 - beta1**step
    correction2 = 1.0 - beta2**step
    for param, grad, mom1, mom2 in zip(arrays, gradients, state.first,
                                       state.second):
        mom1 = beta1 * mom1 + (1.0 - beta1) * grad
        mom2 = beta2 * mom2 + (1.0 - beta2) * grad * grad
        m_hat = mom1 / correction1
        v_hat = mom2 / correction2
        updated.append(param - lr * m_hat / (np.sqrt(v_hat) + eps))
        first.append(mom1)
        second.append(mom2)
    return model.with_parameter_arrays(updated), AdamState(step, first, second)


def mean_spectrum_error(model, inputs, targets, batch_size=1024):
    """Mean sum of squared errors over records, in normalised units"""
    if len(inputs) == 0:
        return math.nan
    total = 0.0
    for start in range(0, len(inputs), batch_size):
        pred = forward(model, inputs[start:start + batch_size])
        total += float(
            np.sum(validation_error(pred, targets[start:start + batch_size])))
    return total / len(inputs)


def _normalized_arrays(model, dataset):
    arch = model.architecture
    manifest = dataset.manifest
    if manifest.num_layers != arch.input_dim:
        raise ValueError(
            f'Dataset has {manifest.num_layers} layers, the model expects {arch.input_dim}'
        )
    if manifest.grid.n_points != arch.output_dim:
        raise ValueError(
            f'Dataset grid has {manifest.grid.n_points} points, the model expects '
            f'{arch.output_dim}')
    if model.manifest is not None and model.manifest.unit != manifest.unit:
        raise ValueError(
            f"Dataset unit '{manifest.unit}' differs from the model's "
            f"'{model.manifest.unit}'")
    normalizer = model.normalizer
    return (normalizer.apply_input(dataset.thicknesses),
            normalizer.apply_output(dataset.spectra))


def evaluate_mean_error(model, dataset):
    """
    Mean per-record sum of squared errors of the model on a dataset,
    in normalised output units
    """
    if model.normalizer is None:
        raise ValueError('The model carries no normalizer')
    inputs, targets = _normalized_arrays(model, dataset)
    return mean_spectrum_error(model, inputs, targets)


def canonical_order(thicknesses):
    """Indices sorting records lexicographically by their thicknesses"""
    thicknesses = np.asarray(thicknesses)
    return np.lexsort(thicknesses.T[::-1])


def train(model, train_split, val_split, config=TrainConfig()):
    """
    Train a model with mini-batch Adam

    A tcnn minimises the split loss, an fcnn the plain sum of squared errors.
    Records are put in canonical order before the seeded epoch shuffles so
    the order of the input file does not matter.

    :param model: initial :class:`MlpModel`; a normalizer is fitted on the
        training split when the model has none
    :param val_split: dataset scored after every epoch, may be ``None``
    :returns: tuple ``(model after the last epoch, history)`` with history
        rows ``(epoch, mean train loss, mean validation error)``
    :raises TrainingError: if the loss becomes non-finite
    """
    if len(train_split) == 0:
        raise ValueError('Cannot train on an empty split')
    if model.normalizer is None:
        model = replace(model, normalizer=fit_normalizer(train_split))
    if model.manifest is None:
        model = replace(model, manifest=train_split.manifest)

    inputs, targets = _normalized_arrays(model, train_split)
    order = canonical_order(train_split.thicknesses)
    inputs, targets = inputs[order], targets[order]
    if val_split is not None and len(val_split):
        val_inputs, val_targets = _normalized_arrays(model, val_split)
    else:
        val_inputs = val_targets = np.zeros((0, 0))

    rng = np.random.default_rng(config.seed)
    state = AdamState.for_model(model)
    history = []
    count = len(inputs)
    LOGGER.info('Training %s with %d parameters on %d records for %d epochs',
                model.architecture.kind, model.architecture.num_parameters,
                count, config.epochs)

    for epoch in range(1, config.epochs + 1):
        permutation = rng.permutation(count)
        total = 0.0
        try:
            for start in range(0, count, config.batch_size):
                batch = permutation[start:start + config.batch_size]
                loss, gradients = backprop(model, inputs[batch],
                                           targets[batch], config.m)
                if not math.isfinite(loss):
                    raise TrainingError(epoch, loss)
                total += loss * len(batch)
                model, state = adam_step(model, gradients, state, config.lr,
                                         config.beta1, config.beta2,
                                         config.eps)
            val_error = mean_spectrum_error(model, val_inputs, val_targets)
        except NumericError as error:
            raise TrainingError(epoch, math.nan) from error

        train_loss = total / count
        history.append((epoch, train_loss, val_error))
        LOGGER.debug('Epoch %d: train loss %.6g, validation error %.6g',
                     epoch, train_loss, val_error)
        if epoch % 10 == 0 or epoch == config.epochs:
            LOGGER.info('Epoch %d / %d: train loss %.6g, validation error %.6g',
                        epoch, config.epochs, train_loss, val_error)

    model = replace(model, train_config=config.to_dict(), history=history)
    return model, history
