"""
Tests for the Adam optimiser and the training loop
"""
import math

import numpy as np
import pytest

from layered_mie_design.common import TrainingError
from layered_mie_design.dataset import (fit_normalizer, generate_dataset,
                                        split_dataset)
from layered_mie_design.inverse import relative_rms
from layered_mie_design.oracle import SpectralGrid
from layered_mie_design.surrogate import (Architecture, forward, init_network,
                                          predict_spectrum, validation_error)
from layered_mie_design.training import (AdamState, TrainConfig, adam_step,
                                         canonical_order,
                                         evaluate_mean_error,
                                         mean_spectrum_error, train)


def _small_model(dataset, kind='tcnn', seed=0, width=8, depth=2):
    arch = Architecture(kind, dataset.manifest.num_layers,
                        dataset.manifest.grid.n_points,
                        hidden_layers=depth,
                        hidden_width=width)
    return init_network(arch, seed)


def test_adam_zero_gradient(tiny_model):
    state = AdamState.for_model(tiny_model)
    zeros = [np.zeros_like(array) for array in tiny_model.parameter_arrays()]
    updated, state = adam_step(tiny_model, zeros, state)
    assert state.step == 1
    np.testing.assert_array_equal(updated.flat_parameters(),
                                  tiny_model.flat_parameters())


def test_adam_first_step(tiny_model):
    state = AdamState.for_model(tiny_model)
    gradients = [np.full_like(array, 0.3)
                 for array in tiny_model.parameter_arrays()]
    gradients[0] = -gradients[0]
    before = tiny_model.flat_parameters()
    updated, new_state = adam_step(tiny_model, gradients, state, lr=1e-3)
    change = updated.flat_parameters() - before
    expected = -1e-3 * np.sign(np.concatenate(
        [grad.ravel() for grad in gradients]))
    np.testing.assert_allclose(change, expected, rtol=1e-6)

    # inputs are left alone
    np.testing.assert_array_equal(tiny_model.flat_parameters(), before)
    assert state.step == 0
    assert not np.any(state.first[0])
    assert new_state.step == 1


def test_adam_shape_mismatch(tiny_model):
    state = AdamState.for_model(tiny_model)
    with pytest.raises(ValueError):
        adam_step(tiny_model, [], state)


def test_train_config():
    config = TrainConfig(epochs=3, seed=4)
    assert TrainConfig.from_dict(config.to_dict()) == config
    assert config.batch_size == 256
    assert config.lr == 1e-3
    with pytest.raises(ValueError):
        TrainConfig(m=1.5)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(lr=0.0)


def test_train_history_and_determinism(tiny_dataset, tiny_splits):
    train_split, val_split, _ = tiny_splits
    config = TrainConfig(epochs=4, batch_size=16, lr=1e-2, seed=2)
    model, history = train(_small_model(tiny_dataset), train_split, val_split,
                           config)
    assert [row[0] for row in history] == [1, 2, 3, 4]
    assert all(math.isfinite(value) for row in history for value in row)
    assert model.history == history
    assert model.train_config == config.to_dict()
    assert model.normalizer is not None
    assert model.manifest.grid == tiny_dataset.manifest.grid
    assert model.manifest.num_layers == 3

    again, _ = train(_small_model(tiny_dataset), train_split, val_split,
                     config)
    np.testing.assert_array_equal(again.flat_parameters(),
                                  model.flat_parameters())


def test_train_ignores_record_order(tiny_dataset, tiny_splits):
    train_split, val_split, _ = tiny_splits
    reversed_split = train_split.subset(np.arange(len(train_split))[::-1])
    config = TrainConfig(epochs=2, batch_size=8, seed=5)
    first, first_history = train(_small_model(tiny_dataset, 'fcnn'),
                                 train_split, val_split, config)
    second, second_history = train(_small_model(tiny_dataset, 'fcnn'),
                                   reversed_split, val_split, config)
    np.testing.assert_array_equal(first.flat_parameters(),
                                  second.flat_parameters())
    assert first_history == second_history


def test_memorise_single_record(tiny_dataset):
    record = tiny_dataset.subset([0])
    model = _small_model(tiny_dataset, 'fcnn', width=8, depth=1)
    config = TrainConfig(epochs=6000, batch_size=1, lr=1e-3, seed=0)
    model, history = train(model, record, None, config)
    assert history[-1][1] < 1e-6
    assert math.isnan(history[-1][2])
    assert evaluate_mean_error(model, record) < 1e-5


def test_divergence(tiny_dataset, tiny_splits):
    train_split, val_split, _ = tiny_splits
    config = TrainConfig(epochs=1, batch_size=8, lr=1e200)
    with np.errstate(over='ignore', invalid='ignore'):
        with pytest.raises(TrainingError) as excinfo:
            train(_small_model(tiny_dataset), train_split, val_split, config)
    assert excinfo.value.epoch == 1


def test_mean_errors(tiny_model, tiny_dataset):
    inputs = tiny_model.normalizer.apply_input(tiny_dataset.thicknesses[:2])
    targets = tiny_model.normalizer.apply_output(tiny_dataset.spectra[:2])
    pred = forward(tiny_model, inputs)
    expected = 0.5 * (validation_error(pred[0], targets[0]) +
                      validation_error(pred[1], targets[1]))
    assert mean_spectrum_error(tiny_model, inputs, targets) == pytest.approx(
        expected, rel=1e-12)
    assert mean_spectrum_error(tiny_model, inputs, pred) == 0.0
    assert math.isnan(mean_spectrum_error(tiny_model, inputs[:0],
                                          targets[:0]))

    two = tiny_dataset.subset([0, 1])
    assert evaluate_mean_error(tiny_model, two) == pytest.approx(expected,
                                                                 rel=1e-12)


def test_evaluate_mismatch(tiny_model, materials, small_grid):
    other = generate_dataset(2, 2, small_grid, materials, seed=0)
    with pytest.raises(ValueError):
        evaluate_mean_error(tiny_model, other)

    bare = init_network(tiny_model.architecture, 0)
    with pytest.raises(ValueError):
        evaluate_mean_error(bare, other)


def test_canonical_order():
    rows = np.array([[40.0, 50.0], [35.0, 60.0], [40.0, 45.0]])
    np.testing.assert_array_equal(canonical_order(rows), [1, 2, 0])


def test_normalizer_fitted_on_train_only(tiny_dataset, tiny_splits):
    train_split, val_split, _ = tiny_splits
    model, _ = train(_small_model(tiny_dataset), train_split, val_split,
                     TrainConfig(epochs=1, seed=0))
    assert model.normalizer.output_scale == fit_normalizer(
        train_split).output_scale


@pytest.mark.slow
def test_validation_error_falls(materials):
    """Desk-scale training run: the validation error drops by an order of
    magnitude and a held out record is reproduced closely"""
    grid = SpectralGrid(400.0, 800.0, 100)
    dataset = generate_dataset(5000, 3, grid, materials, seed=0, workers=2)
    train_split, val_split, test_split = split_dataset(dataset, seed=0)
    model = init_network(Architecture('tcnn', 3, 100),
                         0,
                         normalizer=fit_normalizer(train_split),
                         manifest=dataset.manifest)
    model, history = train(model, train_split, val_split,
                           TrainConfig(epochs=200, seed=0))

    assert history[-1][2] * 10.0 <= history[0][2]
    assert evaluate_mean_error(model, test_split) <= 2.0 * history[-1][2]
    predicted = predict_spectrum(model, test_split.stack(0))
    assert relative_rms(predicted.values, test_split.spectra[0]) <= 0.1
