"""
Tests for gradient refinement and the full inverse design loop
"""
import math

import numpy as np
import pytest

from layered_mie_design.dataset import (fit_normalizer, generate_dataset,
                                        split_dataset)
from layered_mie_design.genetic import GaConfig
from layered_mie_design.inverse import (FineTuneConfig, fine_tune,
                                        format_report, inverse_design,
                                        relative_rms, write_report)
from layered_mie_design.oracle import (LayerStack, SpectralGrid, Spectrum,
                                       spectrum)
from layered_mie_design.surrogate import Architecture, forward, init_network
from layered_mie_design.training import TrainConfig, train

SMALL_GA = GaConfig(population_size=20, selection_cap=10, t_value=1e9,
                    max_generations=3, seed=2)


def test_fine_tune_config():
    assert FineTuneConfig().steps == 500
    assert FineTuneConfig().lr == 0.5
    with pytest.raises(ValueError):
        FineTuneConfig(steps=-1)
    with pytest.raises(ValueError):
        FineTuneConfig(lr=0.0)


def test_fine_tune_stationary_start():
    arch = Architecture('fcnn', 2, 4, hidden_layers=1, hidden_width=3)
    model = init_network(arch, 6)
    start = np.array([40.0, 60.0])
    # raw inputs, so the exact prediction at the start is the target
    target = forward(model, start)
    result = fine_tune(model, start, target)
    assert result.error_trace == [0.0]
    assert result.thicknesses == (40.0, 60.0)

    result = fine_tune(model, start, target + 1.0, FineTuneConfig(steps=0))
    assert len(result.error_trace) == 1
    assert result.thicknesses == (40.0, 60.0)


def test_fine_tune_descends(tiny_model, tiny_dataset):
    target = tiny_dataset.spectra[7]
    result = fine_tune(tiny_model, (35.0, 65.0, 45.0), target,
                       FineTuneConfig(steps=50))
    trace = result.error_trace
    assert all(later <= earlier for earlier, later in zip(trace, trace[1:]))
    assert result.error == trace[-1]
    assert all(30.0 <= value <= 70.0 for value in result.thicknesses)
    assert len(result.thicknesses) == 3


def test_relative_rms():
    assert relative_rms([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert relative_rms([2.0, 2.0], [1.0, 1.0]) == pytest.approx(1.0)
    assert relative_rms([0.0, 0.0], [0.0, 0.0]) == 0.0
    assert relative_rms([1.0, 0.0], [0.0, 0.0]) == math.inf


def test_inverse_design_smoke(tmp_path, tiny_model, tiny_dataset):
    target = Spectrum(tiny_dataset.manifest.grid, tiny_dataset.spectra[4])
    report = inverse_design(target, tiny_model, ga_config=SMALL_GA,
                            fine_tune_config=FineTuneConfig(steps=10),
                            target_provenance='record 4')

    assert isinstance(report.stack, LayerStack)
    assert report.stack.in_design_box()
    assert len(report.ga_history) == 3
    assert not report.threshold_reached
    assert not report.reachable
    assert report.fine_tune_trace[0] >= report.surrogate_error
    assert report.oracle_error >= 0.0
    np.testing.assert_array_equal(
        report.designed_spectrum.values,
        spectrum(report.stack, tiny_dataset.manifest.materials,
                 tiny_dataset.manifest.grid).values)
    assert report.relative_rms == pytest.approx(
        relative_rms(report.designed_spectrum.values, target.values))
    assert report.settings['population_size'] == 20
    assert report.settings['fine_tune_steps'] == 10

    text = format_report(report)
    lines = text.splitlines()
    assert lines[0] == 'target: record 4'
    assert lines[1] == 'unit: nm2'
    assert 'threshold_reached: False' in lines
    header = lines.index(
        'generation,max_fitness,mean_fitness,best_fitness,n_selection,'
        'n_crossover,n_mutation')
    assert len(lines) - header - 1 == 3

    path = tmp_path / 'report.txt'
    write_report(report, path)
    assert path.read_text() == text


def test_inverse_design_accepts_arrays(tiny_model, tiny_dataset):
    report = inverse_design(tiny_dataset.spectra[1], tiny_model,
                            ga_config=SMALL_GA,
                            fine_tune_config=FineTuneConfig(steps=0))
    assert report.target.grid == tiny_dataset.manifest.grid
    assert report.surrogate_error == report.fine_tune_trace[0]


def test_zero_target_is_unreachable(tiny_model, tiny_dataset):
    target = Spectrum(tiny_dataset.manifest.grid, np.zeros(20))
    report = inverse_design(target, tiny_model, ga_config=SMALL_GA,
                            fine_tune_config=FineTuneConfig(steps=5))
    assert not report.reachable
    assert report.relative_rms == math.inf


def test_inverse_design_errors(tiny_model):
    other = Spectrum(SpectralGrid(400.0, 800.0, 10), np.ones(10))
    with pytest.raises(ValueError):
        inverse_design(other, tiny_model, ga_config=SMALL_GA)

    bare = init_network(tiny_model.architecture, 0)
    with pytest.raises(ValueError):
        inverse_design(np.ones(20), bare, ga_config=SMALL_GA)


@pytest.mark.slow
def test_closed_loop_design(materials):
    """Six-layer targets from the exact solver are designed back to within
    10 % relative RMS, median over targets"""
    grid = SpectralGrid(400.0, 800.0, 100)
    dataset = generate_dataset(20000, 6, grid, materials, seed=21, workers=4)
    train_split, val_split, _ = split_dataset(dataset, seed=0)
    model = init_network(Architecture('tcnn', 6, 100),
                         0,
                         normalizer=fit_normalizer(train_split),
                         manifest=dataset.manifest)
    model, _ = train(model, train_split, val_split,
                     TrainConfig(epochs=200, seed=0))

    rng = np.random.default_rng(5)
    errors = []
    for index in range(10):
        stack = LayerStack(rng.uniform(30.0, 70.0, 6))
        report = inverse_design(spectrum(stack, materials, grid),
                                model,
                                ga_config=GaConfig(t_value=1e7,
                                                   max_generations=100,
                                                   seed=index),
                                fine_tune_config=FineTuneConfig())
        errors.append(report.relative_rms)
    assert np.median(errors) <= 0.1
