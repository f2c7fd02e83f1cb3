"""
Test the commandline interface module
"""
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from layered_mie_design.artifacts import read_csv
from layered_mie_design.cmdline import cli
from layered_mie_design.dataset import load_dataset
from layered_mie_design.materials import MaterialTable, write_material_table
from layered_mie_design.surrogate import load_model

# pylint: disable=redefined-outer-name

GENERATE_ARGS = ['generate', '--layers', '2', '--count', '40', '--points',
                 '10', '--seed', '3']
TRAIN_ARGS = ['train', '--dataset', 'data.nld', '--epochs', '2',
              '--hidden-layers', '1', '--hidden-width', '4', '--batch-size',
              '8']


def invoke(runner, args, exit_code=0):
    """Run the command line and check its exit code"""
    result = runner.invoke(cli, ['-s'] + args, catch_exceptions=False)
    assert result.exit_code == exit_code, result.output
    return result


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def trained(runner, tmp_path, monkeypatch):
    """Work directory holding a small dataset and a model trained on it"""
    monkeypatch.chdir(tmp_path)
    invoke(runner, GENERATE_ARGS + ['--out', 'data.nld'])
    invoke(runner, TRAIN_ARGS)
    return tmp_path


def test_generate(runner):
    with runner.isolated_filesystem():
        result = invoke(runner, GENERATE_ARGS + ['--out', 'first.nld'])
        assert 'records: 40' in result.output
        assert 'unit: nm2' in result.output
        invoke(runner, GENERATE_ARGS + ['--out', 'second.nld'])
        assert Path('first.nld').read_bytes() == Path(
            'second.nld').read_bytes()

        dataset = load_dataset('first.nld')
        assert dataset.thicknesses.shape == (40, 2)
        assert dataset.spectra.shape == (40, 10)
        assert dataset.manifest.seed == 3


def test_generate_options(runner):
    with runner.isolated_filesystem():
        write_material_table(
            MaterialTable.constant('TiO2', 2.2, (300.0, 900.0)), 'tio2.txt')
        invoke(runner, GENERATE_ARGS + ['--material-file', 'tio2.txt',
                                        '--out', 'custom.nld'])
        invoke(runner, GENERATE_ARGS + ['--out', 'default.nld'])
        custom = load_dataset('custom.nld')
        default = load_dataset('default.nld')
        np.testing.assert_array_equal(custom.thicknesses, default.thicknesses)
        assert not np.allclose(custom.spectra, default.spectra)

        invoke(runner, GENERATE_ARGS + ['--efficiency', '--out', 'eff.nld'])
        assert load_dataset('eff.nld').manifest.unit == 'efficiency'


def test_generate_rejects_bad_options(runner):
    with runner.isolated_filesystem():
        invoke(runner, ['generate', '--layers', '0'], exit_code=2)
        invoke(runner, ['generate', '--count', '2', '--lambda-min', '900',
                        '--out', 'bad.nld'], exit_code=2)
        assert not Path('bad.nld').exists()


def test_train(runner, trained):
    model = load_model('model.nlm')
    assert model.architecture.kind == 'tcnn'
    assert model.architecture.hidden_width == 4
    assert len(model.history) == 2

    provenance, history = read_csv('history.csv')
    assert list(history.columns) == ['epoch', 'train_loss', 'mean_val_error']
    assert list(history['epoch']) == [1, 2]
    assert provenance['command'] == 'train'
    assert provenance['hidden_width'] == '4'


def test_train_default_width(runner, trained):
    result = invoke(runner, [
        'train', '--dataset', 'data.nld', '--arch', 'fcnn', '--epochs', '1',
        '--hidden-layers', '1', '--out', 'fcnn.nlm', '--history', 'fcnn.csv',
        '--plot', 'fcnn.svg'
    ])
    assert 'parameters:' in result.output
    provenance, _ = read_csv('fcnn.csv')
    assert provenance['hidden_width'] == '520'
    assert load_model('fcnn.nlm').architecture.kind == 'fcnn'
    assert b'<svg' in Path('fcnn.svg').read_bytes()


def test_train_config_file(runner, trained):
    Path('train.cfg').write_text('# small run\nepochs: 2\nhidden-layers: 1\n'
                                 'hidden-width: 4\nbatch-size: 8\n'
                                 'out: from_config.nlm\n')
    invoke(runner, ['train', '--config', 'train.cfg', '--dataset', 'data.nld',
                    '--epochs', '3', '--history', 'cfg.csv'])
    model = load_model('from_config.nlm')
    assert model.architecture.hidden_width == 4
    assert len(model.history) == 3

    Path('bad.cfg').write_text('epochs: 0\n')
    invoke(runner, ['train', '--config', 'bad.cfg', '--dataset', 'data.nld'],
           exit_code=2)
    Path('unknown.cfg').write_text('epochz: 3\n')
    invoke(runner,
           ['train', '--config', 'unknown.cfg', '--dataset', 'data.nld'],
           exit_code=2)


def test_corrupted_dataset(runner, trained):
    data = bytearray(Path('data.nld').read_bytes())
    data[-20] ^= 0xFF
    Path('broken.nld').write_bytes(bytes(data))
    result = invoke(runner, ['train', '--dataset', 'broken.nld'], exit_code=1)
    assert 'checksum' in result.output.lower()


def test_eval(runner, trained):
    result = invoke(runner, ['eval', '--model', 'model.nlm', '--dataset',
                             'data.nld', '--split', 'all', '--overlay',
                             'overlay.csv', '--overlay-index', '5'])
    assert 'records: 40' in result.output
    assert 'mean_error:' in result.output
    provenance, frame = read_csv('overlay.csv')
    assert len(frame) == 10
    assert list(frame.columns) == ['wavelength', 'target', 'predicted']
    assert provenance['index'] == '5'

    result = invoke(runner, ['eval', '--model', 'model.nlm', '--dataset',
                             'data.nld'])
    assert 'records: 2' in result.output

    invoke(runner, ['eval', '--model', 'model.nlm', '--dataset', 'data.nld',
                    '--overlay', 'x.csv', '--overlay-index', '99'],
           exit_code=2)


def test_design_from_stack(runner, trained):
    result = invoke(runner, [
        'design', '--model', 'model.nlm', '--target-stack', '45, 60',
        '--population', '30', '--ga-selection', 'fixed:20',
        '--max-generations', '2', '--fine-tune-steps', '5', '--out',
        'design.txt', '--overlay', 'overlay.csv', '--plot', 'overlay.svg'
    ])
    assert 'stack:' in result.output
    report = Path('design.txt').read_text().splitlines()
    assert report[0] == 'target: stack 45 60'
    assert 'selection_mode: fixed:20' in report

    provenance, frame = read_csv('overlay.csv')
    assert len(frame) == 10
    assert list(frame.columns) == [
        'wavelength', 'target', 'designed_oracle', 'designed_surrogate'
    ]
    assert provenance['target'] == 'stack 45 60'
    assert Path('overlay.svg').exists()


def test_design_from_dataset_and_csv(runner, trained):
    args = ['design', '--model', 'model.nlm', '--population', '20',
            '--max-generations', '2', '--fine-tune-steps', '3']
    invoke(runner, args + ['--target-dataset', 'data.nld', '--target-index',
                           '7', '--out', 'from_dataset.txt'])
    first = Path('from_dataset.txt').read_text().splitlines()[0]
    assert first == 'target: dataset data.nld record 7'

    invoke(runner, ['eval', '--model', 'model.nlm', '--dataset', 'data.nld',
                    '--split', 'all', '--overlay', 'target.csv'])
    invoke(runner, args + ['--target-csv', 'target.csv', '--out',
                           'from_csv.txt'])
    first = Path('from_csv.txt').read_text().splitlines()[0]
    assert first == 'target: csv target.csv'


def test_design_rejects_bad_targets(runner, trained):
    args = ['design', '--model', 'model.nlm', '--population', '20',
            '--max-generations', '1']
    invoke(runner, args, exit_code=2)
    invoke(runner, args + ['--target-stack', '45,60', '--target-dataset',
                           'data.nld'], exit_code=2)
    invoke(runner, args + ['--target-stack', '45,60,50'], exit_code=2)
    invoke(runner, args + ['--target-stack', '45,-1'], exit_code=2)
    invoke(runner, args + ['--target-dataset', 'data.nld', '--target-index',
                           '40'], exit_code=2)
    invoke(runner, args + ['--target-stack', '45,60', '--ga-selection',
                           'fixed:50'], exit_code=2)


def test_compare(runner):
    with runner.isolated_filesystem():
        result = invoke(runner, [
            'compare', '--layers', '1', '--layers', '2', '--count', '40',
            '--epochs', '1', '--points', '10', '--out', 'compare.csv'
        ])
        assert 'layers 1:' in result.output
        provenance, frame = read_csv('compare.csv')
        assert list(frame['layers']) == [1, 2]
        assert list(frame.columns) == ['layers', 'tcnn_error', 'fcnn_error',
                                       'ratio']
        assert np.all(frame['tcnn_error'] > 0)
        assert provenance['command'] == 'compare'


def test_version(runner):
    result = runner.invoke(cli, ['--version'])
    assert result.exit_code == 0
    assert '0.1.0' in result.output


@pytest.mark.slow
def test_compare_ordering(runner):
    """Two channels do no worse than the single wide network"""
    with runner.isolated_filesystem():
        invoke(runner, [
            'compare', '--count', '5000', '--epochs', '200', '--points', '100',
            '--workers', '4', '--out', 'compare.csv'
        ])
        _, frame = read_csv('compare.csv')
        assert list(frame['layers']) == [2, 3, 4]
        assert np.all(frame['tcnn_error'] <= frame['fcnn_error'])
