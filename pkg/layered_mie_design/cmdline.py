"""
Command line interface: dataset generation, training, architecture
comparison, inverse design and evaluation
"""
import functools
import logging

import click
import numpy as np
import pandas as pd

from layered_mie_design import __version__
from layered_mie_design.artifacts import plot_lines, read_csv, write_csv
from layered_mie_design.common import (DEFAULT_GRID, DEFAULT_HOST_INDEX,
                                       LayeredMieError)
from layered_mie_design.config import ConfigError, load_command_config
from layered_mie_design.dataset import (fit_normalizer, generate_dataset,
                                        load_dataset, save_dataset,
                                        split_dataset)
from layered_mie_design.genetic import GaConfig
from layered_mie_design.inverse import (FineTuneConfig, inverse_design,
                                        write_report)
from layered_mie_design.materials import default_materials, load_materials
from layered_mie_design.oracle import (UNIT_EFFICIENCY, LayerStack,
                                       SpectralGrid, Spectrum, spectrum)
from layered_mie_design.surrogate import (KIND_FCNN, KIND_TCNN, Architecture,
                                          init_network, load_model,
                                          predict_spectrum, save_model)
from layered_mie_design.training import (TrainConfig, evaluate_mean_error,
                                         train)

# pylint: disable=too-many-arguments,too-many-locals,unused-argument

LOGGER = logging.getLogger(__name__)

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']


def _load_config(ctx, param, value):
    """Install a configuration file as the defaults of the command"""
    if value:
        try:
            ctx.default_map = load_command_config(value, ctx.info_name)
        except ConfigError as error:
            raise click.BadParameter(str(error), ctx=ctx, param=param)
    return value


CONFIG_OPTION = click.option(
    '--config',
    type=click.Path(exists=True, dir_okay=False),
    is_eager=True,
    expose_value=False,
    callback=_load_config,
    help='key: value file with defaults for the options of this command.')

SEED_OPTION = click.option('--seed',
                           type=click.IntRange(min=0),
                           default=0,
                           show_default=True,
                           help='Random seed.')


def handle_errors(func):
    """Turn package errors into clean exits"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except LayeredMieError as error:
            raise click.ClickException(str(error))
        except ValueError as error:
            raise click.UsageError(str(error))
        except OSError as error:
            raise click.ClickException(str(error))

    return wrapper


def provenance(command, **settings):
    """Settings embedded in every artifact"""
    record = {'generator': f'layered-mie-design {__version__}',
              'command': command}
    record.update(settings)
    LOGGER.debug('Provenance of %s: %s', command, record)
    return record


@click.group()
@click.option('--loglevel',
              type=click.Choice(LOG_LEVELS, case_sensitive=False),
              default='INFO',
              show_default=True,
              help='Logging level.')
@click.option('-s',
              '--silencer',
              is_flag=True,
              help='Only report critical errors.')
@click.version_option(__version__)
def cli(loglevel, silencer):
    """Design layered nanoparticles with a neural network surrogate"""
    level = 'CRITICAL' if silencer else loglevel.upper()
    logging.basicConfig(
        level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    logging.getLogger('layered_mie_design').setLevel(level)


@cli.command('generate')
@CONFIG_OPTION
@click.option('--layers',
              type=click.IntRange(min=1),
              default=3,
              show_default=True,
              help='Number of shells.')
@click.option('--count',
              type=click.IntRange(min=1),
              default=20000,
              show_default=True,
              help='Number of records.')
@SEED_OPTION
@click.option('--workers',
              type=click.IntRange(min=1),
              default=1,
              show_default=True,
              help='Parallel worker processes.')
@click.option('--lambda-min', type=float, default=DEFAULT_GRID[0],
              show_default=True, help='Shortest wavelength in nm.')
@click.option('--lambda-max', type=float, default=DEFAULT_GRID[1],
              show_default=True, help='Longest wavelength in nm.')
@click.option('--points', type=click.IntRange(min=1), default=DEFAULT_GRID[2],
              show_default=True, help='Number of wavelengths.')
@click.option('--host-index', type=float, default=DEFAULT_HOST_INDEX,
              show_default=True, help='Refractive index of the host medium.')
@click.option('--material-file',
              type=click.Path(exists=True, dir_okay=False),
              multiple=True,
              help='Refractive index table overriding a default material.')
@click.option('--efficiency',
              is_flag=True,
              help='Store efficiencies instead of cross-sections in nm^2.')
@click.option('--out', default='dataset.nld', show_default=True,
              help='Output dataset file.')
@handle_errors
def generate(layers, count, seed, workers, lambda_min, lambda_max, points,
             host_index, material_file, efficiency, out):
    """Generate a dataset of random stacks and their exact spectra"""
    grid = SpectralGrid(lambda_min, lambda_max, points)
    materials = load_materials(material_file)
    dataset = generate_dataset(count,
                               layers,
                               grid,
                               materials,
                               seed,
                               workers=workers,
                               host_index=host_index,
                               efficiency=efficiency)
    save_dataset(dataset, out)
    click.echo(f'records: {len(dataset)}')
    click.echo(f'layers: {layers}')
    click.echo(f'grid: {grid.lambda_min} - {grid.lambda_max} nm, '
               f'{grid.n_points} points')
    click.echo(f'unit: {dataset.manifest.unit}')
    click.echo(f'peak: {float(np.max(dataset.spectra))!r}')
    click.echo(f'written: {out}')


@cli.command('train')
@CONFIG_OPTION
@click.option('--dataset', required=True,
              type=click.Path(exists=True, dir_okay=False),
              help='Dataset file.')
@click.option('--arch', type=click.Choice([KIND_TCNN, KIND_FCNN]),
              default=KIND_TCNN, show_default=True, help='Network layout.')
@click.option('--epochs', type=click.IntRange(min=1), default=1000,
              show_default=True)
@click.option('--batch-size', type=click.IntRange(min=1), default=256,
              show_default=True)
@click.option('--lr', type=float, default=1e-3, show_default=True,
              help='Adam learning rate.')
@click.option('--m', type=click.FloatRange(0.0, 1.0), default=0.6,
              show_default=True,
              help='Weight of the first half of the spectrum (tcnn only).')
@click.option('--hidden-layers', type=click.IntRange(min=1), default=7,
              show_default=True)
@click.option('--hidden-width', type=click.IntRange(min=1), default=None,
              help='Neurons per hidden layer [default: 250 tcnn, 520 fcnn].')
@SEED_OPTION
@click.option('--out', default='model.nlm', show_default=True,
              help='Output model file.')
@click.option('--history', default='history.csv', show_default=True,
              help='Per-epoch loss CSV.')
@click.option('--plot', default=None, help='Optional SVG of the error curve.')
@handle_errors
def train_command(dataset, arch, epochs, batch_size, lr, m,
                  hidden_layers, hidden_width, seed, out, history, plot):
    """Train a surrogate network on a dataset"""
    records = load_dataset(dataset)
    train_split, val_split, test_split = split_dataset(records, seed=seed)
    architecture = Architecture(arch, records.manifest.num_layers,
                                records.manifest.grid.n_points, hidden_layers,
                                hidden_width)
    model = init_network(architecture,
                         seed,
                         normalizer=fit_normalizer(train_split),
                         manifest=records.manifest)
    config = TrainConfig(m=m, epochs=epochs, batch_size=batch_size,
                         lr=lr, seed=seed)
    model, rows = train(model, train_split, val_split, config)
    save_model(model, out)

    info = provenance('train', dataset=dataset, arch=arch, seed=seed,
                      epochs=epochs, batch_size=batch_size, lr=lr, m=m,
                      hidden_layers=hidden_layers,
                      hidden_width=architecture.hidden_width)
    frame = pd.DataFrame(rows,
                         columns=['epoch', 'train_loss', 'mean_val_error'])
    write_csv(history, frame, info)
    if plot:
        plot_lines(plot, frame['epoch'], {'validation': frame['mean_val_error']},
                   'epoch', 'mean validation error', provenance=info,
                   logy=True)

    click.echo(f'parameters: {architecture.num_parameters}')
    click.echo(f'final_train_loss: {rows[-1][1]!r}')
    click.echo(f'final_val_error: {rows[-1][2]!r}')
    click.echo(f'test_error: {evaluate_mean_error(model, test_split)!r}')
    click.echo(f'written: {out}')


@cli.command('compare')
@CONFIG_OPTION
@click.option('--layers', type=click.IntRange(min=1),
              multiple=True, default=(2, 3, 4), show_default=True,
              help='Layer counts to compare, repeatable.')
@click.option('--count', type=click.IntRange(min=1), default=5000,
              show_default=True, help='Records per layer count.')
@click.option('--epochs', type=click.IntRange(min=1), default=200,
              show_default=True)
@click.option('--points', type=click.IntRange(min=2), default=DEFAULT_GRID[2],
              show_default=True, help='Number of wavelengths.')
@SEED_OPTION
@click.option('--workers', type=click.IntRange(min=1), default=1,
              show_default=True)
@click.option('--out', default='compare.csv', show_default=True,
              help='Comparison table.')
@click.option('--plot', default=None, help='Optional SVG of the table.')
@handle_errors
def compare(layers, count, epochs, points, seed, workers, out, plot):
    """Compare tcnn and fcnn test errors across layer counts"""
    grid = SpectralGrid(DEFAULT_GRID[0], DEFAULT_GRID[1], points)
    materials = default_materials()
    rows = []
    for num_layers in layers:
        dataset = generate_dataset(count, num_layers, grid, materials, seed,
                                   workers=workers)
        train_split, val_split, test_split = split_dataset(dataset, seed=seed)
        normalizer = fit_normalizer(train_split)
        errors = {}
        for kind in (KIND_TCNN, KIND_FCNN):
            architecture = Architecture(kind, num_layers, grid.n_points)
            model = init_network(architecture, seed, normalizer=normalizer,
                                 manifest=dataset.manifest)
            model, _ = train(model, train_split, val_split,
                             TrainConfig(epochs=epochs, seed=seed))
            errors[kind] = evaluate_mean_error(model, test_split)
        ratio = errors[KIND_TCNN] / errors[KIND_FCNN] \
            if errors[KIND_FCNN] > 0 else float('nan')
        rows.append((num_layers, errors[KIND_TCNN], errors[KIND_FCNN], ratio))
        click.echo(f'layers {num_layers}: tcnn {errors[KIND_TCNN]!r}, '
                   f'fcnn {errors[KIND_FCNN]!r}, ratio {ratio:.3f}')

    info = provenance('compare', seed=seed, count=count, epochs=epochs,
                      points=points)
    frame = pd.DataFrame(rows,
                         columns=['layers', 'tcnn_error', 'fcnn_error',
                                  'ratio'])
    write_csv(out, frame, info)
    if plot:
        plot_lines(plot, frame['layers'], {
            'tcnn': frame['tcnn_error'],
            'fcnn': frame['fcnn_error']
        }, 'number of layers', 'mean test error', provenance=info)
    click.echo(f'written: {out}')


def _target_from_options(model, target_dataset, target_index, target_stack,
                         target_csv):
    """Resolve the target spectrum and a description of where it came from"""
    given = [value is not None
             for value in (target_dataset, target_stack, target_csv)]
    if sum(given) != 1:
        raise click.UsageError(
            'Give exactly one of --target-dataset, --target-stack and --target-csv'
        )
    manifest = model.manifest
    grid = manifest.grid

    if target_dataset is not None:
        dataset = load_dataset(target_dataset)
        if dataset.manifest.grid != grid:
            raise click.UsageError(
                'The target dataset grid differs from the model grid')
        if dataset.manifest.unit != manifest.unit:
            raise click.UsageError(
                'The target dataset unit differs from the model unit')
        if target_index >= len(dataset):
            raise click.BadParameter(
                f'Index {target_index} out of range for {len(dataset)} records',
                param_hint='--target-index')
        return (Spectrum(grid, dataset.spectra[target_index], manifest.unit),
                f'dataset {target_dataset} record {target_index}')

    if target_stack is not None:
        try:
            thicknesses = [
                float(value)
                for value in target_stack.replace(',', ' ').split()
            ]
            stack = LayerStack(thicknesses, manifest.material_cycle)
        except ValueError as error:
            raise click.BadParameter(str(error), param_hint='--target-stack')
        if stack.num_layers != model.architecture.input_dim:
            raise click.UsageError(
                f'The target stack has {stack.num_layers} layers, the model '
                f'expects {model.architecture.input_dim}')
        values = spectrum(stack, manifest.materials, grid, manifest.host_index,
                          efficiency=manifest.unit == UNIT_EFFICIENCY)
        return values, 'stack ' + ' '.join(f'{value:g}'
                                            for value in thicknesses)

    _, frame = read_csv(target_csv)
    if frame.shape[1] < 2 or len(frame) != grid.n_points:
        raise click.UsageError(
            f'The target CSV must hold {grid.n_points} rows of (wavelength, value)'
        )
    if not np.allclose(frame.iloc[:, 0].to_numpy(dtype=float),
                       grid.wavelengths, rtol=1e-9, atol=1e-6):
        raise click.UsageError('The target CSV wavelengths differ from the model grid')
    return (Spectrum(grid, frame.iloc[:, 1].to_numpy(dtype=float),
                     manifest.unit), f'csv {target_csv}')


@cli.command('design')
@CONFIG_OPTION
@click.option('--model', required=True,
              type=click.Path(exists=True, dir_okay=False),
              help='Trained model file.')
@click.option('--target-dataset', type=click.Path(exists=True, dir_okay=False),
              default=None, help='Take the target from a dataset record.')
@click.option('--target-index', type=click.IntRange(min=0), default=0,
              show_default=True, help='Record of --target-dataset.')
@click.option('--target-stack', default=None,
              help='Target from the exact spectrum of these thicknesses, '
              'e.g. "45,60,38".')
@click.option('--target-csv', type=click.Path(exists=True, dir_okay=False),
              default=None, help='Target from a (wavelength, value) CSV.')
@click.option('--ga-selection', default='adaptive', show_default=True,
              help="'adaptive', 'literal' or 'fixed:<N>'.")
@click.option('--t-value', type=float, default=1e6, show_default=True,
              help='Fitness threshold.')
@click.option('--max-generations', type=click.IntRange(min=1), default=200,
              show_default=True)
@click.option('--population', type=click.IntRange(min=2), default=100,
              show_default=True)
@click.option('--no-elitism', is_flag=True,
              help='Do not always keep the best individual.')
@click.option('--fine-tune-steps', type=click.IntRange(min=0), default=500,
              show_default=True)
@click.option('--fine-tune-lr', type=float, default=0.5, show_default=True)
@SEED_OPTION
@click.option('--out', default='design.txt', show_default=True,
              help='Design report.')
@click.option('--overlay', default='overlay.csv', show_default=True,
              help='Target and designed spectra CSV.')
@click.option('--plot', default=None, help='Optional SVG of the overlay.')
@handle_errors
def design(model, target_dataset, target_index, target_stack, target_csv,
           ga_selection, t_value, max_generations, population, no_elitism,
           fine_tune_steps, fine_tune_lr, seed, out, overlay, plot):
    """Find a stack whose spectrum matches a target"""
    surrogate = load_model(model)
    if surrogate.manifest is None or surrogate.normalizer is None:
        raise click.UsageError(f'{model} is not a trained model')
    target, origin = _target_from_options(surrogate, target_dataset, target_index,
                                          target_stack, target_csv)
    ga_config = GaConfig(population_size=population,
                         t_value=t_value,
                         max_generations=max_generations,
                         selection_cap=min(90, population - 1),
                         selection_mode=ga_selection,
                         elitism=not no_elitism,
                         seed=seed)
    fine_tune_config = FineTuneConfig(steps=fine_tune_steps, lr=fine_tune_lr)
    report = inverse_design(target, surrogate, ga_config=ga_config,
                            fine_tune_config=fine_tune_config,
                            target_provenance=origin)
    write_report(report, out)

    info = provenance('design', model=model, target=origin, seed=seed,
                      ga_selection=ga_selection, t_value=t_value)
    frame = pd.DataFrame({
        'wavelength': target.grid.wavelengths,
        'target': target.values,
        'designed_oracle': report.designed_spectrum.values,
        'designed_surrogate': report.surrogate_spectrum.values,
    })
    write_csv(overlay, frame, info)
    if plot:
        plot_lines(plot, frame['wavelength'], {
            'target': frame['target'],
            'designed (exact)': frame['designed_oracle'],
            'designed (surrogate)': frame['designed_surrogate'],
        }, 'wavelength (nm)', f'scattering ({target.unit})', provenance=info)

    click.echo('stack: ' + ' '.join(f'{value:.2f}'
                                    for value in report.stack.thicknesses))
    click.echo(f'surrogate_error: {report.surrogate_error!r}')
    click.echo(f'oracle_error: {report.oracle_error!r}')
    click.echo(f'relative_rms: {report.relative_rms!r}')
    click.echo(f'threshold_reached: {report.threshold_reached}')
    click.echo(f'written: {out}')


@cli.command('eval')
@CONFIG_OPTION
@click.option('--model', required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option('--dataset', required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option('--split', type=click.Choice(['train', 'val', 'test', 'all']),
              default='test', show_default=True,
              help='Part of the dataset, split as during training.')
@click.option('--overlay', default=None,
              help='CSV comparing one record with its prediction.')
@click.option('--overlay-index', type=click.IntRange(min=0), default=0,
              show_default=True)
@click.option('--plot', default=None, help='Optional SVG of the overlay.')
@handle_errors
def eval_command(model, dataset, split, overlay, overlay_index, plot):
    """Mean error of a model on a dataset"""
    surrogate = load_model(model)
    records = load_dataset(dataset)
    if surrogate.normalizer is None:
        raise click.UsageError(f'{model} is not a trained model')
    if records.manifest.grid.n_points != surrogate.architecture.output_dim \
            or records.manifest.num_layers != surrogate.architecture.input_dim:
        raise click.UsageError('The dataset does not match the model')

    if split == 'all':
        part = records
    else:
        parts = split_dataset(records,
                              seed=surrogate.train_config.get('seed', 0))
        part = parts[['train', 'val', 'test'].index(split)]
    error = evaluate_mean_error(surrogate, part)
    click.echo(f'records: {len(part)}')
    click.echo(f'mean_error: {error!r}')

    if overlay or plot:
        if overlay_index >= len(part):
            raise click.BadParameter(
                f'Index {overlay_index} out of range for {len(part)} records',
                param_hint='--overlay-index')
        stack = part.stack(overlay_index)
        predicted = predict_spectrum(surrogate, stack)
        info = provenance('eval', model=model, dataset=dataset,
                          split=split, index=overlay_index)
        frame = pd.DataFrame({
            'wavelength': records.manifest.grid.wavelengths,
            'target': part.spectra[overlay_index],
            'predicted': predicted.values,
        })
        if overlay:
            write_csv(overlay, frame, info)
        if plot:
            plot_lines(plot, frame['wavelength'], {
                'exact': frame['target'],
                'surrogate': frame['predicted']
            }, 'wavelength (nm)', f'scattering ({records.manifest.unit})',
                       provenance=info)
