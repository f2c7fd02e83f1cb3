"""
Inverse design: GA search followed by gradient refinement of the input of
the frozen surrogate, verified with the exact oracle
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from layered_mie_design.artifacts import write_text
from layered_mie_design.common import DESIGN_BOX, NumericError
from layered_mie_design.genetic import GaConfig, normalized_target, run_ga
from layered_mie_design.oracle import (UNIT_EFFICIENCY, LayerStack, Spectrum,
                                       spectrum)
from layered_mie_design.surrogate import (forward, input_gradient,
                                          predict_spectrum)

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class FineTuneConfig:
    steps: int = 500
    lr: float = 0.5
    max_backtracks: int = 20

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError(f'steps must be nonnegative, got {self.steps}')
        if not self.lr > 0:
            raise ValueError(f'lr must be positive, got {self.lr}')
        if self.max_backtracks < 0:
            raise ValueError('max_backtracks must be nonnegative')


@dataclass
class FineTuneResult:
    thicknesses: tuple
    error_trace: list = field(default_factory=list)

    @property
    def error(self):
        return self.error_trace[-1]


def _bounds(model):
    bounds = model.manifest.bounds if model.manifest is not None \
        else DESIGN_BOX
    low = np.full(model.architecture.input_dim, float(bounds[0]))
    high = np.full(model.architecture.input_dim, float(bounds[1]))
    if model.normalizer is not None:
        return model.normalizer.apply_input(low), \
            model.normalizer.apply_input(high)
    return low, high


def _surrogate_sse(model, inputs, target_normalized):
    pred = forward(model, inputs)
    return float(np.sum((pred - target_normalized)**2))


def fine_tune(model, start, target, config=FineTuneConfig()):
    """
    Gradient descent on the (normalised) input of a frozen model.

    Every step is clipped to the design box and accepted only if the
    surrogate error does not increase; otherwise the step size is halved,
    up to ``config.max_backtracks`` times, after which the search stops.

    :param start: starting thicknesses in nm
    :param target: :class:`Spectrum` or array in the model's raw units
    :returns: :class:`FineTuneResult` with the best thicknesses in nm and the
        error after every accepted step (initial error first)
    :raises NumericError: on a non-finite input gradient
    """
    low, high = _bounds(model)
    target_normalized = normalized_target(model, target)
    start = np.asarray(start, dtype=float)
    point = start if model.normalizer is None \
        else model.normalizer.apply_input(start)
    point = np.clip(point, low, high)
    error = _surrogate_sse(model, point, target_normalized)
    trace = [error]

    for step in range(config.steps):
        _, gradient = input_gradient(model, point, target_normalized)
        if not np.all(np.isfinite(gradient)):
            raise NumericError('Non-finite input gradient', layer=0)
        if not np.any(gradient):
            LOGGER.debug('Zero input gradient after %d steps', step)
            break
        rate = config.lr
        accepted = False
        for _ in range(config.max_backtracks + 1):
            candidate = np.clip(point - rate * gradient, low, high)
            candidate_error = _surrogate_sse(model, candidate,
                                             target_normalized)
            if candidate_error <= error:
                accepted = True
                break
            rate *= 0.5
        if not accepted:
            LOGGER.warning(
                'Fine-tuning stopped after %d steps: no step size reduced the error',
                step)
            break
        point, error = candidate, candidate_error
        trace.append(error)

    thicknesses = point if model.normalizer is None \
        else model.normalizer.invert_input(point)
    # Guard against round-off leaving the box
    thicknesses = np.clip(thicknesses,
                          *(model.manifest.bounds if model.manifest is not None
                            else DESIGN_BOX))
    return FineTuneResult(tuple(float(value) for value in thicknesses), trace)


def relative_rms(values, reference):
    """RMS of the difference relative to the RMS of ``reference``"""
    values = np.asarray(values, dtype=float)
    reference = np.asarray(reference, dtype=float)
    norm = math.sqrt(float(np.mean(reference**2)))
    diff = math.sqrt(float(np.mean((values - reference)**2)))
    if norm == 0:
        return 0.0 if diff == 0 else math.inf
    return diff / norm


@dataclass
class DesignReport:
    """Outcome of :func:`inverse_design`"""
    target: Spectrum
    target_provenance: str
    ga_best: tuple
    ga_best_fitness: float
    stack: LayerStack
    surrogate_error: float
    oracle_error: float
    relative_rms: float
    threshold_reached: bool
    reachable: bool
    designed_spectrum: Spectrum = field(repr=False)
    surrogate_spectrum: Spectrum = field(repr=False)
    ga_history: list = field(default_factory=list, repr=False)
    fine_tune_trace: list = field(default_factory=list, repr=False)
    settings: dict = field(default_factory=dict)


def inverse_design(target,
                   model,
                   materials=None,
                   ga_config=GaConfig(),
                   fine_tune_config=FineTuneConfig(),
                   target_provenance='',
                   initial_population=None):
    """
    Design a stack whose spectrum matches ``target``

    Runs the GA, refines its best individual by gradient descent through the
    surrogate and recomputes the spectrum of the result with the oracle.

    :param target: :class:`Spectrum` on the model's grid, in its units
    :param model: trained :class:`MlpModel` with normalizer and manifest
    :param materials: tables for the oracle, the model's own by default
    """
    if model.manifest is None or model.normalizer is None:
        raise ValueError('The model carries no normalizer or dataset manifest')
    manifest = model.manifest
    if not isinstance(target, Spectrum):
        target = Spectrum(manifest.grid, target, manifest.unit)
    if target.grid.n_points != manifest.grid.n_points:
        raise ValueError(
            f'Target has {target.grid.n_points} points, the model predicts '
            f'{manifest.grid.n_points}')
    materials = materials or manifest.materials

    if not np.any(target.values > 0):
        LOGGER.warning('The target spectrum is zero everywhere')

    ga_result = run_ga(target, model, ga_config, initial_population)
    tuned = fine_tune(model, ga_result.best, target, fine_tune_config)
    stack = LayerStack(tuned.thicknesses, manifest.material_cycle)

    designed = spectrum(stack,
                        materials,
                        manifest.grid,
                        manifest.host_index,
                        efficiency=manifest.unit == UNIT_EFFICIENCY)
    target_normalized = normalized_target(model, target)
    oracle_error = float(
        np.sum((model.normalizer.apply_output(designed.values) -
                target_normalized)**2))
    report = DesignReport(
        target=target,
        target_provenance=target_provenance,
        ga_best=ga_result.best,
        ga_best_fitness=ga_result.best_fitness,
        stack=stack,
        surrogate_error=tuned.error,
        oracle_error=oracle_error,
        relative_rms=relative_rms(designed.values, target.values),
        threshold_reached=ga_result.threshold_reached,
        reachable=bool(np.any(target.values > 0))
        and ga_result.threshold_reached,
        designed_spectrum=designed,
        surrogate_spectrum=predict_spectrum(model, stack),
        ga_history=ga_result.history,
        fine_tune_trace=tuned.error_trace,
        settings={
            'population_size': ga_config.population_size,
            't_value': ga_config.t_value,
            'max_generations': ga_config.max_generations,
            'selection_mode': ga_config.selection_mode,
            'elitism': ga_config.elitism,
            'seed': ga_config.seed,
            'fine_tune_steps': fine_tune_config.steps,
            'fine_tune_lr': fine_tune_config.lr,
        })
    LOGGER.info(
        'Designed stack %s: surrogate error %.6g, oracle error %.6g, '
        'relative RMS %.4g', ', '.join(f'{value:.2f}' for value in stack.thicknesses),
        report.surrogate_error, report.oracle_error, report.relative_rms)
    return report


def format_report(report):
    """Text form of a :class:`DesignReport`"""
    lines = [
        f'target: {report.target_provenance}',
        f'unit: {report.target.unit}',
    ]
    lines.extend(f'{key}: {value}' for key, value in report.settings.items())
    lines.extend([
        'ga_best: ' + ' '.join(f'{value:g}' for value in report.ga_best),
        f'ga_best_fitness: {report.ga_best_fitness!r}',
        f'generations: {len(report.ga_history)}',
        f'threshold_reached: {report.threshold_reached}',
        f'reachable: {report.reachable}',
        'stack: ' + ' '.join(f'{value!r}' for value in report.stack.thicknesses),
        f'surrogate_error: {report.surrogate_error!r}',
        f'oracle_error: {report.oracle_error!r}',
        f'relative_rms: {report.relative_rms!r}',
        f'fine_tune_steps_accepted: {len(report.fine_tune_trace) - 1}',
        '',
        'generation,max_fitness,mean_fitness,best_fitness,n_selection,n_crossover,n_mutation',
    ])
    for row in report.ga_history:
        lines.append(','.join(
            [str(row.generation), repr(row.max_fitness),
             repr(row.mean_fitness), repr(row.best_fitness)] +
            [str(value) for value in row.plan.as_tuple()]))
    return '\n'.join(lines) + '\n'


def write_report(report, path):
    write_text(path, format_report(report))
    LOGGER.info('Design report written to %s', path)
