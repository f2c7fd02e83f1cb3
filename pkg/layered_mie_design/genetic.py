"""
Genetic algorithm over quantised shell thicknesses with surrogate fitness.

The number of individuals copied forward each generation adapts to how close
the population is to the fitness threshold: few while the population is poor
(exploration by crossover and mutation), more as it approaches the target.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from layered_mie_design.common import GENE_ALPHABET
from layered_mie_design.oracle import Spectrum
from layered_mie_design.surrogate import forward

LOGGER = logging.getLogger(__name__)

SSE_FLOOR = 1e-9
FITNESS_SCALE = 1000.0
MODE_ADAPTIVE = 'adaptive'
MODE_LITERAL = 'literal'
MODE_FIXED = 'fixed'
# Largest search space exhaustive_search will enumerate
MAX_ENUMERATION = 4**10


def parse_selection_mode(mode):
    """
    Split a selection mode string into ``(kind, fixed count)``

    ``adaptive`` and ``literal`` have no count, ``fixed:<N>`` does.
    """
    if mode in (MODE_ADAPTIVE, MODE_LITERAL):
        return mode, None
    if mode.startswith(MODE_FIXED + ':'):
        try:
            count = int(mode.split(':', 1)[1])
        except ValueError:
            raise ValueError(f"Invalid fixed selection mode '{mode}'")
        if count < 0:
            raise ValueError(f"Fixed selection must be nonnegative: '{mode}'")
        return MODE_FIXED, count
    raise ValueError(
        f"Selection mode must be 'adaptive', 'literal' or 'fixed:<N>', got '{mode}'"
    )


@dataclass(frozen=True)
class GaConfig:
    """Settings of :func:`run_ga`"""
    population_size: int = 100
    t_value: float = 1e6
    max_generations: int = 200
    selection_cap: int = 90
    crossover_fraction: float = 0.7
    selection_mode: str = MODE_ADAPTIVE
    elitism: bool = True
    seed: int = 0
    alphabet: tuple = GENE_ALPHABET

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError('population_size must be at least 2')
        if not self.t_value > 0:
            raise ValueError(f't_value must be positive, got {self.t_value}')
        if self.max_generations < 1:
            raise ValueError('max_generations must be at least 1')
        if not 0 <= self.selection_cap < self.population_size:
            raise ValueError(
                'selection_cap must be nonnegative and below population_size')
        if not 0.0 <= self.crossover_fraction <= 1.0:
            raise ValueError('crossover_fraction must lie in [0, 1]')
        if len(self.alphabet) < 1:
            raise ValueError('alphabet must not be empty')
        kind, count = parse_selection_mode(self.selection_mode)
        if kind == MODE_FIXED and count > self.selection_cap:
            raise ValueError(
                f'Fixed selection {count} exceeds the cap {self.selection_cap}')
        object.__setattr__(self, 'alphabet',
                           tuple(float(value) for value in self.alphabet))


@dataclass(frozen=True)
class GenerationPlan:
    """How the next population is assembled"""
    n_selection: int
    n_crossover: int
    n_mutation: int

    @property
    def total(self):
        return self.n_selection + self.n_crossover + self.n_mutation

    def as_tuple(self):
        return (self.n_selection, self.n_crossover, self.n_mutation)


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    max_fitness: float
    mean_fitness: float
    best_fitness: float
    plan: GenerationPlan


@dataclass
class GaResult:
    best: tuple
    best_fitness: float
    threshold_reached: bool
    history: list = field(default_factory=list, repr=False)

    @property
    def generations(self):
        return len(self.history)


def _round_half_up(value):
    return int(math.floor(value + 0.5))


def normalized_target(model, target):
    """Target spectrum in the normalised output units of ``model``"""
    values = target.values if isinstance(target, Spectrum) else target
    values = np.asarray(values, dtype=float).ravel()
    if values.size != model.architecture.output_dim:
        raise ValueError(
            f'Target has {values.size} points, the model predicts '
            f'{model.architecture.output_dim}')
    if model.normalizer is None:
        return values
    return model.normalizer.apply_output(values)


def fitness_from_sse(sse, n_points):
    """1000 n / max(SSE, 1e-9)"""
    return FITNESS_SCALE * n_points / np.maximum(sse, SSE_FLOOR)


def population_fitness(population, target_normalized, model):
    """Fitness of every row of ``population`` against a normalised target"""
    population = np.atleast_2d(np.asarray(population, dtype=float))
    inputs = population
    if model.normalizer is not None:
        inputs = model.normalizer.apply_input(population)
    pred = forward(model, inputs)
    sse = np.sum((pred - target_normalized)**2, axis=1)
    return fitness_from_sse(sse, target_normalized.size)


def fitness(individual, target, model):
    """
    Fitness of one individual: 1000 n / SSE of the surrogate prediction
    against the target, both in normalised units
    """
    target_normalized = normalized_target(model, target)
    return float(population_fitness([individual], target_normalized,
                                     model)[0])


def plan_generation(fitness_values, config):
    """
    Split the next population into selected, crossed-over and mutated
    individuals

    :param fitness_values: fitness of the current population
    :param config: the :class:`GaConfig`
    """
    values = np.asarray(fitness_values, dtype=float)
    if values.size == 0:
        raise ValueError('Cannot plan from an empty fitness vector')
    size = config.population_size
    kind, fixed = parse_selection_mode(config.selection_mode)
    if kind == MODE_FIXED:
        n_selection = fixed
    else:
        if kind == MODE_ADAPTIVE:
            raw = size * values.mean() / config.t_value
        else:
            raw = values.max() / config.t_value * values.mean()
        n_selection = config.selection_cap if raw >= config.selection_cap \
            else _round_half_up(raw)
    n_selection = min(config.selection_cap, n_selection)
    n_crossover = _round_half_up(config.crossover_fraction *
                                 (size - n_selection))
    n_mutation = size - n_selection - n_crossover
    return GenerationPlan(n_selection, n_crossover, n_mutation)


def roulette_indices(fitness_values, count, rng, elitism=True):
    """
    Indices drawn with replacement, probability proportional to fitness.

    With elitism the index of the fittest individual comes first and only
    ``count - 1`` are drawn.
    """
    values = np.asarray(fitness_values, dtype=float)
    if count < 0 or (count > 0 and values.size == 0):
        raise ValueError(f'Cannot select {count} from {values.size} individuals')
    if count == 0:
        return np.zeros(0, dtype=int)
    chosen = []
    if elitism:
        chosen.append(int(np.argmax(values)))
    draws = count - len(chosen)
    if draws:
        chosen.extend(
            rng.choice(values.size, size=draws, p=values / values.sum()))
    return np.asarray(chosen, dtype=int)


def roulette_select(population, fitness_values, count, rng, elitism=True):
    """Roulette wheel selection of ``count`` individuals"""
    population = np.asarray(population, dtype=float)
    return population[roulette_indices(fitness_values, count, rng, elitism)]


def single_point(parent_a, parent_b, cut):
    """Genes of ``parent_a`` before ``cut``, of ``parent_b`` from ``cut``"""
    return np.concatenate([parent_a[:cut], parent_b[cut:]])


def crossover(parents, count, rng):
    """
    ``count`` offspring, each from two distinct parents with a uniform cut
    in [1, num_layers - 1]
    """
    parents = np.asarray(parents, dtype=float)
    if count == 0:
        return np.zeros((0, parents.shape[-1] if parents.ndim == 2 else 0))
    if len(parents) < 2:
        raise ValueError('crossover needs at least two parents')
    num_layers = parents.shape[1]
    offspring = []
    for _ in range(count):
        first, second = rng.choice(len(parents), size=2, replace=False)
        cut = int(rng.integers(1, num_layers)) if num_layers > 1 else 1
        offspring.append(single_point(parents[first], parents[second], cut))
    return np.array(offspring)


def mutation(count, num_layers, rng, alphabet=GENE_ALPHABET):
    """``count`` fresh individuals drawn uniformly over the alphabet"""
    return rng.choice(np.asarray(alphabet, dtype=float),
                      size=(count, num_layers))


def random_population(size, num_layers, rng, alphabet=GENE_ALPHABET):
    return mutation(size, num_layers, rng, alphabet)


def exhaustive_search(target, model, num_layers=None, alphabet=GENE_ALPHABET):
    """
    Enumerate the whole quantised design space

    :returns: tuple ``(best individual, best fitness)``
    """
    num_layers = num_layers or model.architecture.input_dim
    if len(alphabet)**num_layers > MAX_ENUMERATION:
        raise ValueError(
            f'{len(alphabet)}^{num_layers} candidates are too many to enumerate')
    target_normalized = normalized_target(model, target)
    candidates = np.array(list(itertools.product(alphabet, repeat=num_layers)),
                          dtype=float)
    values = population_fitness(candidates, target_normalized, model)
    best = int(np.argmax(values))
    return tuple(candidates[best]), float(values[best])


def _next_population(population, values, plan, config, rng):
    """
    Assemble the next generation and the cached fitness of its survivors

    :returns: tuple (population, fitness with NaN for new individuals)
    """
    num_layers = population.shape[1]
    selected = roulette_indices(values, plan.n_selection, rng, config.elitism)
    pool = population[roulette_indices(values, config.population_size, rng,
                                       elitism=False)]
    children = crossover(pool, plan.n_crossover, rng).reshape(-1, num_layers)
    mutants = mutation(plan.n_mutation, num_layers, rng, config.alphabet)
    new_population = np.concatenate(
        [population[selected], children, mutants], axis=0)
    cached = np.concatenate(
        [values[selected],
         np.full(len(children) + len(mutants), np.nan)])
    return new_population, cached


def run_ga(target, model, config=GaConfig(), initial_population=None):
    """
    Search the quantised design space for the stack whose surrogate spectrum
    best matches ``target``

    Stops once the best fitness reaches ``config.t_value`` or after
    ``config.max_generations`` generations.

    :param target: :class:`Spectrum` or array in the model's raw units
    :param initial_population: optional (population_size, num_layers) array
    :returns: a :class:`GaResult` with the all-time best individual
    """
    rng = np.random.default_rng(config.seed)
    num_layers = model.architecture.input_dim
    target_normalized = normalized_target(model, target)

    if initial_population is None:
        population = random_population(config.population_size, num_layers,
                                       rng, config.alphabet)
    else:
        population = np.array(initial_population, dtype=float)
        if population.shape != (config.population_size, num_layers):
            raise ValueError(
                f'Initial population of shape {population.shape} does not '
                f'match ({config.population_size}, {num_layers})')
    cached = np.full(len(population), np.nan)

    best = None
    best_fitness = -math.inf
    history = []
    for generation in range(1, config.max_generations + 1):
        values = cached.copy()
        missing = np.isnan(values)
        if np.any(missing):
            values[missing] = population_fitness(population[missing],
                                                 target_normalized, model)
        top = int(np.argmax(values))
        if values[top] > best_fitness:
            best_fitness = float(values[top])
            best = tuple(population[top])

        plan = plan_generation(values, config)
        if config.elitism and plan.n_selection == 0:
            if plan.n_mutation > 0:
                plan = GenerationPlan(1, plan.n_crossover, plan.n_mutation - 1)
            else:
                plan = GenerationPlan(1, plan.n_crossover - 1, plan.n_mutation)
        history.append(
            GenerationRecord(generation, float(values.max()),
                             float(values.mean()), best_fitness, plan))
        LOGGER.debug('Generation %d: max %.6g, mean %.6g, best %.6g, plan %s',
                     generation, values.max(), values.mean(), best_fitness,
                     plan.as_tuple())

        if best_fitness >= config.t_value:
            LOGGER.info('Fitness threshold %.6g reached at generation %d',
                        config.t_value, generation)
            break
        if generation == config.max_generations:
            LOGGER.warning(
                'Fitness threshold %.6g not reached after %d generations '
                '(best %.6g)', config.t_value, generation, best_fitness)
            break
        population, cached = _next_population(population, values, plan,
                                              config, rng)

    return GaResult(best, best_fitness, best_fitness >= config.t_value,
                    history)
