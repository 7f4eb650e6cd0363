"""
Desk-scale experiment harness.

Each experiment expands its YAML ranges into a list of tasks, one per
(configuration, trial), gives every task its own child seed spawned from the
master seed in task order, runs the tasks on a thread pool capped by
settings.CDN['THREADS'] and writes one CSV row per task, sorted by the
experiment's key columns.

    inference   per-sample density time in log and linear arithmetic
    learning    parameter MSE and iteration counts per learning method
    mcar        learning with a fraction of entries erased at random
    piecewise   piecewise learning against full-likelihood L-BFGS
    limitation  end-pixel agreement of a 3-chain and a 3-loop fitted to two classes
"""

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path

import numpy as np
import yaml
from django.conf import settings

from .archetypes import ArchetypeSpec, generate
from .cliquetree import treewidth
from .errors import CdnError, DidNotConverge, InvalidSpec
from .inference import ARITHMETIC, density
from .learning import EnergyEvaluator, fit
from .optimizers import OptimizerConfig
from .piecewise import subproblem_treewidths
from .sampling import sample_cdn

logger = logging.getLogger(__name__)

EXPERIMENTS = ('inference', 'learning', 'mcar', 'piecewise', 'limitation')

_LEARNING_COLUMNS = [
    'family', 'n', 'copula', 'samples', 'method', 'trial', 'mse', 'energy', 'iterations',
    'restarts', 'converged', 'reason', 'treewidth', 'seconds',
]

COLUMNS = {
    'inference': [
        'family', 'n', 'copula', 'arithmetic', 'trial', 'points', 'repetitions',
        'mean_seconds', 'std_seconds',
    ],
    'learning': _LEARNING_COLUMNS,
    'mcar': [
        'family', 'n', 'copula', 'samples', 'missing_frac', 'method', 'trial', 'mse', 'energy',
        'iterations', 'restarts', 'converged', 'reason', 'seconds',
    ],
    'piecewise': _LEARNING_COLUMNS,
    'limitation': [
        'family', 'n', 'samples', 'trial', 'params', 'energy', 'converged', 'reason',
        'end_agreement', 'class_rate',
    ],
}

KEYS = {
    'inference': ('family', 'n', 'copula', 'arithmetic', 'trial'),
    'learning': ('family', 'n', 'copula', 'samples', 'method', 'trial'),
    'mcar': ('family', 'n', 'copula', 'samples', 'missing_frac', 'method', 'trial'),
    'piecewise': ('family', 'n', 'copula', 'samples', 'method', 'trial'),
    'limitation': ('family', 'n', 'samples', 'trial'),
}

LIMITATION_CLASSES = np.array([[-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]])


# --- ranges ---

def load_ranges(path=None):
    """Experiment ranges from YAML; path defaults to settings.CDN['EXPERIMENT_RANGES']."""
    path = Path(path or settings.CDN['EXPERIMENT_RANGES'])
    try:
        with path.open(encoding='utf-8') as fh:
            ranges = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise InvalidSpec(f'cannot read experiment ranges {path}: {exc}') from exc
    except yaml.YAMLError as exc:
        raise InvalidSpec(f'invalid YAML in experiment ranges {path}: {exc}') from exc
    if not isinstance(ranges, dict):
        raise InvalidSpec(f'experiment ranges {path} must be a mapping of experiment names')
    return ranges


def _section(ranges, name):
    section = ranges.get(name)
    if not isinstance(section, dict):
        raise InvalidSpec(f'experiment ranges have no {name!r} section')
    return section


def _structures(section, families=None, copulas=None, sizes=None):
    """(family, n, copula) triples of a section, optionally restricted."""
    by_family = section.get('families') or {}
    kinds = section.get('copulas') or ['normal']
    out = []
    for family, ns in by_family.items():
        if families and family not in families:
            continue
        for n in ns:
            if sizes and int(n) not in sizes:
                continue
            for copula in kinds:
                if copulas and copula not in copulas:
                    continue
                # validates family, size and copula name up front
                ArchetypeSpec(family, n, copula)
                out.append((family, int(n), copula))
    if not out:
        raise InvalidSpec('no model structures left after applying the family, size and copula filters')
    return out


def _config(section, seed):
    return OptimizerConfig(
        epsilon=section.get('epsilon', 1e-8),
        max_iter=section.get('max_iter', 100),
        restarts=section.get('restarts', 1),
        seed=seed,
    )


# --- shared helpers ---

def erase_at_random(data, fraction, rng):
    """Copy of data with each entry replaced by NaN with probability fraction."""
    if not 0.0 <= fraction < 1.0:
        raise InvalidSpec(f'missing fraction must be in [0, 1), got {fraction}')
    data = np.array(data, dtype=float)
    data[rng.random(data.shape) < fraction] = np.nan
    return data


def parameter_mse(true_model, report):
    return float(np.mean((report.theta_hat - true_model.params()) ** 2))


def _learn(model, data, method, config):
    start = time.perf_counter()
    try:
        report = fit(model, data, method, config)
    except DidNotConverge as exc:
        report = exc.report
        logger.warning('%s did not converge (%s); recording the partial run', method, report.reason)
    return report, time.perf_counter() - start


def _learning_row(true_model, report, seconds):
    return {
        'mse': parameter_mse(true_model, report),
        'energy': report.energy,
        'iterations': report.iterations,
        'restarts': report.restarts,
        'converged': report.converged,
        'reason': report.reason,
        'seconds': seconds,
    }


# --- trials ---

def inference_trial(task, seed):
    family, n, copula = task['structure']
    rng = np.random.default_rng(seed)
    model = generate(ArchetypeSpec(family, n, copula), rng)
    points = rng.standard_normal((task['points'], model.n))
    rows = []
    for arithmetic in ('linear', 'log'):
        backend = ARITHMETIC[arithmetic]
        per_sample = np.empty(task['repetitions'])
        for r in range(task['repetitions']):
            start = time.perf_counter()
            for x in points:
                density(model, x, arithmetic=backend)
            per_sample[r] = (time.perf_counter() - start) / len(points)
        rows.append({
            'family': family, 'n': n, 'copula': copula, 'arithmetic': arithmetic,
            'trial': task['trial'], 'points': len(points), 'repetitions': task['repetitions'],
            'mean_seconds': float(per_sample.mean()), 'std_seconds': float(per_sample.std()),
        })
    return rows


def learning_trial(task, seed):
    family, n, copula = task['structure']
    data_seed, fit_seed = seed.spawn(2)
    rng = np.random.default_rng(data_seed)
    true_model = generate(ArchetypeSpec(family, n, copula), rng)
    data = sample_cdn(true_model, count=task['samples'], seed=rng)
    config = _config(task['section'], fit_seed)

    rows = []
    for method in task['methods']:
        report, seconds = _learn(true_model, data, method, config)
        evaluator = EnergyEvaluator(true_model, data)
        if method == 'piecewise':
            width = max(subproblem_treewidths(evaluator).values())
        else:
            width = treewidth(evaluator.tree)
        rows.append({
            'family': family, 'n': n, 'copula': copula, 'samples': task['samples'],
            'method': method, 'trial': task['trial'], 'treewidth': width,
            **_learning_row(true_model, report, seconds),
        })
    return rows


def mcar_trial(task, seed):
    family, n, copula = task['structure']
    data_seed, erase_seed, fit_seed = seed.spawn(3)
    rng = np.random.default_rng(data_seed)
    true_model = generate(ArchetypeSpec(family, n, copula), rng)
    complete = sample_cdn(true_model, count=task['samples'], seed=rng)
    erase_rng = np.random.default_rng(erase_seed)

    rows = []
    method = task['method']
    for fraction in task['fractions']:
        data = erase_at_random(complete, fraction, erase_rng)
        config = _config(task['section'], fit_seed)
        report, seconds = _learn(true_model, data, method, config)
        rows.append({
            'family': family, 'n': n, 'copula': copula, 'samples': task['samples'],
            'missing_frac': fraction, 'method': method, 'trial': task['trial'],
            **_learning_row(true_model, report, seconds),
        })
    return rows


def limitation_trial(task, seed):
    family = task['family']
    model_seed, fit_seed, sample_seed = seed.spawn(3)
    model = generate(ArchetypeSpec(family, 3, 'normal'), model_seed)
    config = _config(task['section'], fit_seed)
    report, _ = _learn(model, LIMITATION_CLASSES, 'lbfgs-restart', config)

    samples = sample_cdn(report.model, count=task['samples'], seed=sample_seed)
    pixels = samples > 0
    end_agreement = float(np.mean(pixels[:, 0] == pixels[:, 2]))
    class_rate = float(np.mean(pixels.all(axis=1) | (~pixels).all(axis=1)))
    logger.info('limitation %s: end agreement %.3f, class rate %.3f', family, end_agreement, class_rate)
    return [{
        'family': family, 'n': 3, 'samples': task['samples'], 'trial': task['trial'],
        'params': ' '.join(repr(float(p)) for p in report.theta_hat),
        'energy': report.energy, 'converged': report.converged, 'reason': report.reason,
        'end_agreement': end_agreement, 'class_rate': class_rate,
    }]


# --- task expansion ---

def _tasks(name, ranges, trials, families, copulas, sizes):
    section = _section(ranges, name)
    tasks = []
    if name == 'limitation':
        if sizes and 3 not in sizes:
            raise InvalidSpec('the limitation experiment only runs 3-variable models')
        for family in section.get('families', ['chain', 'loop']):
            if families and family not in families:
                continue
            if family not in ('chain', 'loop'):
                raise InvalidSpec(f'the limitation experiment compares chain and loop, not {family!r}')
            for trial in range(trials):
                tasks.append({'family': family, 'samples': section.get('samples', 2000),
                              'trial': trial, 'section': section})
        return tasks, limitation_trial

    structures = _structures(section, families, copulas, sizes)
    if name == 'inference':
        for structure in structures:
            for trial in range(trials):
                tasks.append({'structure': structure, 'trial': trial,
                              'points': section.get('points', 20),
                              'repetitions': section.get('repetitions', 30)})
        return tasks, inference_trial

    for structure in structures:
        for samples in section.get('samples', [1000]):
            for trial in range(trials):
                task = {'structure': structure, 'samples': int(samples), 'trial': trial,
                        'section': section}
                if name == 'mcar':
                    task['fractions'] = [float(f) for f in section.get('fractions', [0.0])]
                    task['method'] = section.get('method', 'lbfgs-restart')
                elif name == 'piecewise':
                    task['methods'] = section.get('methods', ['piecewise', 'lbfgs-restart'])
                else:
                    task['methods'] = section.get('methods', ['gd', 'lbfgs-restart', 'lbfgs-barrier'])
                tasks.append(task)
    return tasks, mcar_trial if name == 'mcar' else learning_trial


def run_experiment(name, ranges=None, trials=1, seed=0, out=None, families=None, copulas=None,
                   sizes=None):
    """
    Run one experiment and return its rows in sorted order; with out set the
    rows are also written as CSV. families, copulas and sizes restrict the
    structures taken from the ranges.
    """
    if name not in EXPERIMENTS:
        raise InvalidSpec(f'unknown experiment {name!r}; choose from {", ".join(EXPERIMENTS)}')
    if int(trials) < 1:
        raise InvalidSpec(f'trials must be at least 1, got {trials}')
    ranges = ranges if isinstance(ranges, dict) else load_ranges(ranges)
    sizes = {int(n) for n in sizes} if sizes else None
    tasks, trial_fn = _tasks(name, ranges, int(trials), families, copulas, sizes)
    seeds = np.random.SeedSequence(seed).spawn(len(tasks))
    workers = max(1, int(settings.CDN.get('THREADS', 1)))
    logger.info('Running %s: %d tasks on %d worker(s)', name, len(tasks), workers)

    rows = []
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(trial_fn, task, s): task for task, s in zip(tasks, seeds)}
        for future in as_completed(futures):
            try:
                rows.extend(future.result())
            except CdnError:
                logger.error('Task %r failed', {k: v for k, v in futures[future].items() if k != 'section'})
                raise

    rows.sort(key=lambda row: tuple(row[k] for k in KEYS[name]))
    if out is not None:
        write_csv(rows, COLUMNS[name], out)
    return rows


def write_csv(rows, columns, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', encoding='utf-8', newline='') as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator='\n')
            writer.writeheader()
            for row in rows:
                writer.writerow({k: row.get(k, '') for k in columns})
    except OSError as exc:
        raise InvalidSpec(f'cannot write {path}: {exc}') from exc
    logger.info('Wrote %d rows to %s', len(rows), path)
