"""End-to-end runs of the management commands on temporary files."""

import csv
import json
import math
from io import StringIO
from unittest.mock import patch

import pytest
from django.apps import apps
from django.core.management import call_command
from django.core.management.base import CommandError

from cdn.services.margins import std_normal_cdf
from cdn.services.model_io import load_model, save_model

from .oracles import joint_cdf


def run(*args):
    out = StringIO()
    call_command(*args, stdout=out)
    return out.getvalue()


def logged_value(output):
    """The log= field of a query line."""
    field = next(part for part in output.split() if part.startswith('log='))
    return float(field[len('log='):])


@pytest.fixture
def pair_file(tmp_path):
    path = tmp_path / 'pair.json'
    run('generate', '--family', 'chain', '--n', '2', '--param', '0.6', '--out', str(path))
    return path


class TestGenerate:
    def test_writes_a_loadable_model(self, tmp_path):
        path = tmp_path / 'grid.json'
        output = run('generate', '--family', 'grid', '--n', '3', '--copula', 'clayton', '--seed', '4',
                     '--out', str(path))
        model = load_model(path)
        assert model.n == 9 and len(model.factors) == 12
        assert '9 variables' in output

    def test_rejects_a_bad_size(self, tmp_path):
        with pytest.raises(CommandError, match='n >= 3'):
            run('generate', '--family', 'loop', '--n', '2', '--out', str(tmp_path / 'x.json'))


class TestQuery:
    def test_full_cdf(self, pair_file):
        output = run('query', '--model', str(pair_file), '--type', 'full-cdf', '--at', 'X1=0', 'X2=0')
        expected = 0.25 + math.asin(0.6) / (2 * math.pi)
        assert math.exp(logged_value(output)) == pytest.approx(expected, rel=1e-9)
        assert output.startswith('full-cdf log=')

    def test_marginal_cdf(self, pair_file):
        output = run('query', '--model', str(pair_file), '--type', 'marginal-cdf', '--at', 'X2=0')
        assert math.exp(logged_value(output)) == pytest.approx(0.5)

    def test_linear_matches_log(self, pair_file):
        args = ('query', '--model', str(pair_file), '--type', 'density', '--at', 'X1=0.3', 'X2=-0.4')
        assert logged_value(run(*args, '--linear')) == pytest.approx(logged_value(run(*args)), rel=1e-10)

    def test_conditional_density(self, pair_file):
        output = run('query', '--model', str(pair_file), '--type', 'conditional-density',
                     '--at', 'X1=0.1', '--given', 'X2=-0.8')
        expected = -0.5 * math.log(2 * math.pi * 0.64) - (0.1 + 0.48) ** 2 / (2 * 0.64)
        assert logged_value(output) == pytest.approx(expected, rel=1e-9)

    def test_cdf_given_cdf(self, pair_file):
        output = run('query', '--model', str(pair_file), '--type', 'cdf-given-cdf',
                     '--at', 'X1=0.3', '--given', 'X2=-0.5')
        expected = joint_cdf(load_model(pair_file), [std_normal_cdf(0.3), std_normal_cdf(-0.5)])[0]
        expected /= std_normal_cdf(-0.5)
        assert math.exp(logged_value(output)) == pytest.approx(expected, rel=1e-9)
        assert output.startswith('cdf-given-cdf log=')

    def test_mixed_with_bound(self, pair_file):
        output = run('query', '--model', str(pair_file), '--type', 'mixed',
                     '--at', 'X1=0.2', '--bound', 'X2=0.5')
        assert logged_value(output) < 0

    def test_dump_tree(self, pair_file, tmp_path):
        dump = tmp_path / 'tree.json'
        run('query', '--model', str(pair_file), '--type', 'marginal-density', '--at', 'X1=0',
            '--dump-tree', str(dump))
        assert json.loads(dump.read_text(encoding='utf-8'))['treewidth'] == 1

    def test_pmf(self, tmp_path, discrete_pair):
        path = tmp_path / 'discrete.json'
        save_model(discrete_pair, path)
        output = run('query', '--model', str(path), '--type', 'pmf', '--at', 'A=1', 'B=2')
        assert 0 < math.exp(logged_value(output)) < 1

    @pytest.mark.parametrize('extra,message', [
        (['--type', 'density', '--at', 'X1=0'], 'every variable'),
        (['--type', 'density', '--at', 'X1=0', 'X2=0', '--given', 'X2=1'], 'does not take'),
        (['--type', 'conditional-cdf', '--at', 'X1=0'], 'needs --given'),
        (['--type', 'marginal-cdf', '--at', 'X1=0', '--bound', 'X2=1'], 'only used by mixed'),
        (['--type', 'marginal-cdf', '--at', 'X9=0'], 'X9'),
        (['--type', 'conditional-cdf', '--at', 'X1=0', '--given', 'X1=1'], 'both'),
    ], ids=['incomplete', 'given', 'no-given', 'bound', 'unknown', 'overlap'])
    def test_rejected(self, pair_file, extra, message):
        with pytest.raises(CommandError, match=message):
            run('query', '--model', str(pair_file), *extra)


class TestSample:
    def test_writes_samples(self, pair_file, tmp_path):
        out = tmp_path / 'samples.csv'
        run('sample', '--model', str(pair_file), '--count', '15', '--seed', '2', '--out', str(out))
        with out.open(encoding='utf-8', newline='') as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 15
        assert list(rows[0]) == ['X1', 'X2']

    def test_observed_column_is_constant(self, pair_file, tmp_path):
        out = tmp_path / 'conditional.csv'
        output = run('sample', '--model', str(pair_file), '--count', '5', '--observe', 'X2=1.5',
                     '--out', str(out))
        with out.open(encoding='utf-8', newline='') as fh:
            assert {row['X2'] for row in csv.DictReader(fh)} == {'1.5'}
        assert 'given X2' in output

    def test_rejects_zero_count(self, pair_file, tmp_path):
        with pytest.raises(CommandError, match='--count'):
            run('sample', '--model', str(pair_file), '--count', '0', '--out', str(tmp_path / 's.csv'))


class TestLearn:
    @pytest.fixture
    def data_file(self, pair_file, tmp_path):
        path = tmp_path / 'data.csv'
        run('sample', '--model', str(pair_file), '--count', '200', '--seed', '9', '--out', str(path))
        return path

    def test_writes_a_learned_model(self, pair_file, data_file, tmp_path):
        out = tmp_path / 'learned.json'
        output = run('learn', '--model', str(pair_file), '--data', str(data_file), '--restarts', '1',
                     '--out', str(out))
        learned = json.loads(out.read_text(encoding='utf-8'))
        assert learned['report']['converged'] is True
        assert learned['report']['method'] == 'lbfgs-restart'
        assert 'version' in learned['report']
        assert load_model(out).factors[0].param == pytest.approx(0.6, abs=0.15)
        assert 'energy' in output

    def test_missing_fraction(self, pair_file, data_file, tmp_path):
        output = run('learn', '--model', str(pair_file), '--data', str(data_file), '--restarts', '1',
                     '--missing-frac', '0.2', '--out', str(tmp_path / 'learned.json'))
        assert 'Erased' in output

    def test_iteration_cap_still_writes(self, pair_file, data_file, tmp_path):
        out = tmp_path / 'partial.json'
        with pytest.raises(CommandError, match='partial result'):
            run('learn', '--model', str(pair_file), '--data', str(data_file), '--method', 'gd',
                '--max-iter', '1', '--eps', '1e-15', '--restarts', '1', '--out', str(out))
        assert json.loads(out.read_text(encoding='utf-8'))['report']['converged'] is False

    @patch('cdn.services.optimizers.backtracking', return_value=None)
    def test_failed_line_search_still_writes(self, mock_backtracking, pair_file, data_file, tmp_path):
        out = tmp_path / 'partial.json'
        with pytest.raises(CommandError, match='line_search_exhausted.*partial result'):
            run('learn', '--model', str(pair_file), '--data', str(data_file), '--restarts', '1',
                '--out', str(out))
        report = json.loads(out.read_text(encoding='utf-8'))['report']
        assert report['converged'] is False
        assert report['reason'] == 'line_search_exhausted'
        mock_backtracking.assert_called()


class TestExperiment:
    def test_writes_csv(self, tmp_path):
        ranges = tmp_path / 'ranges.yaml'
        ranges.write_text(
            'inference:\n  families:\n    chain: [2]\n  copulas: [normal]\n  points: 2\n  repetitions: 1\n',
            encoding='utf-8',
        )
        out = tmp_path / 'inference.csv'
        output = run('experiment', 'inference', '--ranges', str(ranges), '--out', str(out))
        with out.open(encoding='utf-8', newline='') as fh:
            assert len(list(csv.DictReader(fh))) == 2
        assert 'Wrote 2 rows' in output

    def test_size_override(self, tmp_path):
        ranges = tmp_path / 'ranges.yaml'
        ranges.write_text(
            'inference:\n  families:\n    chain: [2, 3]\n  copulas: [normal]\n  points: 2\n  repetitions: 1\n',
            encoding='utf-8',
        )
        out = tmp_path / 'inference.csv'
        run('experiment', 'inference', '--ranges', str(ranges), '--n', '3', '--out', str(out))
        with out.open(encoding='utf-8', newline='') as fh:
            assert {row['n'] for row in csv.DictReader(fh)} == {'3'}

    def test_bad_ranges(self, tmp_path):
        with pytest.raises(CommandError, match='cannot read'):
            run('experiment', 'learning', '--ranges', str(tmp_path / 'none.yaml'),
                '--out', str(tmp_path / 'x.csv'))


class TestSettings:
    def test_no_database_is_configured(self, settings):
        engines = {db.get('ENGINE', 'django.db.backends.dummy') for db in settings.DATABASES.values()}
        assert engines <= {'django.db.backends.dummy'}

    def test_app_has_no_models(self):
        assert list(apps.get_app_config('cdn').get_models()) == []
