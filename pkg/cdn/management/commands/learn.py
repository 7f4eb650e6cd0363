import numpy as np
from django.core.management.base import BaseCommand, CommandError

from cdn.services.errors import CdnError, DidNotConverge
from cdn.services.experiments import erase_at_random
from cdn.services.learning import METHODS, fit
from cdn.services.model import model_to_dict
from cdn.services.model_io import load_model, read_data_csv, write_json
from cdn.services.optimizers import OptimizerConfig
from cdn_lab.version import VERSION
from cdn_schema.schemas import LEARNED_MODEL_SCHEMA, check_schema


def learned_model_dict(report):
    data = model_to_dict(report.model)
    data['report'] = report.to_dict(version=VERSION)
    check_schema(data, LEARNED_MODEL_SCHEMA)
    return data


class Command(BaseCommand):
    help = 'Learn margins and copula parameters of a model from a data CSV'

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True, help='Model JSON giving the structure and starting margins')
        parser.add_argument('--data', required=True, help='CSV with a header of variable names')
        parser.add_argument('--method', default='lbfgs-restart', choices=METHODS)
        parser.add_argument('--eps', type=float, default=1e-8)
        parser.add_argument('--max-iter', type=int, default=100)
        parser.add_argument('--restarts', type=int, default=3, help='Random starting points')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--missing-frac', type=float, default=0.0,
                            help='Erase this fraction of entries at random before learning')
        parser.add_argument('--keep-margins', action='store_true',
                            help='Keep the model margins instead of fitting them')
        parser.add_argument('--out', required=True, help='Path for the learned-model JSON')

    def handle(self, *args, **options):
        converged = True
        try:
            model = load_model(options['model'])
            data, censored = read_data_csv(options['data'], model)
            if options['missing_frac'] > 0:
                rng = np.random.default_rng(options['seed'])
                data = erase_at_random(data, options['missing_frac'], rng)
                self.stdout.write(self.style.WARNING(
                    f'Erased {int(np.isnan(data).sum())} of {data.size} entries at random'
                ))
            config = OptimizerConfig(
                epsilon=options['eps'], max_iter=options['max_iter'],
                restarts=options['restarts'], seed=options['seed'],
            )
            try:
                report = fit(model, data, options['method'], config, censored,
                             fit_marginals=not options['keep_margins'])
            except DidNotConverge as exc:
                report = exc.report
                converged = False
            write_json(learned_model_dict(report), options['out'])
        except CdnError as exc:
            raise CommandError(str(exc)) from exc

        if not converged:
            raise CommandError(
                f'{options["method"]} did not converge ({report.reason}, {report.iterations} iterations); '
                f'partial result written to {options["out"]}'
            )
        self.stdout.write(self.style.SUCCESS(
            f'{options["method"]}: energy {report.energy!r} after {report.iterations} iterations '
            f'({report.reason}); wrote {options["out"]}'
        ))
