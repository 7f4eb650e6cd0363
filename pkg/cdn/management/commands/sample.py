from django.core.management.base import BaseCommand, CommandError

from cdn.services.errors import CdnError
from cdn.services.model_io import load_model, parse_assignments, write_samples_csv
from cdn.services.sampling import sample_cdn, sample_conditional


class Command(BaseCommand):
    help = 'Draw samples from a model by the conditional method and write them as CSV'

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True, help='Path to model JSON')
        parser.add_argument('--count', type=int, default=1000)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--observe', nargs='+', default=[], metavar='NAME=VALUE',
                            help='Condition on observed values; unlisted variables are sampled')
        parser.add_argument('--out', required=True, help='Path for the sample CSV')

    def handle(self, *args, **options):
        if options['count'] < 1:
            raise CommandError('--count must be at least 1')
        try:
            model = load_model(options['model'])
            observed = parse_assignments(options['observe'], model)
            if observed:
                samples = sample_conditional(model, observed, count=options['count'], seed=options['seed'])
            else:
                samples = sample_cdn(model, count=options['count'], seed=options['seed'])
            write_samples_csv(samples, model.names, options['out'])
        except CdnError as exc:
            raise CommandError(str(exc)) from exc

        note = f' given {", ".join(observed)}' if observed else ''
        self.stdout.write(self.style.SUCCESS(f'Wrote {options["count"]} samples{note} to {options["out"]}'))
