from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from cdn.services.archetypes import COPULA_KINDS, FAMILIES
from cdn.services.errors import CdnError
from cdn.services.experiments import EXPERIMENTS, run_experiment


class Command(BaseCommand):
    help = 'Run an inference, learning, mcar, piecewise or limitation experiment and write CSV'

    def add_arguments(self, parser):
        parser.add_argument('name', choices=EXPERIMENTS)
        parser.add_argument('--trials', type=int, default=1)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--out', required=True, help='Path for the result CSV')
        parser.add_argument('--family', nargs='+', choices=FAMILIES, help='Restrict to these families')
        parser.add_argument('--copula', nargs='+', choices=sorted(COPULA_KINDS), help='Restrict to these copulas')
        parser.add_argument('--n', nargs='+', type=int, dest='sizes', metavar='N',
                            help='Restrict to these model sizes')
        parser.add_argument('--ranges', help='YAML ranges (default: settings.CDN["EXPERIMENT_RANGES"])')

    def handle(self, *args, **options):
        name = options['name']
        self.stdout.write(
            f'Running {name} experiment ({options["trials"]} trial(s), '
            f'{settings.CDN["THREADS"]} worker(s))...'
        )
        try:
            rows = run_experiment(
                name,
                ranges=options['ranges'],
                trials=options['trials'],
                seed=options['seed'],
                out=options['out'],
                families=options['family'],
                copulas=options['copula'],
                sizes=options['sizes'],
            )
        except CdnError as exc:
            raise CommandError(str(exc)) from exc

        unconverged = sum(1 for row in rows if row.get('converged') is False)
        if unconverged:
            self.stdout.write(self.style.WARNING(f'  {unconverged} run(s) hit their iteration cap'))
        self.stdout.write(self.style.SUCCESS(f'Wrote {len(rows)} rows to {options["out"]}'))
