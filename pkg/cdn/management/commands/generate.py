from django.core.management.base import BaseCommand, CommandError

from cdn.services.archetypes import COPULA_KINDS, FAMILIES, ArchetypeSpec, generate
from cdn.services.errors import CdnError
from cdn.services.model_io import save_model


class Command(BaseCommand):
    help = 'Generate an archetypal CDN (chain, loop, tree or grid) as model JSON'

    def add_arguments(self, parser):
        parser.add_argument('--family', required=True, choices=FAMILIES)
        parser.add_argument('--n', type=int, required=True, help='Size (levels for tree, side for grid)')
        parser.add_argument('--copula', default='normal', choices=sorted(COPULA_KINDS))
        parser.add_argument('--param', type=float, help='Parameter for every factor (random when omitted)')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--out', required=True, help='Path for the model JSON')

    def handle(self, *args, **options):
        try:
            spec = ArchetypeSpec(options['family'], options['n'], options['copula'], options['param'])
            model = generate(spec, options['seed'])
            save_model(model, options['out'])
        except CdnError as exc:
            raise CommandError(str(exc)) from exc

        self.stdout.write(self.style.SUCCESS(
            f'Wrote {options["family"]} model with {model.n} variables and '
            f'{len(model.factors)} {options["copula"]} factors to {options["out"]}'
        ))
