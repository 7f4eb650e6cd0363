import math

from django.core.management.base import BaseCommand, CommandError

from cdn.services.cliquetree import build_min_fill, tree_to_dict
from cdn.services.errors import CdnError, InvalidSpec
from cdn.services.inference import LINEAR, LOG, discrete_pmf, query
from cdn.services.model import CumulativeBound, Point
from cdn.services.model_io import load_model, parse_assignments, write_json

# query type → (evidence for --at, evidence for --given); None means --given is not used
QUERY_TYPES = {
    'full-cdf': (CumulativeBound, None),
    'marginal-cdf': (CumulativeBound, None),
    'conditional-cdf': (CumulativeBound, Point),
    'cdf-given-cdf': (CumulativeBound, CumulativeBound),
    'density': (Point, None),
    'marginal-density': (Point, None),
    'mixed': (Point, None),
    'density-given-cdf': (Point, CumulativeBound),
    'conditional-density': (Point, Point),
    'pmf': (None, None),
}

# types whose --at must name every variable
FULL_TYPES = ('full-cdf', 'density', 'pmf')


def build_evidence(model, query_type, at, given, bound):
    """(target, given) evidence dicts for a query type."""
    at_state, given_state = QUERY_TYPES[query_type]
    if query_type in FULL_TYPES:
        missing = [name for name in model.names if name not in at]
        if missing:
            raise InvalidSpec(f'{query_type} needs --at for every variable; missing {missing}')
    if not at:
        raise InvalidSpec('--at needs at least one NAME=VALUE')
    if given and given_state is None:
        raise InvalidSpec(f'{query_type} does not take --given')
    if given_state is not None and not given:
        raise InvalidSpec(f'{query_type} needs --given')
    if bound and query_type != 'mixed':
        raise InvalidSpec('--bound is only used by mixed queries')
    if at_state is None:
        return {}, {}

    target = {name: at_state(x) for name, x in at.items()}
    target.update({name: CumulativeBound(x) for name, x in bound.items()})
    conditioning = {name: given_state(x) for name, x in given.items()} if given_state else {}
    return target, conditioning


class Command(BaseCommand):
    help = 'Evaluate a CDF, density, mixed or conditional query on a model and print its log value'

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True, help='Path to model JSON')
        parser.add_argument('--type', required=True, choices=list(QUERY_TYPES), dest='query_type')
        parser.add_argument('--at', nargs='+', default=[], metavar='NAME=VALUE')
        parser.add_argument('--given', nargs='+', default=[], metavar='NAME=VALUE')
        parser.add_argument('--bound', nargs='+', default=[], metavar='NAME=VALUE',
                            help='Cumulative bounds joined to a mixed query')
        parser.add_argument('--linear', action='store_true', help='Use linear instead of log-space arithmetic')
        parser.add_argument('--dump-tree', help='Write the clique tree as JSON to this path')

    def handle(self, *args, **options):
        query_type = options['query_type']
        arithmetic = LINEAR if options['linear'] else LOG
        try:
            model = load_model(options['model'])
            at = parse_assignments(options['at'], model)
            given = parse_assignments(options['given'], model)
            bound = parse_assignments(options['bound'], model)

            if options['dump_tree']:
                tree = build_min_fill(model.scopes(), model.n)
                write_json(tree_to_dict(tree, model.names), options['dump_tree'])
                self.stdout.write(self.style.SUCCESS(f'Wrote clique tree to {options["dump_tree"]}'))

            if query_type == 'pmf':
                build_evidence(model, query_type, at, given, bound)
                point = [at[name] for name in model.names]
                value = discrete_pmf(model, point, arithmetic)
                log_value = math.log(value) if value > 0 else -math.inf
            else:
                target, conditioning = build_evidence(model, query_type, at, given, bound)
                log_value = query(model, target, conditioning, arithmetic)
        except CdnError as exc:
            raise CommandError(str(exc)) from exc

        log_value = float(log_value)
        value = math.exp(log_value) if log_value != -math.inf else 0.0
        self.stdout.write(f'{query_type} log={log_value!r} value={value!r}')
