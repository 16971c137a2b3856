import logging
from dataclasses import replace

import yaml
from colorama import Fore, Style
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from records.errors import MacsimError, ConfigurationError, ReportIOError
from records.utils import EXIT_IO
from synthgen.data import GeneratorConfig, PerturbationPlan
from synthgen.utils import run_generate

logger = logging.getLogger(__name__)


def load_generator_config(path: str) -> GeneratorConfig:
    """ The `synthgen` section of a run configuration, or a file holding only that mapping. """
    try:
        with open(path) as f:
            document = yaml.safe_load(f) or {}
    except OSError as e:
        raise ReportIOError(f'Could not read {path}: {e}')
    except yaml.YAMLError as e:
        raise ConfigurationError(f'{path} is not valid YAML/JSON: {e}')
    if not isinstance(document, dict):
        raise ConfigurationError(f'{path} must hold a mapping of settings.')
    return GeneratorConfig.from_mapping(document.get('synthgen', document))


class Command(BaseCommand):
    help = "Generate a synthetic population (Y.csv), its perturbed sample (X.csv) and the truth (alignment.csv)"

    def add_arguments(self, parser):
        parser.add_argument('-c', '--config', help='YAML or JSON generator settings')
        parser.add_argument('--n-y', type=int)
        parser.add_argument('--n-x', type=int)
        parser.add_argument('--seed', type=int)
        parser.add_argument('-o', '--out', default='data')
        parser.add_argument('--no-perturb', action='store_true', help='leave the sample unchanged')

    def handle(self, *args, **options):
        try:
            cfg = load_generator_config(options['config']) if options.get('config') else GeneratorConfig()
            changes = {key: options[opt] for key, opt in (('n_y', 'n_y'), ('n_x', 'n_x'), ('seed', 'seed'))
                       if options.get(opt) is not None}
            if options.get('no_perturb'):
                changes['plan'] = PerturbationPlan.identity()
            if changes:
                # replace() re-runs the checks, e.g. n_x <= n_y
                cfg = replace(cfg, **changes)
            print('Generating', cfg.n_y, 'records and a sample of', cfg.n_x, f'(seed {cfg.seed})')
            paths = run_generate(cfg, options['out'], getattr(settings, 'MACSIM_MISSING_TOKEN', ''))
        except MacsimError as e:
            print(f'{Fore.RED}{type(e).__name__}:', e.message, Style.RESET_ALL)
            raise CommandError(e.message, returncode=e.exit_code)
        except OSError as e:
            print(f'{Fore.RED}I/O error:', e, Style.RESET_ALL)
            raise CommandError(str(e), returncode=EXIT_IO)

        for path in paths.values():
            print('✔️', path, 'stored!')
        print('Done!', '\n')
