"""
Shared plumbing of the `assess` and `compare` commands: the common flags, turning them into a RunConfig
and mapping library errors onto exit codes.
"""
import logging

from colorama import Fore, Style
from django.core.management.base import BaseCommand, CommandError

from assessment.config import RunConfig, load_run_config
from assessment.data import BlockResult
from records.data import LinkageMode
from records.errors import MacsimError
from records.utils import EXIT_IO

logger = logging.getLogger(__name__)


class RunCommand(BaseCommand):
    command_name = 'assess'

    def add_arguments(self, parser):
        parser.add_argument('-c', '--config', required=True, help='YAML or JSON run configuration')
        parser.add_argument('--seed', type=int)
        parser.add_argument('-o', '--out', help='output directory')
        parser.add_argument('--mode', choices=LinkageMode.values)
        parser.add_argument('--cutoff', type=float)
        parser.add_argument('-S', '--samples', type=int)
        parser.add_argument('-d', '--thinning', type=int)
        parser.add_argument('-b', '--blocking', help='comma separated blocking variables')
        parser.add_argument('-j', '--jobs', type=int)
        parser.add_argument('--max-blocks', type=int)
        parser.add_argument('--record', action='store_true', help='store the run in the run registry')

    def load_config(self, options) -> RunConfig:
        cfg = load_run_config(options['config'])
        return cfg.with_overrides(
            seed=options.get('seed'),
            output=options.get('out'),
            mode=options.get('mode'),
            cutoff=options.get('cutoff'),
            samples=options.get('samples'),
            thinning=options.get('thinning'),
            blocking=options.get('blocking'),
            jobs=options.get('jobs'),
            max_blocks=options.get('max_blocks'),
        )

    def run(self, cfg: RunConfig, progress):
        raise NotImplementedError

    @staticmethod
    def print_block(result: BlockResult):
        if result.included:
            report = result.variant().report
            print('✔️', result.label, f'({result.n_x} records)', f'mean accuracy {report.grand_mean:.4%}')
        else:
            print('⤴️ Skipped', result.label, f'- {result.status.message}')

    def handle(self, *args, **options):
        try:
            cfg = self.load_config(options)
            print('Assessing', cfg.input.file_x if cfg.input else 'generated files',
                  f'(S={cfg.samples}, d={cfg.thinning}, seed={cfg.seed})')
            outcome = self.run(cfg, self.print_block)
            if options.get('record'):
                # deferred: models need the app registry, which workers never load
                from assessment.models import AssessmentRun
                run = AssessmentRun.record(cfg, outcome, command=self.command_name)
                print('📒 Recorded run', run.pk)
        except MacsimError as e:
            print(f'{Fore.RED}{type(e).__name__}:', e.message, Style.RESET_ALL)
            raise CommandError(e.message, returncode=e.exit_code)
        except OSError as e:
            print(f'{Fore.RED}I/O error:', e, Style.RESET_ALL)
            raise CommandError(str(e), returncode=EXIT_IO)
        except Exception as e:
            logger.exception(e)
            raise

        for name, aggregate in outcome.aggregates.items():
            print(f'{name}: grand mean accuracy {aggregate.grand_mean:.4%} over {aggregate.n_records} records',
                  f'({aggregate.n_excluded} block(s) excluded)' if aggregate.n_excluded else '')
        print('Done!', f'Reports in {cfg.output}', '\n')
