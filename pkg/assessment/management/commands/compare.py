from assessment.pipeline import run_compare
from ._run_command import RunCommand


class Command(RunCommand):
    help = "Assess several linking methods on the same simulated agreement matrices"
    command_name = 'compare'

    def run(self, cfg, progress):
        return run_compare(cfg, progress)
