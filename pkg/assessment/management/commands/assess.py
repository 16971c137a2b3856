from assessment.pipeline import run_assess
from ._run_command import RunCommand


class Command(RunCommand):
    help = "Assess the accuracy of a linking method by re-linking simulated agreement matrices"
    command_name = 'assess'

    def run(self, cfg, progress):
        return run_assess(cfg, progress)
