from typing import TYPE_CHECKING

from django.db import models, transaction
from django.utils.translation import gettext_lazy as _

from macsim.abstract_models import TimeStamped
from records.data import LinkageMode

if TYPE_CHECKING:
    from assessment.config import RunConfig
    from assessment.pipeline import RunOutcome


class AssessmentRun(TimeStamped):
    """
    One assess or compare run, kept so grand means can be traced back to the configuration and chain
    samples that produced them.
    """

    class Command(models.TextChoices):
        ASSESS = 'assess', _('Assess')
        COMPARE = 'compare', _('Compare')

    command = models.CharField(max_length=10, choices=Command.choices, default=Command.ASSESS)
    config_digest = models.CharField(max_length=64, db_index=True)
    mode = models.CharField(max_length=10, choices=LinkageMode.choices, default=LinkageMode.EXTENDED)
    blocking = models.CharField(max_length=200, blank=True)
    cutoff = models.FloatField()
    samples = models.PositiveIntegerField()
    thinning = models.PositiveIntegerField()
    seed = models.BigIntegerField()
    output_dir = models.CharField(max_length=500)

    grand_mean = models.FloatField(null=True, blank=True)
    n_records = models.PositiveIntegerField(default=0)
    n_blocks = models.PositiveIntegerField(default=0)
    n_excluded = models.PositiveIntegerField(default=0)

    class Meta:
        ordering = ('-created_on',)

    def __str__(self):
        return f'{self.command} {self.config_digest[:12]} ({self.created_on:%Y-%m-%d %H:%M})'

    @classmethod
    def record(cls, cfg: 'RunConfig', outcome: 'RunOutcome', command: str = Command.ASSESS) -> 'AssessmentRun':
        """ Stores a finished run with one row per block and linking method. """
        primary = outcome.primary
        with transaction.atomic():
            run = cls.objects.create(
                command=command,
                config_digest=cfg.digest(),
                mode=cfg.mode,
                blocking=','.join(cfg.blocking),
                cutoff=cfg.cutoff,
                samples=cfg.samples,
                thinning=cfg.thinning,
                seed=cfg.seed,
                output_dir=cfg.output,
                grand_mean=primary.grand_mean,
                n_records=primary.n_records,
                n_blocks=len(outcome.results),
                n_excluded=primary.n_excluded,
            )
            rows = []
            for result in outcome.results:
                names = list(outcome.aggregates) if result.included else ['']
                for name in names:
                    row = BlockAssessment(run=run, variant=name, block=result.label, slug=result.slug,
                                          n_x=result.n_x, n_y=result.n_y, n_orphans=result.n_orphans,
                                          status=result.status.level.name,
                                          snapshot_digest=result.snapshot_digest)
                    if result.included:
                        report = result.variant(name).report
                        row.grand_mean = report.grand_mean
                        row.min_per_record = float(report.per_record.min())
                        row.min_per_simulation = float(report.per_simulation.min())
                    rows.append(row)
            BlockAssessment.objects.bulk_create(rows)
        return run


class BlockAssessment(TimeStamped):
    run = models.ForeignKey(AssessmentRun, on_delete=models.CASCADE, related_name='blocks')
    variant = models.CharField(max_length=100, blank=True)
    block = models.CharField(max_length=200)
    slug = models.SlugField(max_length=200)
    n_x = models.PositiveIntegerField()
    n_y = models.PositiveIntegerField()
    n_orphans = models.PositiveIntegerField(default=0)
    status = models.CharField(max_length=10)
    grand_mean = models.FloatField(null=True, blank=True)
    min_per_record = models.FloatField(null=True, blank=True)
    min_per_simulation = models.FloatField(null=True, blank=True)
    snapshot_digest = models.CharField(max_length=64, blank=True)

    class Meta:
        unique_together = ('run', 'variant', 'slug')

    def __str__(self):
        return f'{self.block} [{self.variant}]' if self.variant else self.block
