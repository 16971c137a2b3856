# Generated by Django 4.0.2 on 2026-10-18 12:00

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='AssessmentRun',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_on', models.DateTimeField(auto_now_add=True)),
                ('last_updated', models.DateTimeField(auto_now=True)),
                ('command', models.CharField(choices=[('assess', 'Assess'), ('compare', 'Compare')], default='assess', max_length=10)),
                ('config_digest', models.CharField(db_index=True, max_length=64)),
                ('mode', models.CharField(choices=[('original', 'Original (exact agreement)'), ('extended', 'Extended (similarity weights)')], default='extended', max_length=10)),
                ('blocking', models.CharField(blank=True, max_length=200)),
                ('cutoff', models.FloatField()),
                ('samples', models.PositiveIntegerField()),
                ('thinning', models.PositiveIntegerField()),
                ('seed', models.BigIntegerField()),
                ('output_dir', models.CharField(max_length=500)),
                ('grand_mean', models.FloatField(blank=True, null=True)),
                ('n_records', models.PositiveIntegerField(default=0)),
                ('n_blocks', models.PositiveIntegerField(default=0)),
                ('n_excluded', models.PositiveIntegerField(default=0)),
            ],
            options={
                'ordering': ('-created_on',),
            },
        ),
        migrations.CreateModel(
            name='BlockAssessment',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_on', models.DateTimeField(auto_now_add=True)),
                ('last_updated', models.DateTimeField(auto_now=True)),
                ('variant', models.CharField(blank=True, max_length=100)),
                ('block', models.CharField(max_length=200)),
                ('slug', models.SlugField(max_length=200)),
                ('n_x', models.PositiveIntegerField()),
                ('n_y', models.PositiveIntegerField()),
                ('n_orphans', models.PositiveIntegerField(default=0)),
                ('status', models.CharField(max_length=10)),
                ('grand_mean', models.FloatField(blank=True, null=True)),
                ('min_per_record', models.FloatField(blank=True, null=True)),
                ('min_per_simulation', models.FloatField(blank=True, null=True)),
                ('snapshot_digest', models.CharField(blank=True, max_length=64)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='blocks', to='assessment.assessmentrun')),
            ],
            options={
                'unique_together': {('run', 'variant', 'slug')},
            },
        ),
    ]
