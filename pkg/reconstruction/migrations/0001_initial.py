# Generated by Django 4.0.10

from django.db import migrations, models
import django.db.models.deletion
import reconstruction.models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunRecord',
            fields=[
                ('id', models.CharField(default=reconstruction.models.generate_id, editable=False, max_length=32, primary_key=True, serialize=False)),
                ('command', models.CharField(max_length=50)),
                ('config', models.JSONField(default=dict)),
                ('seed', models.BigIntegerField(default=0)),
                ('output_dir', models.CharField(max_length=500)),
                ('status', models.CharField(choices=[('RUNNING', 'Running'), ('SUCCEEDED', 'Succeeded'), ('FAILED', 'Failed'), ('PARTIAL', 'Partial result')], default='RUNNING', max_length=20)),
                ('exit_code', models.IntegerField(blank=True, null=True)),
                ('message', models.TextField(blank=True)),
                ('manifest', models.JSONField(blank=True, default=dict)),
                ('started_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'db_table': 'run_records',
                'ordering': ['-started_at'],
            },
        ),
        migrations.CreateModel(
            name='ReconstructionMetric',
            fields=[
                ('id', models.CharField(default=reconstruction.models.generate_id, editable=False, max_length=32, primary_key=True, serialize=False)),
                ('method', models.CharField(choices=[('FBP', 'Filtered backprojection'), ('SART', 'SART'), ('TV', 'Total variation'), ('Ours', 'Learned regularizer')], max_length=10)),
                ('problem', models.CharField(max_length=50)),
                ('image', models.CharField(blank=True, max_length=255)),
                ('psnr', models.FloatField(blank=True, null=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='metrics', to='reconstruction.runrecord')),
            ],
            options={
                'db_table': 'reconstruction_metrics',
            },
        ),
        migrations.AddIndex(
            model_name='runrecord',
            index=models.Index(fields=['command', 'status'], name='run_command_status_idx'),
        ),
        migrations.AddIndex(
            model_name='runrecord',
            index=models.Index(fields=['started_at'], name='run_started_at_idx'),
        ),
        migrations.AddIndex(
            model_name='reconstructionmetric',
            index=models.Index(fields=['problem', 'method'], name='metric_problem_method_idx'),
        ),
    ]
