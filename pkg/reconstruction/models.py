# reconstruction/models.py
from django.db import models
import uuid

def generate_id():
    return uuid.uuid4().hex  # 32-character hex string without hyphens

class RunRecord(models.Model):
    RUN_STATUS = [
        ('RUNNING', 'Running'),
        ('SUCCEEDED', 'Succeeded'),
        ('FAILED', 'Failed'),
        ('PARTIAL', 'Partial result'),
    ]

    id = models.CharField(primary_key=True, max_length=32, editable=False, default=generate_id)
    command = models.CharField(max_length=50)
    config = models.JSONField(default=dict)
    seed = models.BigIntegerField(default=0)
    output_dir = models.CharField(max_length=500)
    status = models.CharField(max_length=20, choices=RUN_STATUS, default='RUNNING')
    exit_code = models.IntegerField(null=True, blank=True)
    message = models.TextField(blank=True)
    manifest = models.JSONField(default=dict, blank=True)
    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        db_table = 'run_records'
        ordering = ['-started_at']
        indexes = [
            models.Index(fields=['command', 'status'], name='run_command_status_idx'),
            models.Index(fields=['started_at'], name='run_started_at_idx'),
        ]

    def __str__(self):
        return f"{self.command} - {self.id} ({self.status})"

class ReconstructionMetric(models.Model):
    METHODS = [
        ('FBP', 'Filtered backprojection'),
        ('SART', 'SART'),
        ('TV', 'Total variation'),
        ('Ours', 'Learned regularizer'),
    ]

    id = models.CharField(primary_key=True, max_length=32, editable=False, default=generate_id)
    run = models.ForeignKey(RunRecord, on_delete=models.CASCADE, related_name='metrics')
    method = models.CharField(max_length=10, choices=METHODS)
    problem = models.CharField(max_length=50)
    image = models.CharField(max_length=255, blank=True)
    # Stored as None when the reconstruction is exact (infinite PSNR).
    psnr = models.FloatField(null=True, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'reconstruction_metrics'
        indexes = [
            models.Index(fields=['problem', 'method'], name='metric_problem_method_idx'),
        ]

    def __str__(self):
        return f"{self.method} on {self.problem}: {self.psnr}"
