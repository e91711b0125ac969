# serializers.py
import math

from rest_framework import serializers
from .models import RunRecord, ReconstructionMetric

class ReconstructionMetricSerializer(serializers.ModelSerializer):
    class Meta:
        model = ReconstructionMetric
        fields = '__all__'
        read_only_fields = ('id', 'created_at')

class RunRecordSerializer(serializers.ModelSerializer):
    metric_count = serializers.IntegerField(source='metrics.count', read_only=True)

    class Meta:
        model = RunRecord
        fields = '__all__'
        read_only_fields = ('id', 'started_at', 'finished_at')

class RunConfigSerializer(serializers.Serializer):
    """Every key a run config file may set, with its range."""

    PROBLEMS = ['few-view', 'limited-angle', 'full']
    FILTERS = ['ram-lak', 'none']
    SART_BLOCKS = ['all', 'angle']

    seed = serializers.IntegerField(default=0, min_value=0)
    output_dir = serializers.CharField(required=False, allow_blank=False)
    threads = serializers.IntegerField(required=False, min_value=1, max_value=256)

    # geometry and noise
    size = serializers.IntegerField(default=64, min_value=16, max_value=1024)
    problem = serializers.ChoiceField(choices=PROBLEMS, default='few-view')
    n_angles = serializers.IntegerField(required=False, min_value=1, max_value=4096)
    angle_start = serializers.FloatField(required=False, min_value=0.0, max_value=math.pi)
    angle_stop = serializers.FloatField(required=False, min_value=0.0, max_value=math.pi)
    n_detectors = serializers.IntegerField(required=False, min_value=1)
    det_spacing = serializers.FloatField(default=1.0, min_value=1e-6)
    noise_level = serializers.FloatField(default=1e-3, min_value=0.0, max_value=1.0)
    filter = serializers.ChoiceField(choices=FILTERS, default='ram-lak')

    # classical baselines
    sart_iterations = serializers.IntegerField(default=50, min_value=1)
    sart_relax = serializers.FloatField(default=1.0, min_value=1e-6, max_value=2.0)
    sart_blocks = serializers.ChoiceField(choices=SART_BLOCKS, default='all')
    sart_nonneg = serializers.BooleanField(default=True)
    tv_lambda = serializers.FloatField(required=False, min_value=0.0)
    tv_iterations = serializers.IntegerField(default=300, min_value=1)
    tv_nonneg = serializers.BooleanField(default=False)

    # energy model
    n_f = serializers.IntegerField(default=8, min_value=1, max_value=256)
    leak = serializers.FloatField(default=0.05, min_value=0.0, max_value=0.999)
    temperature = serializers.FloatField(default=1.0, min_value=1e-12)

    # Langevin sampler
    epsilon = serializers.FloatField(default=1.0, min_value=1e-12)
    beta = serializers.FloatField(default=7.5e-3, min_value=0.0)
    steps = serializers.IntegerField(default=500, min_value=0)
    clamp = serializers.BooleanField(default=False)

    # training
    learning_rate = serializers.FloatField(default=5e-4, min_value=1e-12)
    beta1 = serializers.FloatField(default=0.9, min_value=0.0, max_value=0.999999)
    beta2 = serializers.FloatField(default=0.999, min_value=0.0, max_value=0.999999)
    adam_eps = serializers.FloatField(default=1e-8, min_value=1e-16)
    batch_size = serializers.IntegerField(default=25, min_value=1)
    n_steps = serializers.IntegerField(default=0, min_value=0)
    sigma_data = serializers.FloatField(default=1.5e-2, min_value=0.0)
    buffer_size = serializers.IntegerField(default=8000, min_value=1)
    p_reinit = serializers.FloatField(default=0.01, min_value=0.0, max_value=1.0)
    grad_clip = serializers.FloatField(default=100.0, min_value=0.0)
    checkpoint_every = serializers.IntegerField(default=0, min_value=0)
    log_every = serializers.IntegerField(default=10, min_value=1)
    dataset_size = serializers.IntegerField(default=500, min_value=1)

    # variational solver
    iterations = serializers.IntegerField(default=1000, min_value=0)
    alpha0 = serializers.FloatField(default=1e-2, min_value=1e-300)
    gamma1 = serializers.FloatField(default=0.5, min_value=1e-6, max_value=0.999999)
    gamma2 = serializers.FloatField(default=1 / 1.5, min_value=1e-6, max_value=0.999999)
    cg_iters = serializers.IntegerField(default=10, min_value=1)
    alpha_min = serializers.FloatField(default=1e-12, min_value=0.0)
    alpha_max = serializers.FloatField(default=1e10, min_value=1e-300)
    sigma2 = serializers.FloatField(required=False, min_value=1e-300)

    # posterior sampling
    burn_in = serializers.IntegerField(required=False, min_value=0)
    n_samples = serializers.IntegerField(default=200, min_value=2)
    stride = serializers.IntegerField(default=10, min_value=1)
    n_chains = serializers.IntegerField(default=1, min_value=1)

    def to_internal_value(self, data):
        unknown = sorted(set(data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError(
                {key: ['Unknown configuration key.'] for key in unknown}
            )
        return super().to_internal_value(data)

    def validate(self, attrs):
        not_finite = [k for k, v in attrs.items() if isinstance(v, float) and not math.isfinite(v)]
        if not_finite:
            raise serializers.ValidationError({k: ['Must be a finite number.'] for k in not_finite})
        start, stop = attrs.get('angle_start'), attrs.get('angle_stop')
        if start is not None and stop is not None and stop <= start:
            raise serializers.ValidationError({'angle_stop': ['Must be greater than angle_start.']})
        if attrs['batch_size'] > attrs['buffer_size']:
            raise serializers.ValidationError({'batch_size': ['Cannot exceed buffer_size.']})
        return attrs
