from django.contrib import admin

from .models import RunRecord, ReconstructionMetric


class ReconstructionMetricInline(admin.TabularInline):
    model = ReconstructionMetric
    extra = 0
    readonly_fields = ('method', 'problem', 'image', 'psnr', 'created_at')


@admin.register(RunRecord)
class RunRecordAdmin(admin.ModelAdmin):
    list_display = ('id', 'command', 'status', 'exit_code', 'seed', 'started_at')
    list_filter = ('command', 'status')
    search_fields = ('id', 'output_dir')
    inlines = [ReconstructionMetricInline]


@admin.register(ReconstructionMetric)
class ReconstructionMetricAdmin(admin.ModelAdmin):
    list_display = ('run', 'method', 'problem', 'psnr')
    list_filter = ('method', 'problem')
