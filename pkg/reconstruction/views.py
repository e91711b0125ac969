from collections import defaultdict

from django.db.models import Avg
from django.shortcuts import get_object_or_404
from rest_framework import status, generics
from rest_framework.decorators import api_view, permission_classes
from rest_framework.permissions import AllowAny
from rest_framework.response import Response

from .models import RunRecord, ReconstructionMetric
from .serializers import RunRecordSerializer, ReconstructionMetricSerializer

TABLE_COLUMNS = ['FBP', 'SART', 'TV', 'Ours']


class RunListView(generics.ListAPIView):
    """
    List recorded runs, newest first. Filter with ?command= and ?status=.
    """
    serializer_class = RunRecordSerializer
    permission_classes = [AllowAny]

    def get_queryset(self):
        queryset = RunRecord.objects.all()
        command = self.request.query_params.get('command')
        run_status = self.request.query_params.get('status')
        if command:
            queryset = queryset.filter(command=command)
        if run_status:
            queryset = queryset.filter(status=run_status.upper())
        return queryset


class RunDetailView(generics.RetrieveAPIView):
    """
    Retrieve one run with its manifest.
    """
    queryset = RunRecord.objects.all()
    serializer_class = RunRecordSerializer
    permission_classes = [AllowAny]


class RunMetricsView(generics.ListAPIView):
    serializer_class = ReconstructionMetricSerializer
    permission_classes = [AllowAny]

    def get_queryset(self):
        run = get_object_or_404(RunRecord, id=self.kwargs['pk'])
        return run.metrics.all()


@api_view(['GET'])
@permission_classes([AllowAny])
def metrics_table(request):
    """
    Mean PSNR per problem and method, columns in the order FBP, SART, TV, Ours.
    """
    problem = request.query_params.get('problem')
    queryset = ReconstructionMetric.objects.exclude(psnr__isnull=True)
    if problem:
        queryset = queryset.filter(problem=problem)
    averages = queryset.values('problem', 'method').annotate(mean_psnr=Avg('psnr'))

    rows = defaultdict(lambda: {column: None for column in TABLE_COLUMNS})
    for entry in averages:
        rows[entry['problem']][entry['method']] = round(entry['mean_psnr'], 2)
    if problem and not rows:
        return Response(
            {'error': f'No metrics recorded for problem {problem}'},
            status=status.HTTP_404_NOT_FOUND
        )
    return Response({
        'columns': TABLE_COLUMNS,
        'rows': [{'problem': name, **values} for name, values in sorted(rows.items())],
    }, status=status.HTTP_200_OK)
