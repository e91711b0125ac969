# urls.py
from django.urls import path
from . import views

urlpatterns = [
    # Run records
    path('runs/', views.RunListView.as_view(), name='run_list'),
    path('runs/<str:pk>/', views.RunDetailView.as_view(), name='run_detail'),
    path('runs/<str:pk>/metrics/', views.RunMetricsView.as_view(), name='run_metrics'),

    # PSNR table across runs
    path('metrics/table/', views.metrics_table, name='metrics_table'),
]
