from django.urls import reverse
from rest_framework import status
from rest_framework.test import APIClient, APITestCase

from reconstruction.models import ReconstructionMetric, RunRecord


class RunApiTests(APITestCase):
    def setUp(self):
        self.client = APIClient()
        self.metrics_run = RunRecord.objects.create(
            command='metrics', config={'size': 64}, seed=1, output_dir='/tmp/m', status='SUCCEEDED',
        )
        self.train_run = RunRecord.objects.create(
            command='train', config={}, seed=0, output_dir='/tmp/t', status='FAILED', exit_code=2,
        )
        for method, value in (('FBP', 20.0), ('SART', 23.5), ('TV', 26.25)):
            ReconstructionMetric.objects.create(run=self.metrics_run, method=method,
                                                problem='few-view', psnr=value)
        ReconstructionMetric.objects.create(run=self.metrics_run, method='FBP',
                                            problem='few-view', psnr=22.0)
        ReconstructionMetric.objects.create(run=self.metrics_run, method='Ours',
                                            problem='full', psnr=None)

    def test_list_runs(self):
        response = self.client.get(reverse('run_list'))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['count'], 2)
        ids = {run['id'] for run in response.data['results']}
        self.assertEqual(ids, {self.metrics_run.id, self.train_run.id})

    def test_filter_runs(self):
        response = self.client.get(reverse('run_list'), {'command': 'train'})
        self.assertEqual([r['id'] for r in response.data['results']], [self.train_run.id])
        response = self.client.get(reverse('run_list'), {'status': 'succeeded'})
        self.assertEqual([r['id'] for r in response.data['results']], [self.metrics_run.id])

    def test_run_detail(self):
        response = self.client.get(reverse('run_detail', args=[self.metrics_run.id]))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['command'], 'metrics')
        self.assertEqual(response.data['metric_count'], 5)
        self.assertEqual(response.data['config'], {'size': 64})

    def test_missing_run(self):
        response = self.client.get(reverse('run_detail', args=['0' * 32]))
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)
        response = self.client.get(reverse('run_metrics', args=['0' * 32]))
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)

    def test_run_metrics(self):
        response = self.client.get(reverse('run_metrics', args=[self.metrics_run.id]))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['count'], 5)

    def test_metrics_table(self):
        response = self.client.get(reverse('metrics_table'))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['columns'], ['FBP', 'SART', 'TV', 'Ours'])
        rows = {row['problem']: row for row in response.data['rows']}
        self.assertEqual(rows['few-view']['FBP'], 21.0)
        self.assertEqual(rows['few-view']['TV'], 26.25)
        self.assertIsNone(rows['few-view']['Ours'])
        # Exact reconstructions are stored without a PSNR and left out of the means.
        self.assertNotIn('full', rows)

    def test_metrics_table_unknown_problem(self):
        response = self.client.get(reverse('metrics_table'), {'problem': 'limited-angle'})
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)
        self.assertIn('error', response.data)

    def test_api_is_read_only(self):
        response = self.client.post(reverse('run_list'), {'command': 'x'}, format='json')
        self.assertEqual(response.status_code, status.HTTP_405_METHOD_NOT_ALLOWED)
