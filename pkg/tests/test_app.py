"""
Tests for the read-only results service.
"""
import json

import pytest

from app import create_app
from learning.experiment import METRIC_COLUMNS, format_csv

ROWS = [
    {'seed': 0, 'iteration': 1, 'iteration_cost': 40.0, 'cost_seconds': 4.0, 'feasible': 1, 'violations': 0,
     'termination': 'target', 'mean_lambda_x': 12.5, 'mean_lambda_cs': 300.0},
    {'seed': 0, 'iteration': 2, 'iteration_cost': 0.0, 'cost_seconds': 0.0, 'feasible': 0, 'violations': 1,
     'termination': 'violation', 'mean_lambda_x': float('nan'), 'mean_lambda_cs': float('nan')},
]


@pytest.fixture
def results_dir(tmp_path):
    experiment = tmp_path / 'point_mass'
    experiment.mkdir()
    (experiment / 'summary.json').write_text(json.dumps({'experiment': 'point_mass', 'final_mean_cost': 40.0}))
    (experiment / 'metrics.csv').write_text(format_csv(ROWS, METRIC_COLUMNS))
    (experiment / 'cost_vs_iteration.svg').write_text('<svg xmlns="http://www.w3.org/2000/svg"></svg>')
    # Running experiments have no summary yet
    (tmp_path / 'in_progress').mkdir()
    return tmp_path


@pytest.fixture
def client(results_dir):
    app = create_app(str(results_dir))
    app.config['TESTING'] = True
    return app.test_client()


def test_health(client, results_dir):
    data = client.get('/health').get_json()
    assert data['status'] == 'healthy'
    assert data['results_dir_exists'] is True


def test_list_only_summarized(client):
    assert client.get('/api/experiments').get_json()['experiments'] == ['point_mass']


def test_missing_results_dir(tmp_path):
    client = create_app(str(tmp_path / 'absent')).test_client()
    assert client.get('/api/experiments').get_json()['experiments'] == []
    assert client.get('/health').get_json()['results_dir_exists'] is False


def test_summary(client):
    response = client.get('/api/experiments/point_mass/summary')
    assert response.status_code == 200
    assert response.get_json()['summary']['final_mean_cost'] == 40.0


def test_summary_not_written_yet(client):
    response = client.get('/api/experiments/in_progress/summary')
    assert response.status_code == 404
    assert response.get_json()['error'] == 'Not found'


def test_unknown_experiment(client):
    response = client.get('/api/experiments/nothing/metrics')
    assert response.status_code == 404
    assert 'nothing' in response.get_json()['details']


def test_metrics_rows(client):
    data = client.get('/api/experiments/point_mass/metrics').get_json()
    assert data['count'] == 2
    assert data['truncated'] is False
    first, second = data['rows']
    assert first['feasible'] is True
    assert first['mean_lambda_x'] == 12.5
    assert second['termination'] == 'violation'
    assert second['mean_lambda_x'] is None
    assert second['mean_lambda_cs'] is None


def test_corrupt_summary(client, results_dir):
    (results_dir / 'point_mass' / 'summary.json').write_text('{broken')
    assert client.get('/api/experiments/point_mass/summary').status_code == 500


def test_plot_served(client):
    response = client.get('/api/experiments/point_mass/plots/cost_vs_iteration.svg')
    assert response.status_code == 200
    assert b'<svg' in response.data


def test_only_figures_served(client):
    assert client.get('/api/experiments/point_mass/plots/metrics.csv').status_code == 404
    assert client.get('/api/experiments/point_mass/plots/missing.svg').status_code == 404


def test_path_traversal_rejected(client):
    assert client.get('/api/experiments/..%2F..%2Fetc/summary').status_code == 404
