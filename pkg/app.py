"""
Read-only results service for finished experiments.

Serves the artifacts `sitlmpc run` writes under Config.OUTPUT_DIR as JSON
(and the SVG figures as files). It never starts or steers a run.
"""
import json
import os
import time

from flask import Flask, abort, jsonify, send_from_directory
from werkzeug.utils import safe_join

from config import Config
from learning.experiment import read_metrics
from utils.log import get_logger

logger = get_logger('app')

PLOT_SUFFIXES = ('.svg',)


def create_app(results_dir: str = None) -> Flask:
    app = Flask(__name__)
    app.config['SECRET_KEY'] = Config.SECRET_KEY
    app.config['RESULTS_DIR'] = os.path.abspath(results_dir or Config.OUTPUT_DIR)

    def experiment_path(name: str) -> str:
        path = safe_join(app.config['RESULTS_DIR'], name)
        if path is None or not os.path.isdir(path):
            abort(404, description=f"experiment {name!r} not found")
        return path

    @app.errorhandler(404)
    def not_found(error):
        return jsonify({"error": "Not found", "details": getattr(error, 'description', str(error))}), 404

    @app.route('/health')
    def health_check():
        """Health check endpoint."""
        return jsonify({
            "status": "healthy",
            "service": "sitlmpc-results",
            "results_dir": app.config['RESULTS_DIR'],
            "results_dir_exists": os.path.isdir(app.config['RESULTS_DIR']),
        })

    @app.route('/api/experiments')
    def list_experiments():
        """Experiments that have a summary.json."""
        root = app.config['RESULTS_DIR']
        names = []
        if os.path.isdir(root):
            names = sorted(n for n in os.listdir(root)
                           if os.path.isfile(os.path.join(root, n, 'summary.json')))
        return jsonify({"success": True, "experiments": names})

    @app.route('/api/experiments/<name>/summary')
    def get_summary(name):
        path = os.path.join(experiment_path(name), 'summary.json')
        if not os.path.isfile(path):
            abort(404, description=f"experiment {name!r} has no summary yet")
        try:
            with open(path) as f:
                summary = json.load(f)
        except ValueError as e:
            logger.error(f"Unreadable summary for {name}: {e}")
            return jsonify({"error": "Corrupt summary", "details": str(e)}), 500
        return jsonify({"success": True, "summary": summary})

    @app.route('/api/experiments/<name>/metrics')
    def get_metrics(name):
        """
        Metrics rows of an experiment.

        Returns at most Config.MAX_METRIC_ROWS rows; ``truncated`` tells
        whether more exist.
        """
        start_time = time.time()
        path = os.path.join(experiment_path(name), 'metrics.csv')
        if not os.path.isfile(path):
            abort(404, description=f"experiment {name!r} has no metrics yet")
        try:
            rows = read_metrics(path)
        except (ValueError, KeyError) as e:
            logger.error(f"Unreadable metrics for {name}: {e}")
            return jsonify({"error": "Corrupt metrics", "details": str(e)}), 500
        limit = Config.MAX_METRIC_ROWS
        for row in rows:
            for key in ('mean_lambda_x', 'mean_lambda_cs'):
                if row[key] != row[key]:
                    row[key] = None
        logger.debug(f"[PERFORMANCE] Read {len(rows)} metric rows in {time.time() - start_time:.3f}s")
        return jsonify({
            "success": True,
            "rows": rows[:limit],
            "count": len(rows),
            "truncated": len(rows) > limit,
        })

    @app.route('/api/experiments/<name>/plots/<path:filename>')
    def get_plot(name, filename):
        directory = experiment_path(name)
        if not filename.endswith(PLOT_SUFFIXES):
            abort(404, description=f"{filename!r} is not a figure")
        return send_from_directory(directory, filename)

    return app


app = create_app()


if __name__ == '__main__':
    port = int(os.environ.get('PORT', 5000))
    app.run(debug=False, host='0.0.0.0', port=port)
