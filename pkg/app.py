import os
import logging
from datetime import datetime
from pathlib import Path
from flask import Flask, request, jsonify, render_template_string, send_file
from werkzeug.utils import secure_filename

from quantform.artifacts import ARTIFACTS, read_summary, write_run, write_sweep
from quantform.cli import render_report
from quantform.config import SCENARIO_DIR, configure_logging, load_scenario, scenario_from_mapping
from quantform.errors import ConfigError, QuantformError
from quantform.runner import run_scenario, run_sweep

app = Flask(__name__)

# --- Configure Logging ---
configure_logging()
logger = logging.getLogger(__name__)

logger.info("Quantform API Service starting up...")

# --- Where run directories live ---
RUNS_FOLDER = Path(os.environ.get('QUANTFORM_OUTPUT_DIR', '/tmp/quantform_runs'))
RUNS_FOLDER.mkdir(parents=True, exist_ok=True)


def bundled_scenarios():
    return sorted(p.stem for p in SCENARIO_DIR.glob('*.cfg'))


def error_response(message, code):
    return jsonify({
        "status": "error",
        "message": message,
        "timestamp": datetime.utcnow().isoformat()
    }), code


def config_from_request(data):
    """A bundled scenario by name, or an inline KEY -> value mapping."""
    if not data:
        raise ConfigError("send JSON with 'scenario' (bundled name) or 'config' (key/value mapping)")
    if 'scenario' in data:
        name = secure_filename(str(data['scenario']))
        if name not in bundled_scenarios():
            raise ConfigError(f"unknown bundled scenario: {data['scenario']}")
        config = load_scenario(name)
    elif 'config' in data and isinstance(data['config'], dict):
        config = scenario_from_mapping(data['config'], source='request', name=data.get('name', 'request'))
    else:
        raise ConfigError("'config' must be an object of scenario keys")
    # requests never choose where files go
    config.output_dir = None
    return config


def new_run_id(config, requested=None):
    if requested:
        run_id = secure_filename(str(requested))
        if run_id:
            return run_id
    timestamp = datetime.now().strftime('%Y%m%d_%H%M%S_%f')
    return f"{secure_filename(config.name) or 'run'}_{timestamp}"


def run_directory(run_id):
    safe = secure_filename(run_id)
    if not safe or safe != run_id:
        return None
    path = RUNS_FOLDER / safe
    return path if path.is_dir() else None


# --- API Documentation (HTML) ---
API_DOCS_HTML = """
<!DOCTYPE html>
<html>
<head>
    <title>Quantform API</title>
</head>
<body>
    <h1>Quantized Formation Control API</h1>
    <p>Exact event-driven simulation of agents on a line steered by one-bit distance errors.</p>

    <hr>

    <p><strong>Service URL:</strong> <span id="base-url">Loading...</span></p>
    <p><strong>Bundled scenarios:</strong> {{ scenarios|join(', ') }}</p>

    <hr>

    <h2>GET /api/v1/health</h2>
    <button onclick="call('GET', '/api/v1/health', null, 'health-response')">Test Health Check</button>
    <pre id="health-response"></pre>

    <hr>

    <h2>POST /api/v1/run</h2>
    <p>Body: <code>{"scenario": "six_agent_line"}</code> or
       <code>{"config": {"N": 3, "D": 1, "K": "1,1", "Z0": "2,4"}}</code></p>
    <select id="run-scenario">
        {% for s in scenarios %}<option value="{{ s }}">{{ s }}</option>{% endfor %}
    </select>
    <button onclick="call('POST', '/api/v1/run', {scenario: document.getElementById('run-scenario').value}, 'run-response')">Run</button>
    <pre id="run-response"></pre>

    <hr>

    <h2>POST /api/v1/sweep</h2>
    <p>Same body as run; grid keys GRID_MIN, GRID_MAX, GRID_POINTS, GRID_AXES, SAMPLES, SEED.</p>

    <h2>GET /api/v1/report/&lt;run_id&gt;</h2>
    <h2>GET /api/v1/runs/&lt;run_id&gt;/&lt;artifact&gt;</h2>
    <p>Artifacts: trajectory.csv, events.jsonl, summary.json, sweep.csv</p>

    <script>
        const baseUrl = window.location.origin;
        document.getElementById('base-url').textContent = baseUrl;

        async function call(method, path, body, target) {
            const options = {method: method, headers: {'Content-Type': 'application/json'}};
            if (body) options.body = JSON.stringify(body);
            const response = await fetch(baseUrl + path, options);
            const data = await response.json();
            document.getElementById(target).textContent = JSON.stringify(data, null, 2);
        }
    </script>
</body>
</html>
"""


@app.route('/')
def index():
    """Serves the interactive API documentation page."""
    return render_template_string(API_DOCS_HTML, scenarios=bundled_scenarios())


@app.route('/api/v1/health', methods=['GET'])
def health_check():
    """Health check endpoint to verify service is running."""
    logger.info("Health check requested")
    return jsonify({
        "status": "healthy",
        "service": "Quantform API",
        "runs_folder": str(RUNS_FOLDER),
        "scenarios": bundled_scenarios(),
        "timestamp": datetime.utcnow().isoformat()
    })


@app.route('/api/v1/run', methods=['POST'])
def run_endpoint():
    """Run one scenario, bundled or inline, and return its summary."""
    logger.info("Run endpoint called")
    data = request.get_json(silent=True)
    try:
        config = config_from_request(data)
        outcome = run_scenario(config)
    except ConfigError as e:
        logger.error(f"Bad run request: {e}")
        return error_response(str(e), 400)
    except QuantformError as e:
        logger.error(f"Run failed: {e}")
        return error_response(str(e), 500)

    run_id = new_run_id(config, data.get('run_id'))
    out_dir = RUNS_FOLDER / run_id
    write_run(outcome, out_dir)
    return jsonify({
        "status": "success",
        "run_id": run_id,
        "exit_code": outcome.exit_code,
        "summary": outcome.summary,
        "artifacts": [p.name for p in sorted(out_dir.iterdir())],
        "timestamp": datetime.utcnow().isoformat()
    })


@app.route('/api/v1/sweep', methods=['POST'])
def sweep_endpoint():
    """Sweep a scenario's grid against the basin classifier."""
    logger.info("Sweep endpoint called")
    data = request.get_json(silent=True)
    try:
        config = config_from_request(data)
        rows, summary, code = run_sweep(config)
    except ConfigError as e:
        logger.error(f"Bad sweep request: {e}")
        return error_response(str(e), 400)
    except QuantformError as e:
        logger.error(f"Sweep failed: {e}")
        return error_response(str(e), 500)

    run_id = new_run_id(config, data.get('run_id'))
    write_sweep(rows, summary, RUNS_FOLDER / run_id)
    return jsonify({
        "status": "success",
        "run_id": run_id,
        "exit_code": code,
        "summary": summary,
        "rows": rows,
        "timestamp": datetime.utcnow().isoformat()
    })


@app.route('/api/v1/report/<run_id>', methods=['GET'])
def report_endpoint(run_id):
    """Report lines for a finished run or sweep"""
    logger.info(f"Report requested for: {run_id}")
    run_dir = run_directory(run_id)
    if run_dir is None:
        return error_response(f"Unknown run: {run_id}", 404)
    try:
        summary = read_summary(run_dir)
    except FileNotFoundError:
        return error_response(f"Run {run_id} has no summary", 404)
    return jsonify({
        "status": "success",
        "run_id": run_id,
        "summary": summary,
        "report": render_report(summary),
        "timestamp": datetime.utcnow().isoformat()
    })


@app.route('/api/v1/runs/<run_id>/<artifact>', methods=['GET'])
def download_artifact(run_id, artifact):
    """Download one output file of a run"""
    logger.info(f"Download requested for: {run_id}/{artifact}")
    run_dir = run_directory(run_id)
    if run_dir is None or artifact not in ARTIFACTS:
        return error_response("File not found", 404)
    path = run_dir / artifact
    if not path.exists():
        return error_response("File not found", 404)
    return send_file(path.resolve(), as_attachment=True)


# --- Error Handlers ---
@app.errorhandler(404)
def not_found(error):
    logger.warning(f"404 error: {request.url}")
    return error_response("Endpoint not found. Visit / for API documentation.", 404)


@app.errorhandler(500)
def internal_error(error):
    logger.error(f"500 error: {error}")
    return error_response("Internal server error. Check logs for details.", 500)


# --- Local Runner ---
if __name__ == '__main__':
    port = int(os.environ.get('PORT', 5000))
    logger.info(f"Starting Flask app on port {port}")
    app.run(host='0.0.0.0', port=port, debug=True)
