from flask import Blueprint, jsonify, request
import pandas as pd

from vgswarm.core import metrics
from vgswarm.routes.experiments import records
from vgswarm.utils.logger import logger

stats_bp = Blueprint("stats", __name__)


@stats_bp.route("/summary", methods=["POST"])
def summarize_reports():
    """Success-rate table from per-run report rows posted by the client."""
    try:
        data = request.get_json(force=True) or {}
        rows = data.get("reports", [])
        if not isinstance(rows, list):
            return jsonify({"error": "reports must be a list"}), 400
        checkpoints = [float(c) for c in data.get("checkpoints", metrics.DEFAULT_CHECKPOINTS)]
        frame = pd.DataFrame(rows, columns=metrics.REPORT_COLUMNS)
        table = metrics.summarize(frame, checkpoints)
        logger.info(f"Summary over {len(frame)} runs, {len(table)} distance rows")
        return jsonify({"columns": list(table.columns), "rows": records(table)})
    except Exception as e:
        logger.error(f"Summary failed: {e}")
        return jsonify({"error": str(e)}), 500
