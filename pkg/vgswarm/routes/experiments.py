from flask import Blueprint, current_app, jsonify, request
import threading
import uuid

import vgswarm.extensions as extensions
from vgswarm.core import metrics
from vgswarm.core.batch import run_batch, run_once
from vgswarm.core.camera import CameraRig
from vgswarm.core.estimation import calibrate, fits_to_dict
from vgswarm.core.scenario import build_preset, describe_presets, scenario_from_dict
from vgswarm.errors import ScenarioError
from vgswarm.utils.logger import logger
from vgswarm.utils.rng import stream

experiments_bp = Blueprint("experiments", __name__)


def records(frame):
    """DataFrame rows as JSON-safe dicts (NaN becomes null)."""
    return frame.astype(object).where(frame.notna(), None).to_dict(orient="records")


def scenario_from_request(data):
    if "preset" in data:
        return build_preset(data["preset"], data.get("distance"), int(data.get("seed", 0)))
    if "scenario" in data:
        scenario = scenario_from_dict(data["scenario"])
        if "seed" in data:
            scenario.seed = int(data["seed"])
        return scenario
    raise ScenarioError("request needs a 'preset' name or a 'scenario' object")


@experiments_bp.route("/presets", methods=["GET"])
def list_presets():
    return jsonify(describe_presets())


@experiments_bp.route("/runs", methods=["POST"])
def create_run():
    try:
        data = request.get_json(force=True) or {}
        scenario = scenario_from_request(data)
        cap = current_app.config["VGSWARM_MAX_TICKS_CAP"]
        max_ticks = min(int(data.get("max_ticks", scenario.max_ticks)), cap)
        log, rep, row = run_once(scenario, seed=scenario.seed, strict=bool(data.get("strict_success")),
                                 max_ticks=max_ticks)
        logger.info(f"HTTP run {scenario.name} seed={scenario.seed}: success_tick={rep.success_tick}")
        return jsonify({
            "scenario": scenario.name,
            "seed": scenario.seed,
            "ticks": max_ticks,
            "success_tick": rep.success_tick,
            "success_time_s": row["success_time_s"],
            "avg_speed_mps": rep.avg_speed,
            "mean_dbar_after_success": rep.mean_dbar_after_success,
            "collisions": rep.collisions,
        })
    except ScenarioError as e:
        return jsonify({"error": str(e)}), 400
    except Exception as e:
        logger.error(f"Run failed: {e}")
        return jsonify({"error": str(e)}), 500


@experiments_bp.route("/calibrate", methods=["POST"])
def create_calibration():
    try:
        data = request.get_json(force=True) or {}
        scenario = scenario_from_request(data)
        fits, _ = calibrate(CameraRig(), scenario.noise, stream(scenario.seed, "calibration"),
                            source=scenario.calibration_source)
        return jsonify(fits_to_dict(fits))
    except ScenarioError as e:
        return jsonify({"error": str(e)}), 400
    except Exception as e:
        logger.error(f"Calibration failed: {e}")
        return jsonify({"error": str(e)}), 500


def process_batch_background(job_id, scenario, seeds, distances, base_seed, checkpoints, workers):
    with extensions.jobs_lock:
        extensions.jobs[job_id]["status"] = "running"
    try:
        reports, table = run_batch(scenario, seeds, distances, base_seed=base_seed, workers=workers,
                                   checkpoints=checkpoints, preset=True)
        with extensions.jobs_lock:
            extensions.jobs[job_id].update(status="done", rows=records(reports), table=records(table))
        logger.info(f"📊 Batch {job_id} finished: {len(reports)} runs")
    except Exception as e:
        logger.error(f"⚠️ Batch {job_id} failed: {e}")
        with extensions.jobs_lock:
            extensions.jobs[job_id].update(status="error", error=str(e))


@experiments_bp.route("/batches", methods=["POST"])
def create_batch():
    try:
        data = request.get_json(force=True) or {}
        if "preset" not in data:
            return jsonify({"error": "Missing preset"}), 400
        scenario = build_preset(data["preset"])
        seeds = int(data.get("seeds", 1))
        if seeds < 1:
            return jsonify({"error": "seeds must be at least 1"}), 400
        distances = [float(d) for d in data.get("distances", [scenario.mean_initial_distance()])]
        checkpoints = [float(c) for c in data.get("checkpoints", metrics.DEFAULT_CHECKPOINTS)]
        base_seed = int(data.get("base_seed", 0))

        job_id = uuid.uuid4().hex
        extensions.remember_job(job_id, {"status": "queued", "preset": scenario.name, "rows": None,
                                         "table": None, "error": None},
                                current_app.config["VGSWARM_MAX_JOBS"])
        threading.Thread(
            target=process_batch_background,
            args=(job_id, scenario, seeds, distances, base_seed, checkpoints,
                  current_app.config["VGSWARM_WORKERS"]),
            daemon=True
        ).start()
        return jsonify({"status": "queued", "job_id": job_id}), 202
    except ScenarioError as e:
        return jsonify({"error": str(e)}), 400
    except Exception as e:
        logger.error(f"Batch submit failed: {e}")
        return jsonify({"error": str(e)}), 500


@experiments_bp.route("/batches/<job_id>", methods=["GET"])
def get_batch(job_id):
    with extensions.jobs_lock:
        job = extensions.jobs.get(job_id)
        job = dict(job) if job is not None else None
    if job is None:
        return jsonify({"error": f"unknown job {job_id}"}), 404
    return jsonify(dict(job, job_id=job_id))
