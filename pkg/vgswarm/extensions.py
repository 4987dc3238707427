import threading

from flask_cors import CORS

# batch jobs started over HTTP: {job_id: {"status", "preset", "rows", "table", "error"}}
jobs = {}
jobs_lock = threading.Lock()

FINISHED = ("done", "error")


def remember_job(job_id, job, max_jobs):
    """Register a job; past max_jobs the oldest finished jobs are forgotten."""
    with jobs_lock:
        jobs[job_id] = job
        finished = [key for key, value in jobs.items() if value["status"] in FINISHED]
        for key in finished[:max(len(jobs) - max_jobs, 0)]:
            del jobs[key]


def init_extensions(app):
    CORS(
        app,
        resources={r"/*": {
            "origins": app.config.get("CORS_ORIGINS", "*")
        }},
        supports_credentials=True
    )
