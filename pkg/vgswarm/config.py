import os


class Config:
    VGSWARM_LOG = os.getenv("VGSWARM_LOG", "INFO")
    VGSWARM_OUT_DIR = os.getenv("VGSWARM_OUT_DIR", "runs")
    VGSWARM_WORKERS = int(os.getenv("VGSWARM_WORKERS", "1"))
    VGSWARM_MAX_TICKS_CAP = int(os.getenv("VGSWARM_MAX_TICKS_CAP", "2000"))
    VGSWARM_MAX_JOBS = int(os.getenv("VGSWARM_MAX_JOBS", "100"))

    CORS_ORIGINS = os.getenv("CORS_ORIGINS", "*")
    PORT = int(os.getenv("PORT", "5050"))
