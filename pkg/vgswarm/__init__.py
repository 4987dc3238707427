from flask import Flask
from dotenv import load_dotenv
load_dotenv()
from .config import Config
from .extensions import init_extensions


def create_app(overrides=None):
    app = Flask(__name__)
    app.config.from_object(Config)
    if overrides:
        app.config.update(overrides)

    init_extensions(app)

    # Blueprints
    from .routes.experiments import experiments_bp
    from .routes.stats import stats_bp

    app.register_blueprint(experiments_bp, url_prefix="/api")
    app.register_blueprint(stats_bp, url_prefix="/api")

    # Health check
    @app.route("/health")
    def health():
        from .core.scenario import PRESETS
        return {"status": "ok", "presets": len(PRESETS)}

    return app
