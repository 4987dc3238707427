import logging
import os

_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


def _level_from_env():
    level = os.getenv("VGSWARM_LOG", "INFO").upper()
    return level if level in _LEVELS else "INFO"


logging.basicConfig(
    level=_level_from_env(),
    format="%(asctime)s | %(levelname)s | %(message)s"
)

logger = logging.getLogger("vgswarm")
logger.setLevel(_level_from_env())
