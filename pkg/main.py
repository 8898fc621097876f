import logging
import sys

from app.config.settings import settings

# Configure root logging once
logging.basicConfig(
    level=settings.LOG_LEVEL,
    format="[%(asctime)s] %(levelname)s - %(name)s - %(message)s",
)

from app.api.cli import run  # noqa: E402

logger = logging.getLogger(__name__)


if __name__ == "__main__":
    logger.debug("Lawson toolkit starting, outputs under %s", settings.OUTPUT_DIR)
    sys.exit(run())
