import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from app.config.settings import settings

logger = logging.getLogger(__name__)


class LocalRunLogger:
    """Writes one JSON manifest per run, filed by month and day."""

    def __init__(self, root: Optional[Path] = None) -> None:
        self._root = Path(root) if root is not None else Path(settings.OUTPUT_DIR)

    def path_for(self, run_id: str, now: Optional[datetime] = None) -> Path:
        now = now or datetime.now(timezone.utc)
        month_folder = now.strftime("%b %Y")      # "Nov 2025"
        date_folder = now.strftime("%d-%m-%Y")    # "27-11-2025"
        timestamp = now.strftime("%H-%M-%S")
        return self._root / month_folder / date_folder / f"{run_id}_{timestamp}.json"

    def log(self, run_id: str, data: dict) -> Optional[Path]:
        path = self.path_for(run_id)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(data, default=str, indent=2), encoding="utf-8")
        except OSError:
            logger.exception("[%s] Run log could not be written to %s", run_id, path)
            return None
        return path
