import logging
from pathlib import Path
from typing import Optional

import yaml

from app.config.settings import settings

logger = logging.getLogger(__name__)


class PresetRegistry:
    _cache = {}

    @classmethod
    def load(cls, base: Optional[Path] = None):
        base = Path(base) if base is not None else Path(settings.PRESET_DIR)

        for file in sorted(base.rglob("*.yaml")):
            try:
                text = file.read_text(encoding="utf-8")
            except UnicodeDecodeError as e:
                raise RuntimeError(
                    f"Invalid encoding in preset file: {file}. "
                    "All preset YAML files must be UTF-8 encoded."
                ) from e

            data = yaml.safe_load(text)

            if not data or "preset_id" not in data or "version" not in data:
                raise ValueError(
                    f"Invalid preset definition in {file}. "
                    "Missing required fields: preset_id/version."
                )

            key = f"{data['preset_id']}:{data['version']}"
            cls._cache[key] = data
        logger.debug("Loaded %d presets from %s", len(cls._cache), base)

    @classmethod
    def get(cls, preset_id: str, version: str = "v1"):
        if not cls._cache:
            cls.load()
        key = f"{preset_id}:{version}"
        if key not in cls._cache:
            raise KeyError(f"Preset not found: {key}")
        return cls._cache[key]

    @classmethod
    def flow_config(cls, preset_id: str, version: str = "v1") -> dict:
        """The `flow` block of a preset, ready for FlowConfig.model_validate."""
        data = cls.get(preset_id, version)
        if "flow" not in data:
            raise ValueError(f"Preset {preset_id}:{version} has no flow block")
        return dict(data["flow"])
