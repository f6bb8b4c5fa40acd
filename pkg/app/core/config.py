from pathlib import Path
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv, find_dotenv
import logging

env_path = find_dotenv(usecwd=True)
if env_path:
    load_dotenv(dotenv_path=env_path, override=True)

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Process-wide settings read from the environment (or a .env file)"""

    # Output settings
    DEEPISP_OUTPUT_ROOT: Path = Path("runs")

    # Logging settings
    LOG_LEVEL: str = "INFO"

    # Imaging settings
    DEFAULT_BAYER_PATTERN: str = "RGGB"

    # Verification settings
    GRADCHECK_TOLERANCE: float = 1e-4

    model_config = SettingsConfigDict(case_sensitive=False, env_file=".env", extra="ignore")

    def resolve_output(self, path: Path) -> Path:
        """Resolve a relative output path against the output root"""
        path = Path(path)
        return path if path.is_absolute() else self.DEEPISP_OUTPUT_ROOT / path


settings = Settings()

logger.debug(f"Settings initialized: output root {settings.DEEPISP_OUTPUT_ROOT}")
