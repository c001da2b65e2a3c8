import importlib.resources
import os
from pathlib import Path
from typing import Literal, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


def get_package_dir(name: str) -> Path:
    """
    Tries to find a package resource folder via importlib (installed package),
    falls back to a path relative to this file (local dev).
    """
    try:
        ref = importlib.resources.files("attriqa").joinpath(name)
        path = Path(str(ref))
        if path.exists() and path.is_dir():
            return path
    except (ImportError, TypeError, ValueError, ModuleNotFoundError):
        pass

    # attriqa/config/settings.py -> attriqa/<name>
    local_path = Path(__file__).resolve().parent.parent / name
    if local_path.exists():
        return local_path

    # Last resort: relative to the working directory
    return Path("attriqa") / name


class Settings(BaseSettings):
    # Default root for relative data paths (ATTRIQA_DATA_ROOT)
    data_root: Path = Path(".")

    # Run ledger
    db_path: Path = Path("attriqa_runs.db")
    db_echo: bool = False

    # Parallelism; None means available cores
    workers: Optional[int] = None

    templates_dir: Path = get_package_dir("templates")
    shipped_data_dir: Path = get_package_dir("data")

    # Logging
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="ATTRIQA_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    def resolve_workers(self, requested: Optional[int] = None) -> int:
        workers = requested or self.workers or os.cpu_count() or 1
        return max(1, int(workers))

    def resolve_path(self, path: Path | str) -> Path:
        path = Path(path)
        if path.is_absolute():
            return path
        return self.data_root / path


# Singleton instance
settings = Settings()


def get_db_url(db_path: Path | None = None) -> str:
    return f"sqlite:///{db_path or settings.db_path}"
