from functools import lru_cache
from pathlib import Path

from sqlalchemy.engine import Engine
from sqlmodel import SQLModel, create_engine

from attriqa.config.settings import get_db_url, settings


@lru_cache(maxsize=8)
def _engine(url: str, echo: bool) -> Engine:
    return create_engine(url, echo=echo)


def get_engine(db_path: Path | None = None) -> Engine:
    return _engine(get_db_url(db_path), settings.db_echo)


def init_db(db_path: Path | None = None) -> Engine:
    """Create tables if they don't exist."""
    engine = get_engine(db_path)
    SQLModel.metadata.create_all(engine)
    return engine
