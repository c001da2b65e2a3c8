from datetime import datetime, timezone
from typing import Optional

from sqlmodel import Field, SQLModel


def _now() -> datetime:
    return datetime.now(timezone.utc)


class RunRecord(SQLModel, table=True):
    id: Optional[int] = Field(default=None, primary_key=True)
    command: str = Field(index=True)
    started_at: datetime = Field(default_factory=_now)
    completed_at: Optional[datetime] = None
    status: str = "running"  # running | ok | failed
    exit_code: Optional[int] = None
    out_dir: Optional[str] = None
    config_digest: Optional[str] = None
    notes: Optional[str] = None
