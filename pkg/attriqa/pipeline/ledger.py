import logging
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

from sqlalchemy.exc import SQLAlchemyError
from sqlmodel import Session, select

from attriqa.db.engine import init_db
from attriqa.db.models import RunRecord
from attriqa.errors import AttriqaError

logger = logging.getLogger(__name__)


def _save(record: RunRecord) -> RunRecord | None:
    try:
        with Session(init_db()) as session:
            session.add(record)
            session.commit()
            session.refresh(record)
            return record
    except SQLAlchemyError as e:
        logger.warning(f"Run ledger unavailable: {e}")
        return None


@contextmanager
def recorded_run(command: str, out_dir: Path | None = None, config_digest: str | None = None):
    """Record a RunRecord row around a command; the command's outcome is never changed."""
    record = _save(
        RunRecord(
            command=command,
            out_dir=str(out_dir) if out_dir else None,
            config_digest=config_digest,
        )
    )
    try:
        yield record
    except BaseException as e:
        if record is not None:
            record.status = "failed"
            record.exit_code = e.exit_code if isinstance(e, AttriqaError) else 1
            record.notes = str(e)[:500]
            record.completed_at = datetime.now(timezone.utc)
            _save(record)
        raise
    if record is not None:
        record.status = "ok"
        record.exit_code = 0
        record.completed_at = datetime.now(timezone.utc)
        _save(record)


def recent_runs(limit: int = 20) -> list[RunRecord]:
    try:
        with Session(init_db()) as session:
            stmt = select(RunRecord).order_by(RunRecord.id.desc()).limit(limit)
            return list(session.exec(stmt).all())
    except SQLAlchemyError as e:
        logger.warning(f"Run ledger unavailable: {e}")
        return []
