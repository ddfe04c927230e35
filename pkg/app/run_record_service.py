import logging
from typing import Optional, Sequence

from sqlmodel import col, func, select

from app.database import create_tables, get_session
from app.models import RunRecord

logger = logging.getLogger(__name__)


def save_run_records(records: Sequence[RunRecord], run_id: Optional[str] = None) -> int:
    """Persist a batch of run records, optionally stamping them with a run id."""
    if not records:
        return 0

    create_tables()
    with get_session() as session:
        for record in records:
            stored = RunRecord.model_validate(record.model_dump(exclude={"id"}))
            if run_id is not None:
                stored.run_id = run_id
            session.add(stored)
        session.commit()
    logger.info(f"Stored {len(records)} run records (run_id={run_id or records[0].run_id!r})")
    return len(records)


def get_all_run_records() -> list[RunRecord]:
    """All stored records in insertion order."""
    create_tables()
    with get_session() as session:
        statement = select(RunRecord).order_by(col(RunRecord.id))
        return list(session.exec(statement).all())


def get_run_records_by_scenario(scenario_id: str) -> list[RunRecord]:
    if not scenario_id:
        return []

    create_tables()
    with get_session() as session:
        statement = select(RunRecord).where(RunRecord.scenario_id == scenario_id).order_by(col(RunRecord.id))
        return list(session.exec(statement).all())


def get_run_records_by_run(run_id: str) -> list[RunRecord]:
    if not run_id:
        return []

    create_tables()
    with get_session() as session:
        statement = select(RunRecord).where(RunRecord.run_id == run_id).order_by(col(RunRecord.id))
        return list(session.exec(statement).all())


def get_run_records_count() -> int:
    create_tables()
    with get_session() as session:
        return session.exec(select(func.count()).select_from(RunRecord)).one()


def delete_run(run_id: str) -> int:
    """Delete every record of one run; returns how many were removed."""
    if not run_id:
        return 0

    create_tables()
    with get_session() as session:
        stored = session.exec(select(RunRecord).where(RunRecord.run_id == run_id)).all()
        for record in stored:
            session.delete(record)
        session.commit()
    logger.info(f"Deleted {len(stored)} run records for run {run_id}")
    return len(stored)
