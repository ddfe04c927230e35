import os

from sqlmodel import Session, SQLModel, create_engine

from app.models import RunRecord  # noqa: F401  registers the run_records table

DATABASE_URL = os.environ.get("APP_DATABASE_URL", "sqlite:///runs.db")


def _connect_args(url: str) -> dict:
    if url.startswith("postgresql"):
        return {"connect_timeout": 15, "options": "-c statement_timeout=1000"}
    return {}


ENGINE = create_engine(DATABASE_URL, connect_args=_connect_args(DATABASE_URL))


def create_tables():
    SQLModel.metadata.create_all(ENGINE)


def get_session():
    return Session(ENGINE)


def reset_db():
    """Wipe all tables in the database. Use with caution - for testing only!"""
    SQLModel.metadata.drop_all(ENGINE)
    SQLModel.metadata.create_all(ENGINE)
