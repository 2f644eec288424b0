"""
Results store: engine lifecycle and sessions for stored campaigns

One store is open per process. SQLite files get their parent directory
created and foreign keys switched on, so trial rows always point at a
stored campaign.
"""

import logging
import os
from contextlib import contextmanager
from typing import Optional

from sqlalchemy import create_engine, event
from sqlalchemy.engine import Engine, make_url
from sqlalchemy.exc import ArgumentError, SQLAlchemyError
from sqlalchemy.orm import scoped_session, sessionmaker
from sqlalchemy.pool import NullPool

from config import Config
from models.campaign_record import Base

logger = logging.getLogger(__name__)

_engine: Optional[Engine] = None
_session_factory: Optional[scoped_session] = None


def _enable_sqlite_foreign_keys(dbapi_connection, _record):
    cursor = dbapi_connection.cursor()
    cursor.execute("PRAGMA foreign_keys=ON")
    cursor.close()


def _open_engine(url: str) -> Engine:
    parsed = make_url(url)
    is_sqlite = parsed.get_backend_name() == 'sqlite'
    if is_sqlite and parsed.database and parsed.database != ':memory:':
        directory = os.path.dirname(os.path.abspath(parsed.database))
        os.makedirs(directory, exist_ok=True)
    # CLI runs are short-lived, no pooled connections
    engine = create_engine(parsed, poolclass=NullPool, echo=Config.SQLALCHEMY_ECHO)
    if is_sqlite:
        event.listen(engine, 'connect', _enable_sqlite_foreign_keys)
    return engine


def init_database(url: Optional[str] = None) -> bool:
    """
    Open the results store at `url` (default SSLASSO_RESULTS_DATABASE_URL)
    and create the campaign tables. An already open store is closed first.

    Returns:
        True when the store is usable
    """
    global _engine, _session_factory

    url = url or Config.RESULTS_DATABASE_URL
    if not url:
        logger.error("No results database URL configured (SSLASSO_RESULTS_DATABASE_URL)")
        return False
    close_database()

    try:
        engine = _open_engine(url)
        Base.metadata.create_all(engine)
    except (ArgumentError, SQLAlchemyError, OSError) as e:
        logger.error(f"Results store {url!r} could not be opened: {e}")
        return False

    _engine = engine
    _session_factory = scoped_session(sessionmaker(bind=engine, autoflush=False))
    logger.info(f"Results store ready at {engine.url.render_as_string(hide_password=True)}")
    return True


def get_session():
    """Session on the open store, opening the configured one on first use"""
    if _session_factory is None and not init_database():
        raise RuntimeError("Results database is not available")
    return _session_factory()


@contextmanager
def get_db_session():
    """
    Session scope for results-store work: commit on success, rollback on error.

        with get_db_session() as session:
            CampaignRepository(session).find_recent()
    """
    session = get_session()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()


def close_database():
    """Drop the session registry and dispose of the engine"""
    global _engine, _session_factory
    if _session_factory is not None:
        _session_factory.remove()
        _session_factory = None
    if _engine is not None:
        _engine.dispose()
        _engine = None
        logger.info("Results store closed")
