"""
LACK experiment application

Wires the SQLAlchemy results store. The CLI (app.cli), the experiment runner
(app.experiment) and the figure datasets (app.figures) live in this package.
"""

import logging

from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from app.models import Base

logger = logging.getLogger(__name__)

DEFAULT_STORE_URL: str = "sqlite://"


def init_store(url: str = DEFAULT_STORE_URL) -> sessionmaker:
    """
    Create the results tables if needed and return a session factory.

    Args:
        url (str): SQLAlchemy database URL; the default is an in-memory SQLite store.

    Returns:
        sessionmaker: Factory bound to the store's engine.
    """
    engine = create_engine(url)
    Base.metadata.create_all(engine)
    logger.info("results store ready at %s", engine.url.render_as_string(hide_password=True))
    return sessionmaker(bind=engine)
