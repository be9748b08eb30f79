"""
Database models for the run ledger
"""

import json
import logging
from datetime import datetime, timedelta
from typing import Any, Dict, List, Optional, Sequence

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text, create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

Base = declarative_base()


class RunManifestModel(Base):
    """Database model for one CLI invocation"""
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True)
    subcommand = Column(String(20), nullable=False)
    out_dir = Column(Text)
    tool_version = Column(String(20))
    seeds = Column(Text)          # JSON
    config = Column(Text)         # JSON
    outputs = Column(Text)        # JSON

    status = Column(String(20))   # running, ok, failed
    started_at = Column(String(40))
    finished_at = Column(String(40))
    wall_seconds = Column(Float)

    recorded_at = Column(DateTime, default=datetime.utcnow)


class RunSummaryModel(Base):
    """Database model for one summary row of a run (per problem or per variant)"""
    __tablename__ = 'run_summaries'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('runs.id'), nullable=False)
    subject = Column(String(50))      # problem id or planner variant
    algorithm = Column(String(20))
    best_value = Column(Float)        # median final fitness, best LFV or mean path length
    payload = Column(Text)            # full summary row as JSON

    recorded_at = Column(DateTime, default=datetime.utcnow)


class DatabaseManager:
    """Database manager for the run ledger"""

    def __init__(self, database_url: str = None):
        if database_url is None:
            from swarmforge.core.config import PROJECT_ROOT, config
            db_config = config.get_database_config()
            db_path = PROJECT_ROOT / db_config.get('path', 'data/swarmforge.db')
            db_path.parent.mkdir(parents=True, exist_ok=True)
            database_url = f"sqlite:///{db_path}"

        self.engine = create_engine(database_url, echo=False)
        self.SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=self.engine)

        # Create tables
        self.create_tables()

    def create_tables(self):
        """Create all database tables"""
        try:
            Base.metadata.create_all(bind=self.engine)
            logging.debug("Database tables created successfully")
        except Exception as e:
            logging.error(f"Error creating database tables: {e}")

    def get_session(self):
        """Get a database session"""
        return self.SessionLocal()

    def store_manifest(self, manifest) -> Optional[int]:
        """Store a RunManifest; returns the run id or None on failure"""
        session = None
        try:
            session = self.get_session()

            db_run = RunManifestModel(
                subcommand=manifest.subcommand,
                out_dir=manifest.out_dir,
                tool_version=manifest.tool_version,
                seeds=json.dumps(manifest.seeds),
                config=json.dumps(manifest.config),
                outputs=json.dumps(manifest.outputs),
                status=manifest.status,
                started_at=manifest.started_at,
                finished_at=manifest.finished_at,
                wall_seconds=manifest.timing.get('total_seconds'),
            )

            session.add(db_run)
            session.commit()
            run_id = db_run.id
            session.close()

            logging.debug(f"Stored run {run_id}: {manifest.subcommand} -> {manifest.out_dir}")
            return run_id

        except Exception as e:
            logging.error(f"Error storing run manifest: {e}")
            if session:
                session.rollback()
                session.close()
            return None

    def store_summaries(self, run_id: int, rows: Sequence[Dict[str, Any]], subject_key: str,
                        value_key: str, algorithm: str = None) -> int:
        """Store summary rows for a run; returns the number stored"""
        session = None
        try:
            session = self.get_session()

            for row in rows:
                value = row.get(value_key)
                session.add(RunSummaryModel(
                    run_id=run_id,
                    subject=str(row.get(subject_key, "")),
                    algorithm=algorithm or row.get('algorithm'),
                    best_value=float(value) if value is not None else None,
                    payload=json.dumps(row, default=str),
                ))

            session.commit()
            session.close()

            logging.debug(f"Stored {len(rows)} summary rows for run {run_id}")
            return len(rows)

        except Exception as e:
            logging.error(f"Error storing run summaries: {e}")
            if session:
                session.rollback()
                session.close()
            return 0

    def get_recent_runs(self, limit: int = 20, subcommand: str = None) -> List[RunManifestModel]:
        """Get recent runs, newest first"""
        try:
            session = self.get_session()

            query = session.query(RunManifestModel)
            if subcommand:
                query = query.filter(RunManifestModel.subcommand == subcommand)
            runs = query.order_by(RunManifestModel.id.desc()).limit(limit).all()

            session.close()
            return runs

        except Exception as e:
            logging.error(f"Error retrieving runs: {e}")
            return []

    def get_summaries(self, run_id: int) -> List[Dict[str, Any]]:
        """Summary rows of one run, decoded"""
        try:
            session = self.get_session()

            rows = session.query(RunSummaryModel)\
                .filter(RunSummaryModel.run_id == run_id)\
                .order_by(RunSummaryModel.id)\
                .all()

            session.close()
            return [json.loads(row.payload) for row in rows]

        except Exception as e:
            logging.error(f"Error retrieving summaries for run {run_id}: {e}")
            return []

    def cleanup_old_records(self, days_to_keep: int = 30):
        """Clean up old runs and their summaries"""
        session = None
        try:
            session = self.get_session()

            cutoff_time = datetime.utcnow() - timedelta(days=days_to_keep)
            old_ids = [row.id for row in session.query(RunManifestModel.id)
                       .filter(RunManifestModel.recorded_at < cutoff_time)]

            old_summaries = session.query(RunSummaryModel)\
                .filter(RunSummaryModel.run_id.in_(old_ids))\
                .delete(synchronize_session=False)
            old_runs = session.query(RunManifestModel)\
                .filter(RunManifestModel.id.in_(old_ids))\
                .delete(synchronize_session=False)

            session.commit()
            session.close()

            logging.info(f"Cleaned up {old_runs} old runs and {old_summaries} summary rows")

        except Exception as e:
            logging.error(f"Error cleaning up old records: {e}")
            if session:
                session.rollback()
                session.close()
