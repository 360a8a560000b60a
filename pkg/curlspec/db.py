# curlspec/db.py
"""运行目录：每次 CLI 运行一条 Run，产物（报告、谱、网格、矩阵）各一条 Artifact"""
from datetime import datetime
from functools import lru_cache
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

from sqlalchemy import (
    Column, Integer, String, Text, DateTime, ForeignKey,
    create_engine, event, Index, select
)
from sqlalchemy.orm import declarative_base, sessionmaker, relationship

from .config import DB_PATH
from .utils import sha1_file

Base = declarative_base()


class Run(Base):
    __tablename__ = "runs"

    id          = Column(Integer, primary_key=True, autoincrement=True)
    command     = Column(String, index=True, nullable=False)   # mesh / solve / oracle / verify
    domain      = Column(String, nullable=True)
    config_json = Column(Text, nullable=False)                 # RunConfig 全文
    config_hash = Column(String, index=True, nullable=False)
    exit_code   = Column(Integer, nullable=False, default=0)
    verdict     = Column(String, nullable=True)                # pass / fail / exploratory

    created_at  = Column(DateTime, nullable=False, default=datetime.utcnow)

    artifacts   = relationship("Artifact", back_populates="run", cascade="all, delete-orphan")

    __table_args__ = (
        Index("ix_runs_command_hash", "command", "config_hash"),
    )


class Artifact(Base):
    __tablename__ = "artifacts"

    id         = Column(Integer, primary_key=True, autoincrement=True)
    run_id     = Column(Integer, ForeignKey("runs.id", ondelete="CASCADE"), nullable=False)

    kind       = Column(String, index=True, nullable=False)  # report-md / report-json / spectrum / csv / mesh / matrix
    path       = Column(String, nullable=False)
    sha1       = Column(String, nullable=True)               # 内容哈希

    created_at = Column(DateTime, nullable=False, default=datetime.utcnow)

    run        = relationship("Run", back_populates="artifacts")


# --- Engine & Session ---
@lru_cache(maxsize=None)
def _engine(db_path: str):
    engine = create_engine(f"sqlite:///{db_path}", future=True, echo=False)

    # SQLite 外键
    @event.listens_for(engine, "connect")
    def _fk_pragma(dbapi_connection, connection_record):
        cursor = dbapi_connection.cursor()
        cursor.execute("PRAGMA foreign_keys=ON")
        cursor.close()

    return engine


def session_factory(db_path=None):
    engine = _engine(str(Path(db_path or DB_PATH)))
    return sessionmaker(bind=engine, autoflush=False, autocommit=False, expire_on_commit=False)


def init_db(db_path=None):
    path = Path(db_path or DB_PATH)
    path.parent.mkdir(parents=True, exist_ok=True)
    Base.metadata.create_all(bind=_engine(str(path)))


def record_run(
    command: str,
    config_json: str,
    config_hash: str,
    exit_code: int,
    artifacts: Iterable[Tuple[str, Path]] = (),
    domain: Optional[str] = None,
    verdict: Optional[str] = None,
    db_path=None,
) -> int:
    """写入一次运行及其产物；返回 run id"""
    init_db(db_path)
    Session = session_factory(db_path)
    with Session() as s:
        run = Run(command=command, domain=domain, config_json=config_json,
                  config_hash=config_hash, exit_code=exit_code, verdict=verdict)
        for kind, p in artifacts:
            p = Path(p)
            run.artifacts.append(Artifact(kind=kind, path=str(p), sha1=sha1_file(p) if p.exists() else None))
        s.add(run)
        s.commit()
        return run.id


def list_runs(limit: int = 20, db_path=None) -> List[dict]:
    init_db(db_path)
    Session = session_factory(db_path)
    with Session() as s:
        rows = s.execute(select(Run).order_by(Run.id.desc()).limit(limit)).scalars().all()
        return [
            {
                "id": r.id,
                "command": r.command,
                "domain": r.domain,
                "config_hash": r.config_hash,
                "exit_code": r.exit_code,
                "verdict": r.verdict,
                "created_at": r.created_at.isoformat(timespec="seconds"),
                "artifacts": [(a.kind, a.path, a.sha1) for a in r.artifacts],
            }
            for r in rows
        ]
