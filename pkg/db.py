import json
import sqlite3
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional

if TYPE_CHECKING:
    from harness.metrics import MetricsRow
    from harness.threshold import ThresholdEstimate


def _db_path() -> Path:
    from config import settings
    p = Path(settings.db_path).expanduser()
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def get_conn() -> sqlite3.Connection:
    conn = sqlite3.connect(str(_db_path()))
    conn.row_factory = sqlite3.Row
    conn.execute("PRAGMA foreign_keys = ON")
    return conn


def init_db() -> None:
    with get_conn() as conn:
        conn.executescript("""
            CREATE TABLE IF NOT EXISTS runs (
                id          INTEGER PRIMARY KEY AUTOINCREMENT,
                created_at  TEXT    NOT NULL,
                command     TEXT    NOT NULL,
                config      TEXT    NOT NULL,
                output_path TEXT,
                status      TEXT    NOT NULL DEFAULT 'running'
            );

            CREATE TABLE IF NOT EXISTS metrics (
                id                 INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id             INTEGER NOT NULL REFERENCES runs(id),
                decoder            TEXT    NOT NULL,
                L                  INTEGER NOT NULL,
                p                  REAL    NOT NULL,
                p_train            REAL,
                samples            INTEGER NOT NULL,
                accuracy           REAL    NOT NULL,
                loss               REAL,
                seconds_per_decode REAL    NOT NULL
            );

            CREATE TABLE IF NOT EXISTS thresholds (
                id        INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id    INTEGER NOT NULL REFERENCES runs(id),
                p_cross   REAL,
                pairs     TEXT    NOT NULL,
                crossings TEXT    NOT NULL,
                residual  REAL
            );
        """)


# ── runs ──────────────────────────────────────────────────────────────────────

def start_run(command: str, config: dict[str, Any], output_path: Optional[str] = None) -> int:
    now = datetime.now(timezone.utc).isoformat()
    with get_conn() as conn:
        cur = conn.execute(
            "INSERT INTO runs (created_at, command, config, output_path) VALUES (?,?,?,?)",
            (now, command, json.dumps(config, sort_keys=True, default=str), output_path),
        )
        return cur.lastrowid


def finish_run(run_id: int, status: str, output_path: Optional[str] = None) -> None:
    with get_conn() as conn:
        conn.execute(
            "UPDATE runs SET status=?, output_path=COALESCE(?, output_path) WHERE id=?",
            (status, output_path, run_id),
        )


def get_runs(limit: int = 10) -> list[dict]:
    with get_conn() as conn:
        rows = conn.execute(
            "SELECT * FROM runs ORDER BY id DESC LIMIT ?",
            (limit,),
        ).fetchall()
    return [dict(r) for r in rows]


# ── metrics + thresholds ──────────────────────────────────────────────────────

def save_metrics(run_id: int, rows: "list[MetricsRow]") -> None:
    with get_conn() as conn:
        conn.executemany(
            """INSERT INTO metrics
               (run_id, decoder, L, p, p_train, samples, accuracy, loss, seconds_per_decode)
               VALUES (:run_id, :decoder, :L, :p, :p_train, :samples, :accuracy, :loss, :seconds_per_decode)""",
            [{"run_id": run_id, **asdict(row)} for row in rows],
        )


def save_threshold(run_id: int, estimate: "ThresholdEstimate") -> None:
    with get_conn() as conn:
        conn.execute(
            "INSERT INTO thresholds (run_id, p_cross, pairs, crossings, residual) VALUES (?,?,?,?,?)",
            (
                run_id,
                estimate.p_cross,
                json.dumps(estimate.pairs),
                json.dumps(estimate.crossings),
                estimate.residual,
            ),
        )


def get_run_metrics(run_id: int) -> list[dict]:
    with get_conn() as conn:
        rows = conn.execute(
            "SELECT * FROM metrics WHERE run_id=? ORDER BY id",
            (run_id,),
        ).fetchall()
    return [dict(r) for r in rows]


def get_run_threshold(run_id: int) -> Optional[dict]:
    with get_conn() as conn:
        row = conn.execute(
            "SELECT * FROM thresholds WHERE run_id=? ORDER BY id DESC LIMIT 1",
            (run_id,),
        ).fetchone()
    return dict(row) if row else None
