"""
結果キャッシュ管理モジュール
SQLite接続とジョブ結果の保存・再利用の抽象化
"""

import json
import logging
import sqlite3
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .exceptions import StoreError

logger = logging.getLogger(__name__)


class ResultStore:
    """(config_hash, job_key) をキーとするジョブ結果のキャッシュ"""

    def __init__(self, db_path: Union[str, Path], timeout: float = 10.0):
        """
        初期化

        Args:
            db_path: データベースファイルのパス（":memory:" も可）
            timeout: 接続タイムアウト（秒）
        """
        self.timeout = timeout
        self._memory: Optional[sqlite3.Connection] = None
        if str(db_path) == ":memory:":
            self.db_path = ":memory:"
            self._memory = sqlite3.connect(":memory:", timeout=timeout)
            self._memory.row_factory = sqlite3.Row
        else:
            self.db_path = Path(db_path)
            self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self.init_database()

    @contextmanager
    def get_connection(self):
        """
        安全なデータベース接続を提供するコンテキストマネージャー

        成功時にコミット、失敗時にロールバックします。

        Raises:
            StoreError: データベース操作エラー
        """
        conn = self._memory
        try:
            if conn is None:
                conn = sqlite3.connect(self.db_path, timeout=self.timeout)
                conn.row_factory = sqlite3.Row
            yield conn
            conn.commit()
        except sqlite3.Error as e:
            if conn:
                conn.rollback()
            raise StoreError(f"sqlite error on {self.db_path}: {e}")
        finally:
            if conn is not None and conn is not self._memory:
                conn.close()

    def init_database(self):
        """テーブルを作成"""
        with self.get_connection() as conn:
            conn.execute(
                """
                CREATE TABLE IF NOT EXISTS results (
                    config_hash TEXT NOT NULL,
                    job_key TEXT NOT NULL,
                    payload TEXT NOT NULL,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
                    PRIMARY KEY (config_hash, job_key)
                )
                """
            )

    def get(self, config_hash: str, job_key: str) -> Optional[Dict[str, Any]]:
        """保存済みの結果（なければ None）"""
        with self.get_connection() as conn:
            row = conn.execute(
                "SELECT payload FROM results WHERE config_hash = ? AND job_key = ?",
                (config_hash, job_key),
            ).fetchone()
        return json.loads(row["payload"]) if row else None

    def has(self, config_hash: str, job_key: str) -> bool:
        return self.get(config_hash, job_key) is not None

    def put(self, config_hash: str, job_key: str, payload: Dict[str, Any]):
        """結果を保存（同じキーは上書き）"""
        with self.get_connection() as conn:
            conn.execute(
                "INSERT OR REPLACE INTO results (config_hash, job_key, payload) VALUES (?, ?, ?)",
                (config_hash, job_key, json.dumps(payload, sort_keys=True)),
            )
        logger.debug("stored %s/%s", config_hash, job_key)

    def job_keys(self, config_hash: str) -> List[str]:
        with self.get_connection() as conn:
            rows = conn.execute(
                "SELECT job_key FROM results WHERE config_hash = ? ORDER BY job_key",
                (config_hash,),
            ).fetchall()
        return [row["job_key"] for row in rows]

    def clear(self, config_hash: Optional[str] = None) -> int:
        """結果を削除（config_hash 省略時は全件）"""
        with self.get_connection() as conn:
            if config_hash is None:
                cursor = conn.execute("DELETE FROM results")
            else:
                cursor = conn.execute("DELETE FROM results WHERE config_hash = ?", (config_hash,))
            return cursor.rowcount
