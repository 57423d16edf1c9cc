"""
pytest configuration file
テスト全体で共有するfixtureを定義
"""

import sys
import tempfile
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from lab.config import ExperimentConfig  # noqa: E402
from lab.core.store import ResultStore  # noqa: E402
from lab.core.windtree import WindtreeTable, rectangle, unfold  # noqa: E402


@pytest.fixture
def temp_dir():
    """一時ディレクトリを作成するfixture"""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def sample_config_file(temp_dir):
    """サンプル設定ファイルを作成するfixture"""
    config_content = """[Experiment]
family = n=2
n_tables = 3
seed = 7
workers = 2

[Billiard]
n_directions = 10
t_flow = 8192

[Paths]
output_directory = ./out
db_path = ./out/cache.db
"""
    config_path = temp_dir / "config.ini"
    config_path.write_text(config_content, encoding="utf-8")
    return config_path


@pytest.fixture
def memory_store():
    """メモリ上の結果ストア"""
    return ResultStore(":memory:")


@pytest.fixture
def empty_config(temp_dir):
    """障害物のない診断用テーブルの小さな実験設定"""
    return ExperimentConfig(
        family="empty",
        n_tables=2,
        n_directions=4,
        T_flow=4096.0,
        output_dir=str(temp_dir / "results"),
        db_path=str(temp_dir / "results" / "cache.db"),
    )


@pytest.fixture
def rectangle_table():
    """長方形の障害物1つのテーブル"""
    return WindtreeTable((rectangle(0.2, 0.3, 0.4, 0.25),), seed=0)


@pytest.fixture
def rectangle_unfolding(rectangle_table):
    """長方形テーブルの展開曲面"""
    return unfold(rectangle_table)
