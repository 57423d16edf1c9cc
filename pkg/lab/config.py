"""
実験設定管理モジュール
INIファイル・JSON設定・コマンドライン引数の優先順位を一元化
"""

import configparser
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

from . import __version__
from .core.exceptions import ValidationError
from .core.validators import InputValidator
from .core.windtree import FamilySpec, WindtreeTable, sample_table

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = "windtree_runner_config.ini"
# 障害物のない診断用テーブルを表す族指定
EMPTY_FAMILY = ("empty", "n=0")
# config_hash に含めないキー（結果に影響しない）
UNHASHED = frozenset({"workers", "output_dir", "db_path", "log_level", "skip_unchanged"})


@dataclass(frozen=True)
class ExperimentConfig:
    """実験の実効パラメータ"""

    family: str = "n=1"
    n_tables: int = 5
    n_directions: int = 50
    T_flow: float = 1e6
    lyap_iterations: int = 100_000
    lyap_chains: int = 1
    seed: int = 0
    workers: int = 1
    envelope: bool = False
    max_stderr: float = 0.25
    output_dir: str = "results"
    db_path: str = "results/windtree_cache.db"
    log_level: str = "INFO"
    skip_unchanged: bool = True

    def __post_init__(self):
        for name in ("n_tables", "n_directions", "T_flow", "lyap_iterations", "lyap_chains"):
            InputValidator.validate_positive(name, getattr(self, name))
        InputValidator.validate_positive("max_stderr", self.max_stderr)
        InputValidator.validate_workers(self.workers)
        if self.seed < 0:
            raise ValidationError("seed は0以上である必要があります")
        # 族指定の形式をここで検証する
        self.family_spec

    @property
    def is_empty(self) -> bool:
        return self.family.strip().lower().replace(" ", "") in EMPTY_FAMILY

    @property
    def family_spec(self) -> Optional[FamilySpec]:
        """族（診断用の空テーブルの場合は None）"""
        if self.is_empty:
            return None
        return FamilySpec.parse(self.family)

    def table(self, seed: int) -> WindtreeTable:
        """seed から族のテーブルを生成"""
        spec = self.family_spec
        if spec is None:
            return WindtreeTable((), seed)
        return sample_table(spec, seed)

    def parameters(self) -> Dict[str, Any]:
        """結果に影響するパラメータ"""
        return {key: value for key, value in asdict(self).items() if key not in UNHASHED}

    def config_hash(self) -> str:
        """パラメータの正規化JSONに対する sha256 の先頭12桁"""
        canonical = json.dumps(self.parameters(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    @property
    def version(self) -> str:
        return __version__

    def stamp(self) -> Dict[str, str]:
        """CSV の各行に付ける識別情報"""
        return {"config_hash": self.config_hash(), "version": self.version}

    def output_path(self, name: str) -> Path:
        path = Path(self.output_dir) / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """None 以外の値で上書きした設定"""
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ValidationError(f"未知の設定項目です: {', '.join(unknown)}")
        changes = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **changes) if changes else self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


class RunnerConfig:
    """INI設定ファイル管理クラス"""

    def __init__(self, config_file: Union[str, Path] = DEFAULT_CONFIG_FILE):
        self.config_file = Path(config_file)
        self.config = configparser.ConfigParser()
        self.load_config()

    def load_config(self):
        """設定ファイルを読み込み"""
        if self.config_file.exists():
            self.config.read(self.config_file, encoding="utf-8")
        else:
            self.create_default_config()

    def create_default_config(self):
        """デフォルト設定ファイルを作成"""
        defaults = ExperimentConfig()
        self.config["Experiment"] = {
            "family": defaults.family,
            "n_tables": str(defaults.n_tables),
            "seed": str(defaults.seed),
            "workers": str(defaults.workers),
        }
        self.config["Billiard"] = {
            "n_directions": str(defaults.n_directions),
            "t_flow": f"{defaults.T_flow:g}",
            "envelope": str(defaults.envelope).lower(),
            "max_stderr": str(defaults.max_stderr),
        }
        self.config["Lyapunov"] = {
            "iterations": str(defaults.lyap_iterations),
            "chains": str(defaults.lyap_chains),
        }
        self.config["Paths"] = {
            "output_directory": defaults.output_dir,
            "db_path": defaults.db_path,
        }
        self.config["Options"] = {
            "log_level": defaults.log_level,
            "skip_unchanged": str(defaults.skip_unchanged).lower(),
        }
        self.save_config()
        logger.info("created default config %s", self.config_file)

    def save_config(self):
        """設定ファイルを保存"""
        self.config_file.parent.mkdir(parents=True, exist_ok=True)
        with open(self.config_file, "w", encoding="utf-8") as f:
            self.config.write(f)

    def to_experiment(self) -> ExperimentConfig:
        """INIの値から ExperimentConfig を作成"""
        defaults = ExperimentConfig()
        c = self.config
        return ExperimentConfig(
            family=c.get("Experiment", "family", fallback=defaults.family),
            n_tables=c.getint("Experiment", "n_tables", fallback=defaults.n_tables),
            seed=c.getint("Experiment", "seed", fallback=defaults.seed),
            workers=c.getint("Experiment", "workers", fallback=defaults.workers),
            n_directions=c.getint("Billiard", "n_directions", fallback=defaults.n_directions),
            T_flow=c.getfloat("Billiard", "t_flow", fallback=defaults.T_flow),
            envelope=c.getboolean("Billiard", "envelope", fallback=defaults.envelope),
            max_stderr=c.getfloat("Billiard", "max_stderr", fallback=defaults.max_stderr),
            lyap_iterations=c.getint("Lyapunov", "iterations", fallback=defaults.lyap_iterations),
            lyap_chains=c.getint("Lyapunov", "chains", fallback=defaults.lyap_chains),
            output_dir=c.get("Paths", "output_directory", fallback=defaults.output_dir),
            db_path=c.get("Paths", "db_path", fallback=defaults.db_path),
            log_level=c.get("Options", "log_level", fallback=defaults.log_level),
            skip_unchanged=c.getboolean(
                "Options", "skip_unchanged", fallback=defaults.skip_unchanged
            ),
        )


def load_json_overrides(path: Union[str, Path]) -> Dict[str, Any]:
    """
    JSON設定ファイルを読み込み

    Raises:
        ValidationError: ファイルが読めない、またはオブジェクトでない場合
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"JSON設定ファイルを読み込めません: {path} ({e})")
    if not isinstance(payload, dict):
        raise ValidationError("JSON設定ファイルはオブジェクトである必要があります")
    return payload


def load_config(
    ini_path: Union[str, Path] = DEFAULT_CONFIG_FILE,
    json_path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    実効設定を組み立てる

    優先順位は コマンドライン引数 > JSON設定 > INI設定 です。

    Raises:
        ValidationError: 値が不正な場合
    """
    config = RunnerConfig(ini_path).to_experiment()
    if json_path is not None:
        config = config.with_overrides(**load_json_overrides(json_path))
    if overrides:
        config = config.with_overrides(**overrides)
    logger.debug("effective config %s: %s", config.config_hash(), config.parameters())
    return config
