"""
windtree_runner.pyのユニットテスト
コマンドライン引数とサブコマンドのテスト
"""

import json
import sys
from pathlib import Path

import pytest

# プロジェクトルートをパスに追加
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

import windtree_runner  # noqa: E402
from lab.config import ExperimentConfig  # noqa: E402
from lab.core.exceptions import ValidationError  # noqa: E402
from lab.core.flat import StratumSignature  # noqa: E402
from lab.core.rauzy import ExponentReport  # noqa: E402
from windtree_runner import (  # noqa: E402
    OVERRIDES,
    build_parser,
    cmd_equations,
    cmd_lyapunov,
    cmd_sample,
)


class TestParser:
    """引数定義のテスト"""

    def test_overrides_are_optional(self):
        """指定しない設定項目は None"""
        args = build_parser().parse_args(["diffuse"])
        assert all(getattr(args, key) is None for key in OVERRIDES)

    def test_common_options(self):
        """共通オプション"""
        args = build_parser().parse_args(
            ["diffuse", "--family", "n=2,k=1,0", "--tables", "3", "--time", "1e5", "--envelope"]
        )
        assert args.family == "n=2,k=1,0"
        assert args.n_tables == 3
        assert args.T_flow == 1e5
        assert args.envelope is True

    @pytest.mark.parametrize(
        "argv, expected",
        [
            (["--iters", "2e4"], 20_000),
            (["--iterations", "500"], 500),
            (["--iters", "1.5e3"], 1500),
        ],
    )
    def test_iteration_count(self, argv, expected):
        """反復数は --iters でも指数表記でも指定できる"""
        args = build_parser().parse_args(["lyapunov", "--stratum", "1^8", *argv])
        assert args.lyap_iterations == expected

    def test_check_path_is_optional(self):
        """--check はパスを省略できる"""
        assert build_parser().parse_args(["equations", "--check"]).check == ""
        args = build_parser().parse_args(["equations", "--check", "table.json"])
        assert args.check == "table.json"
        assert args.cylinders is None

    def test_lyapunov_strata(self):
        """層は複数指定できる"""
        args = build_parser().parse_args(["lyapunov", "--stratum", "1^8", "--stratum", "1^9,-1"])
        assert args.stratum == ["1^8", "1^9,-1"]

    def test_unknown_figure(self):
        """図の名前は選択肢から"""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["reproduce-figure", "spiral"])

    def test_selftest_items(self):
        """項目番号の列"""
        args = build_parser().parse_args(["selftest", "--items", "1", "8"])
        assert args.items == [1, 8]
        assert not args.full


class TestCommands:
    """サブコマンドのテスト"""

    def test_equations_json(self, capsys, memory_store):
        """方程式系を JSON で出力"""
        args = build_parser().parse_args(["equations", "--json"])
        assert cmd_equations(args, ExperimentConfig(family="n=2"), memory_store)
        payload = json.loads(capsys.readouterr().out)
        assert payload["family"] == "n=2,k=0,0"

    def test_equations_check(self, capsys, memory_store):
        """サンプルのテーブルで所属判定"""
        args = build_parser().parse_args(["equations", "--check"])
        assert cmd_equations(args, ExperimentConfig(family="n=1", seed=5), memory_store)
        assert "所属" in capsys.readouterr().out

    def test_equations_check_table_file(self, capsys, temp_dir, memory_store):
        """保存したテーブルの所属判定（族はテーブルから取る）"""
        path = temp_dir / "table.json"
        path.write_text(ExperimentConfig(family="n=1").table(5).to_json(), encoding="utf-8")
        args = build_parser().parse_args(["equations", "--check", str(path)])
        assert cmd_equations(args, ExperimentConfig(family="n=2"), memory_store)
        out = capsys.readouterr().out
        assert "族: n=1,k=0" in out
        assert f"{path} のテーブル: 所属" in out

    def test_equations_check_missing_file(self, temp_dir, memory_store):
        """読めないテーブルは検証エラー"""
        args = build_parser().parse_args(["equations", "--check", str(temp_dir / "none.json")])
        with pytest.raises(ValidationError, match="テーブルを読み込めません"):
            cmd_equations(args, ExperimentConfig(family="n=1"), memory_store)

    def test_equations_cylinders(self, temp_dir, memory_store):
        """シリンダー分解の JSON を出力"""
        args = build_parser().parse_args(["equations", "--cylinders"])
        cfg = ExperimentConfig(family="n=1", seed=5, output_dir=str(temp_dir))
        assert cmd_equations(args, cfg, memory_store)
        report = json.loads((temp_dir / "cylinders.json").read_text(encoding="utf-8"))
        assert report
        assert all(cylinder["width"] > 0 for cylinder in report)
        assert {"width", "circumference", "core_class"} <= set(report[0])

    def test_equations_empty_family(self, memory_store):
        """空の族には方程式系がない"""
        args = build_parser().parse_args(["equations"])
        assert not cmd_equations(args, ExperimentConfig(family="empty"), memory_store)

    def test_lyapunov_abelian_stratum(self, capsys, memory_store, mocker):
        """H(0) は向きづけ可能な層として渡す"""
        report = ExponentReport("H(0)", 1.0, 1.0, 0.001, 20_000)
        estimate = mocker.patch("windtree_runner.estimate_top_exponent", return_value=report)
        args = build_parser().parse_args(["lyapunov", "--stratum", "H(0)"])
        assert cmd_lyapunov(args, ExperimentConfig(), memory_store)
        assert estimate.call_args[0][0] == StratumSignature((0,), "abelian")
        assert json.loads(capsys.readouterr().out.split("=" * 60)[-1])["stratum"] == "H(0)"

    def test_sample(self, temp_dir, memory_store):
        """テーブルを JSON Lines で保存"""
        args = build_parser().parse_args(["sample"])
        cfg = ExperimentConfig(family="n=2", n_tables=3, output_dir=str(temp_dir))
        assert cmd_sample(args, cfg, memory_store)
        lines = (temp_dir / "tables.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 3
        assert len(json.loads(lines[0])["obstacles"]) == 2


class TestMain:
    """メイン関数のテスト"""

    def test_invalid_family_exits(self, temp_dir, monkeypatch, capsys):
        """不正な族指定は設定エラー"""
        argv = ["windtree_runner.py", "equations", "--ini", str(temp_dir / "runner.ini")]
        monkeypatch.setattr(sys, "argv", argv + ["--family", "n=2,k=1"])
        with pytest.raises(SystemExit) as excinfo:
            windtree_runner.main()
        assert excinfo.value.code == 1
        assert "設定エラー" in capsys.readouterr().out

    def test_equations_runs(self, temp_dir, monkeypatch, capsys):
        """設定ファイルを作成して実行"""
        argv = [
            "windtree_runner.py",
            "equations",
            "--ini",
            str(temp_dir / "runner.ini"),
            "--db-path",
            str(temp_dir / "cache.db"),
        ]
        monkeypatch.setattr(sys, "argv", argv)
        windtree_runner.main()
        out = capsys.readouterr().out
        assert "解空間の実次元: 3" in out
        assert (temp_dir / "runner.ini").exists()


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
