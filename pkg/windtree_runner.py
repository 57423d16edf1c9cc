#!/usr/bin/env python3
"""
風の木モデルの拡散率とリャプノフ指数の実験を実行するスクリプト
"""
import argparse
import json
import logging
from pathlib import Path

from lab.config import DEFAULT_CONFIG_FILE, ExperimentConfig, load_config
from lab.core.equations import build_equations, check_membership
from lab.core.exceptions import LabError, ValidationError
from lab.core.experiments import (
    FIGURES,
    cross_validate,
    deformation_check,
    job_seeds,
    reproduce_figure,
    run_crossing_sweep,
    run_diffusion_sweep,
    selftest,
    stratum_sweep,
    theorem_check,
)
from lab.core.flat import StratumSignature, periods
from lab.core.rauzy import estimate_top_exponent
from lab.core.store import ResultStore
from lab.core.surface_flow import detect_cylinders
from lab.core.validators import InputValidator
from lab.core.windtree import (
    FamilySpec,
    WindtreeTable,
    aligned_squares,
    family_coordinates,
    unfold,
)

logger = logging.getLogger(__name__)


def count(text: str) -> int:
    """"2e4" のような指数表記も受け付ける整数"""
    return int(float(text))


def load_table(path: str) -> WindtreeTable:
    """テーブルの JSON を読む（.jsonl は先頭行）"""
    try:
        text = Path(path).read_text(encoding="utf-8")
        if Path(path).suffix == ".jsonl":
            text = text.strip().splitlines()[0]
        return WindtreeTable.from_json(text)
    except (OSError, IndexError, KeyError, json.JSONDecodeError) as e:
        raise ValidationError(f"テーブルを読み込めません: {path} ({e})")


def print_rows(rows, keys):
    """結果行を簡易表で表示"""
    for i, row in enumerate(rows, 1):
        values = []
        for key in keys:
            value = row.get(key, "")
            values.append(f"{key}={value:.4f}" if isinstance(value, float) else f"{key}={value}")
        print(f"  [{i}/{len(rows)}] " + " ".join(values))


def cmd_sample(args, cfg: ExperimentConfig, store: ResultStore):
    """族からテーブルを生成して JSON Lines で保存"""
    path = cfg.output_path("tables.jsonl")
    print(f"族: {cfg.family} / テーブル数: {cfg.n_tables}")
    print("=" * 60)
    lines = []
    for i, seed in enumerate(job_seeds(cfg.seed, cfg.n_tables), 1):
        table = cfg.table(seed)
        lines.append(table.to_json())
        coords = family_coordinates(table) if table.n else []
        print(f"[{i}/{cfg.n_tables}] seed={seed} 座標数={len(coords)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("=" * 60)
    print(f"[完了] テーブルを保存しました: {path}")
    return True


def cmd_diffuse(args, cfg: ExperimentConfig, store: ResultStore):
    """方向平均拡散率のスイープ"""
    print(f"族: {cfg.family} / テーブル数: {cfg.n_tables} / 方向数: {cfg.n_directions}")
    print(f"流れの時間: {cfg.T_flow:g} / 設定ハッシュ: {cfg.config_hash()}")
    print("=" * 60)
    summary = run_diffusion_sweep(cfg, store, force=args.force, progress=not args.quiet)
    print_rows(summary.rows[:-1], ["status", "rate", "stderr", "used", "excluded"])
    print("\n" + "=" * 60)
    print(f"[結果] 平均拡散率: {summary.mean:.4f} ± {summary.stderr:.4f}")
    print(f"[完了] 成功 {summary.succeeded}件, 失敗 {summary.failed}件 → {summary.csv_path}")
    return summary.succeeded > 0


def cmd_crossings(args, cfg: ExperimentConfig, store: ResultStore):
    """交差数による推定・ビリヤードとの照合・定理の確認"""
    print(f"族: {cfg.family} / テーブル数: {cfg.n_tables} / 方向数: {cfg.n_directions}")
    print("=" * 60)
    progress = not args.quiet
    if args.theorem:
        check = theorem_check(cfg, store, force=args.force, progress=progress)
        print(f"[結果] 拡散率 {check.diffusion_mean:.4f} ± {check.diffusion_stderr:.4f}")
        print(
            f"[結果] {check.stratum} の λ+ {check.lyapunov.lambda_plus_top:.4f}"
            f" ± {check.lyapunov.stderr:.4f}"
        )
        print(f"[判定] 差 {check.difference:.4f}: {'PASS' if check.passed else 'FAIL'}")
        return check.passed
    if args.validate:
        result = cross_validate(cfg, store, force=args.force, progress=progress)
        print_rows(
            result.rows,
            [
                "status",
                "billiard_rate",
                "billiard_stderr",
                "crossing_rate",
                "crossing_stderr",
                "agree",
            ],
        )
        print("\n" + "=" * 60)
        print(f"[判定] 2σ以内で一致: {'PASS' if result.agreed else 'FAIL'} → {result.csv_path}")
        return result.agreed
    summary = run_crossing_sweep(cfg, store, force=args.force, progress=progress)
    print_rows(summary.rows, ["status", "crossing_rate", "crossing_stderr", "directions"])
    print("\n" + "=" * 60)
    print(f"[結果] 平均: {summary.mean:.4f} ± {summary.stderr:.4f} → {summary.csv_path}")
    return summary.succeeded > 0


def cmd_lyapunov(args, cfg: ExperimentConfig, store: ResultStore):
    """層の最大リャプノフ指数"""
    signatures = []
    for text in args.stratum:
        kind, body = InputValidator.stratum_kind(text)
        signatures.append(StratumSignature(tuple(InputValidator.parse_stratum(body, kind)), kind))
    print(f"層: {', '.join(s.label() for s in signatures)}")
    print(f"反復数: {cfg.lyap_iterations:,} / 連鎖数: {cfg.lyap_chains}")
    print("=" * 60)
    if len(signatures) == 1:
        report = estimate_top_exponent(
            signatures[0], cfg.lyap_iterations, cfg.seed, cfg.lyap_chains, store=store
        )
        print(json.dumps(report.to_dict(), indent=2))
        return True
    rows, path = stratum_sweep(cfg, signatures, store, force=args.force, progress=not args.quiet)
    print_rows(rows, ["stratum", "status", "lambda_plus_top", "stderr", "lambda_minus_check"])
    print("\n" + "=" * 60)
    print(f"[完了] 結果を保存しました: {path}")
    return all(row.get("status") == "ok" for row in rows)


def cmd_equations(args, cfg: ExperimentConfig, store: ResultStore):
    """族の方程式系の表示・所属判定・シリンダー変形"""
    if args.deform:
        check = deformation_check(aligned_squares(2))
        print(f"シリンダー {check.cylinder} を変形")
        print(f"破れた第2群の方程式: {check.flipped}")
        print(f"[判定] {'PASS' if check.passed else 'FAIL'}")
        return check.passed

    path = args.check or args.cylinders
    table = load_table(path) if path else None
    spec = FamilySpec(table.n, table.k) if table is not None else cfg.family_spec
    if spec is None:
        print("空の族には方程式系がありません。")
        return False
    system = build_equations(spec)
    if args.json:
        print(system.to_json())
    else:
        print(f"族: {spec} / ラベル数: {len(system.labels)}")
        print("=" * 60)
        for row in system.rows:
            print(f"  ({row.group}) [{row.kind}] {row.name}")
        print("=" * 60)
        print(f"実方程式 {len(system.real_rows)}本, 複素方程式 {len(system.complex_rows)}本")
        print(f"解空間の実次元: {system.solution_dimension()}")
    if args.check is None and args.cylinders is None:
        return True

    unfolding = unfold(table if table is not None else cfg.table(cfg.seed))
    name = path or f"seed={cfg.seed}"
    if args.cylinders is not None:
        decomposition = detect_cylinders(unfolding.surface, 1, unfolding.basis)
        report = cfg.output_path("cylinders.json")
        report.write_text(decomposition.to_json(), encoding="utf-8")
        print(f"[完了] {name} のシリンダー {len(decomposition.cylinders)}本 → {report}")
    if args.check is not None:
        result = check_membership(periods(unfolding.surface, unfolding.basis), system)
        print(f"[判定] {name} のテーブル: {'所属' if result.ok else result.violated}")
        return result.ok
    return True


def cmd_reproduce_figure(args, cfg: ExperimentConfig, store: ResultStore):
    """図のデータ（CSV と SVG）"""
    print(f"図: {args.name} / 反復数: {cfg.lyap_iterations:,}")
    print("=" * 60)
    result = reproduce_figure(
        args.name, cfg, args.budget, store, force=args.force, progress=not args.quiet
    )
    print_rows(result.rows, ["parameter", "stratum", "status", "lambda_plus_top", "stderr"])
    print("\n" + "=" * 60)
    for name, ok in result.checks.items():
        print(f"  {name}: {'PASS' if ok else 'FAIL'}")
    print(f"[完了] {result.csv_path} / {result.svg_path}")
    return result.passed


def cmd_selftest(args, cfg: ExperimentConfig, store: ResultStore):
    """診断項目の自己診断"""
    print(f"自己診断（{'完全' if args.full else '縮小'}モード）")
    print("=" * 60)
    items = selftest(cfg, full=args.full, items=args.items, store=store, progress=not args.quiet)
    for item in items:
        suffix = "（縮小）" if item.reduced else ""
        print(f"[{item.number:2d}] {item.verdict} {item.name}{suffix}: {item.detail}")
    passed = sum(1 for item in items if item.passed)
    print("=" * 60)
    print(f"[結果] {passed}/{len(items)}件 PASS")
    return passed == len(items)


COMMANDS = {
    "sample": cmd_sample,
    "diffuse": cmd_diffuse,
    "crossings": cmd_crossings,
    "lyapunov": cmd_lyapunov,
    "equations": cmd_equations,
    "reproduce-figure": cmd_reproduce_figure,
    "selftest": cmd_selftest,
}


def build_parser():
    """コマンドライン引数の定義"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON設定ファイル（INIの値を上書き）")
    common.add_argument("--ini", default=DEFAULT_CONFIG_FILE, help="INI設定ファイルパス")
    common.add_argument("--family", help="族の指定（例: n=2,k=1,0 / 空テーブルは empty）")
    common.add_argument("--tables", type=int, dest="n_tables", help="テーブル数")
    common.add_argument("--directions", type=int, dest="n_directions", help="方向数")
    common.add_argument("--time", type=float, dest="T_flow", help="流れの時間")
    common.add_argument(
        "--iterations", "--iters", type=count, dest="lyap_iterations", help="加速ステップ数"
    )
    common.add_argument("--chains", type=int, dest="lyap_chains", help="独立な連鎖の数")
    common.add_argument("--seed", type=int, help="乱数シード")
    common.add_argument("--workers", type=int, help="ワーカー数")
    common.add_argument("--output-dir", dest="output_dir", help="出力ディレクトリ")
    common.add_argument("--db-path", dest="db_path", help="結果キャッシュのパス")
    common.add_argument(
        "--envelope",
        action="store_const",
        const=True,
        help="変位の累積最大値で回帰する",
    )
    common.add_argument("--force", action="store_true", help="保存済みの結果を使わず再計算")
    common.add_argument("--quiet", "-q", action="store_true", help="進捗バーを表示しない")
    common.add_argument("--verbose", "-v", action="store_true", help="デバッグログを表示")

    parser = argparse.ArgumentParser(description="風の木モデルの拡散率とリャプノフ指数の実験")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("sample", parents=[common], help="族からテーブルを生成")
    sub.add_parser("diffuse", parents=[common], help="方向平均拡散率のスイープ")

    crossings = sub.add_parser("crossings", parents=[common], help="交差数による推定")
    crossings.add_argument("--validate", action="store_true", help="ビリヤードの傾きと照合")
    crossings.add_argument("--theorem", action="store_true", help="層の最大指数と比較")

    lyapunov = sub.add_parser("lyapunov", parents=[common], help="層の最大リャプノフ指数")
    lyapunov.add_argument(
        "--stratum", action="append", required=True, help="層の指定（例: 1^8 / 1^9,-1）"
    )

    equations = sub.add_parser("equations", parents=[common], help="族の方程式系")
    equations.add_argument("--json", action="store_true", help="JSON形式で出力")
    equations.add_argument(
        "--check",
        nargs="?",
        const="",
        metavar="TABLE_JSON",
        help="テーブル（省略時はサンプル）の所属判定",
    )
    equations.add_argument(
        "--cylinders",
        nargs="?",
        const="",
        metavar="TABLE_JSON",
        help="水平方向のシリンダー分解を cylinders.json に出力",
    )
    equations.add_argument("--deform", action="store_true", help="シリンダー変形の確認")

    figure = sub.add_parser("reproduce-figure", parents=[common], help="図のデータを出力")
    figure.add_argument("name", choices=sorted(FIGURES), help="図の名前")
    figure.add_argument("--budget", type=int, help="横軸（n または p）の上限")

    test = sub.add_parser("selftest", parents=[common], help="診断項目の自己診断")
    test.add_argument("--full", action="store_true", help="完全な予算で実行")
    test.add_argument("--items", type=int, nargs="+", help="実行する項目番号")
    return parser


OVERRIDES = (
    "family",
    "n_tables",
    "n_directions",
    "T_flow",
    "lyap_iterations",
    "lyap_chains",
    "seed",
    "workers",
    "output_dir",
    "db_path",
    "envelope",
)


def main():
    """メイン関数"""
    args = build_parser().parse_args()

    try:
        overrides = {key: getattr(args, key) for key in OVERRIDES}
        cfg = load_config(args.ini, args.config, overrides)
    except LabError as e:
        print(f"設定エラー: {e.user_message}")
        exit(1)

    level = logging.DEBUG if args.verbose else getattr(logging, cfg.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    print(f"設定ハッシュ: {cfg.config_hash()} / 結果キャッシュ: {cfg.db_path}")
    try:
        store = ResultStore(cfg.db_path)
        success = COMMANDS[args.command](args, cfg, store)
    except LabError as e:
        logger.error(f"{args.command} failed: {e.message}", exc_info=args.verbose)
        print(f"[ERROR] {e.user_message}: {e.message}")
        exit(1)

    if not success:
        print("処理に失敗しました。")
        exit(1)


if __name__ == "__main__":
    main()
