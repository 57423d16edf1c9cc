"""
実験の実行管理モジュール
族のスイープ・推定量の照合・図のデータ出力・自己診断を扱う
"""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from functools import wraps
from itertools import combinations_with_replacement
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..config import ExperimentConfig
from .billiard import (
    AveragedRate,
    RateEstimate,
    diffuse,
    diffusion_rate,
    direction_averaged_rate,
    sample_direction,
    sample_start,
)
from .equations import MembershipResult, build_equations, check_membership, cylinder_deform
from .exceptions import (
    CornerGraze,
    LabError,
    NotInCatalog,
    SimulationError,
    SingularityHit,
    ValidationError,
)
from .flat import StratumSignature, periods, stratum_of
from .rauzy import (
    ExponentReport,
    LinearInvolution,
    balanced_lengths,
    catalog,
    estimate_top_exponent,
    rauzy_move,
    run_chain,
    stratum_representative,
    summarize,
)
from .store import ResultStore
from .surface_flow import CrossingSeries, crossing_diffusion, detect_cylinders
from .windtree import (
    FamilySpec,
    WindtreeTable,
    aligned_squares,
    family_coordinates,
    sample_table,
    unfold,
)

logger = logging.getLogger(__name__)

# 照合で許す差（標準誤差の倍数）
AGREEMENT_SIGMA = 2.0
THEOREM_TOLERANCE = 0.05


def handle_job_errors(f):
    """
    ジョブの例外を失敗行に変換するデコレーター

    LabError は警告として記録し、予期しない例外はトレースバック付きで記録します。
    どちらの場合もスイープは中断しません。
    """

    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except LabError as e:
            logger.warning(f"{type(e).__name__} in {f.__name__}: {e.message}")
            return {"status": "failed", "error": f"{type(e).__name__}: {e.message}"}
        except Exception as e:
            logger.error(f"Unexpected error in {f.__name__}: {str(e)}", exc_info=True)
            return {"status": "failed", "error": f"{type(e).__name__}: {e}"}

    return decorated_function


def job_seeds(seed: int, count: int) -> List[int]:
    """親シードから SeedSequence.spawn で各ジョブのシードを作る"""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def run_jobs(
    function: Callable[..., Dict[str, Any]],
    arguments: Sequence[Tuple],
    workers: int = 1,
    description: str = "jobs",
    progress: bool = True,
) -> List[Dict[str, Any]]:
    """
    ジョブを固定数のワーカーで実行し、ジョブ番号の順に結果を返す

    結果は完了順ではなく番号順にまとめるので、ワーカー数に依らず同じ出力になる。
    """
    results: List[Optional[Dict[str, Any]]] = [None] * len(arguments)
    bar = tqdm(total=len(arguments), desc=description, disable=not progress, leave=False)
    if workers <= 1 or len(arguments) <= 1:
        for index, args in enumerate(arguments):
            results[index] = function(*args)
            bar.update(1)
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {
                executor.submit(function, *args): index for index, args in enumerate(arguments)
            }
            for future in as_completed(futures):
                results[futures[future]] = future.result()
                bar.update(1)
    bar.close()
    return [result or {"status": "failed", "error": "no result"} for result in results]


def write_csv(path: Path, rows: Sequence[Dict[str, Any]], fieldnames: Sequence[str]) -> Path:
    """行を CSV に書き出す（未知のキーは無視）"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _format(row.get(key, "")) for key in fieldnames})
    return path


# 走行ごとの系列（runs/ 以下に1テーブル1ファイル）
DIFFUSION_RUN_FIELDS = ["table_id", "theta", "t_k", "displacement", "cell_x", "cell_y"]
CROSSING_RUN_FIELDS = ["table_id", "theta", "t_k", "pairing_x", "pairing_y"]


def run_csv_path(cfg: ExperimentConfig, prefix: str, index: int) -> Path:
    return cfg.output_path(f"runs/{prefix}_{index:03d}.csv")


def _format(value: Any) -> Any:
    if isinstance(value, float):
        return f"{value:.6f}"
    return value


def family_stratum(spec: FamilySpec) -> StratumSignature:
    """族 B_n(k) の展開曲面の層 Q(1^{4n+p}, -1^p)"""
    return StratumSignature((1,) * (4 * spec.n + spec.p) + (-1,) * spec.p)


# --- 拡散率のスイープ ---

SWEEP_FIELDS = [
    "config_hash",
    "version",
    "family",
    "table",
    "seed",
    "status",
    "rate",
    "stderr",
    "used",
    "excluded",
    "error",
]


@dataclass
class SweepSummary:
    """スイープ結果（行は番号順、最後の集計は mean / stderr）"""

    rows: List[Dict[str, Any]]
    mean: float
    stderr: float
    failed: int
    csv_path: Optional[Path] = None

    @property
    def succeeded(self) -> int:
        return sum(1 for row in self.rows if row.get("status") == "ok")


def _split_seed(seed: int) -> Tuple[int, int]:
    """ジョブのシードをテーブル用と方向用に分ける"""
    table_seed, direction_seed = np.random.SeedSequence(seed).generate_state(2)
    return int(table_seed), int(direction_seed)


@handle_job_errors
def diffusion_job(cfg: ExperimentConfig, index: int, seed: int) -> Dict[str, Any]:
    """1枚のテーブルの方向平均拡散率"""
    table_seed, direction_seed = _split_seed(seed)
    table = cfg.table(table_seed)
    averaged = direction_averaged_rate(
        table,
        cfg.n_directions,
        cfg.T_flow,
        direction_seed,
        envelope=cfg.envelope,
        max_stderr=cfg.max_stderr,
    )
    rows = [
        {
            "table_id": index,
            "theta": series.theta,
            "t_k": t,
            "displacement": d,
            "cell_x": cx,
            "cell_y": cy,
        }
        for series in averaged.series
        for t, d, cx, cy in series.rows()
    ]
    path = write_csv(run_csv_path(cfg, "diffusion", index), rows, DIFFUSION_RUN_FIELDS)
    return {
        "status": "ok",
        "rate": averaged.mean,
        "stderr": averaged.stderr,
        "used": averaged.used,
        "excluded": averaged.excluded,
        "run_csv": str(path),
    }


def aggregate(values: Sequence[float], errors: Sequence[float]) -> Tuple[float, float]:
    """テーブル間の平均と標準誤差（1枚のときはその標準誤差）"""
    if not values:
        return math.nan, math.nan
    array = np.asarray(values, dtype=float)
    if len(array) == 1:
        return float(array[0]), float(errors[0])
    return float(array.mean()), float(array.std(ddof=1) / math.sqrt(len(array)))


def run_cached_jobs(
    cfg: ExperimentConfig,
    prefix: str,
    function: Callable[..., Dict[str, Any]],
    store: Optional[ResultStore] = None,
    force: bool = False,
    progress: bool = True,
) -> List[Dict[str, Any]]:
    """
    n_tables 個のジョブを実行（保存済みのジョブは再利用）

    成功したジョブだけを (config_hash, job_key) で保存します。
    """
    config_hash = cfg.config_hash()
    seeds = job_seeds(cfg.seed, cfg.n_tables)
    keys = [f"{prefix}:{index}" for index in range(cfg.n_tables)]
    results: Dict[int, Dict[str, Any]] = {}
    if store is not None and cfg.skip_unchanged and not force:
        for index, key in enumerate(keys):
            cached = store.get(config_hash, key)
            if cached is not None:
                results[index] = cached
        if results:
            logger.info("reusing %d cached %s jobs", len(results), prefix)

    pending = [index for index in range(cfg.n_tables) if index not in results]
    computed = run_jobs(
        function,
        [(cfg, index, seeds[index]) for index in pending],
        workers=cfg.workers,
        description=prefix,
        progress=progress,
    )
    for index, result in zip(pending, computed):
        results[index] = result
        if store is not None and result.get("status") == "ok":
            store.put(config_hash, keys[index], result)

    rows = []
    for index in range(cfg.n_tables):
        row = dict(results[index])
        row.update(cfg.stamp())
        row.update({"family": cfg.family, "table": index, "seed": seeds[index]})
        rows.append(row)
    return rows


def run_diffusion_sweep(
    cfg: ExperimentConfig,
    store: Optional[ResultStore] = None,
    force: bool = False,
    progress: bool = True,
    write: bool = True,
) -> SweepSummary:
    """
    族から n_tables 枚のテーブルを取り、方向平均拡散率とその平均を求める

    失敗したジョブは行として報告し、スイープは中断しません。
    """
    rows = run_cached_jobs(cfg, "diffusion", diffusion_job, store, force, progress)
    ok = [row for row in rows if row.get("status") == "ok"]
    mean, stderr = aggregate([row["rate"] for row in ok], [row["stderr"] for row in ok])
    failed = len(rows) - len(ok)
    rows.append(
        {
            **cfg.stamp(),
            "family": cfg.family,
            "table": "mean",
            "status": "ok" if ok else "failed",
            "rate": mean,
            "stderr": stderr,
            "used": len(ok),
            "excluded": failed,
        }
    )
    summary = SweepSummary(rows, mean, stderr, failed)
    if write:
        summary.csv_path = write_csv(cfg.output_path("diffusion_sweep.csv"), rows, SWEEP_FIELDS)
    logger.info("diffusion sweep %s: %.4f ± %.4f (%d failed)", cfg.family, mean, stderr, failed)
    return summary


# --- 交差数による推定と照合 ---

CROSS_FIELDS = [
    "config_hash",
    "version",
    "family",
    "table",
    "seed",
    "status",
    "billiard_rate",
    "billiard_stderr",
    "crossing_rate",
    "crossing_stderr",
    "directions",
    "agree",
    "error",
]


def _mean_stderr(values: Sequence[float]) -> Tuple[float, float]:
    array = np.asarray(values, dtype=float)
    if len(array) < 2:
        return (float(array[0]) if len(array) else math.nan), math.nan
    return float(array.mean()), float(array.std(ddof=1) / math.sqrt(len(array)))


def _billiard_estimate(cfg: ExperimentConfig, table: WindtreeTable, theta, start):
    try:
        estimate = diffusion_rate(
            diffuse(table, theta, start, cfg.T_flow), cfg.envelope, cfg.max_stderr
        )
    except SimulationError as error:
        logger.debug("billiard direction %.6f dropped: %s", theta, error.message)
        return None
    return estimate if estimate.converged else None


def _crossing_estimate(
    cfg: ExperimentConfig, unfolding, theta, start
) -> Optional[Tuple[RateEstimate, CrossingSeries]]:
    x, y = start.position
    try:
        series = crossing_diffusion(
            unfolding.surface,
            unfolding.marked,
            theta,
            unfolding.locate(x, y, copy=0),
            cfg.T_flow * unfolding.table.scale,
        )
        estimate = diffusion_rate(series.as_diffusion(), cfg.envelope, cfg.max_stderr)
    except SimulationError as error:
        logger.debug("crossing direction %.6f dropped: %s", theta, error.message)
        return None
    return (estimate, series) if estimate.converged else None


@handle_job_errors
def crossing_job(cfg: ExperimentConfig, index: int, seed: int) -> Dict[str, Any]:
    """展開曲面上の交差数から求めた1枚のテーブルの拡散率"""
    table_seed, direction_seed = _split_seed(seed)
    unfolding = unfold(cfg.table(table_seed))
    rng = np.random.default_rng(direction_seed)
    slopes, rows = [], []
    for _ in range(cfg.n_directions):
        theta = sample_direction(rng)
        result = _crossing_estimate(cfg, unfolding, theta, sample_start(unfolding.table, rng))
        if result is None:
            continue
        estimate, series = result
        slopes.append(estimate.slope)
        rows.extend(
            {"table_id": index, "theta": theta, "t_k": t, "pairing_x": px, "pairing_y": py}
            for t, px, py in series.rows()
        )
    if not slopes:
        raise SingularityHit("no direction produced a crossing estimate")
    rate, stderr = _mean_stderr(slopes)
    path = write_csv(run_csv_path(cfg, "crossings", index), rows, CROSSING_RUN_FIELDS)
    return {
        "status": "ok",
        "crossing_rate": rate,
        "crossing_stderr": stderr,
        "directions": len(slopes),
        "run_csv": str(path),
    }


@handle_job_errors
def cross_validation_job(cfg: ExperimentConfig, index: int, seed: int) -> Dict[str, Any]:
    """同じ方向と出発点でビリヤードの変位と交差数の傾きを比べる"""
    table_seed, direction_seed = _split_seed(seed)
    table = cfg.table(table_seed)
    unfolding = unfold(table)
    rng = np.random.default_rng(direction_seed)
    billiard_slopes, crossing_slopes = [], []
    for _ in range(cfg.n_directions):
        theta = sample_direction(rng)
        start = sample_start(table, rng)
        billiard = _billiard_estimate(cfg, table, theta, start)
        crossing = _crossing_estimate(cfg, unfolding, theta, start)
        if billiard is None or crossing is None:
            continue
        billiard_slopes.append(billiard.slope)
        crossing_slopes.append(crossing[0].slope)
    if len(billiard_slopes) < 2:
        raise CornerGraze(f"only {len(billiard_slopes)} usable directions")

    b_rate, b_err = _mean_stderr(billiard_slopes)
    c_rate, c_err = _mean_stderr(crossing_slopes)
    combined = math.hypot(b_err, c_err)
    return {
        "status": "ok",
        "billiard_rate": b_rate,
        "billiard_stderr": b_err,
        "crossing_rate": c_rate,
        "crossing_stderr": c_err,
        "directions": len(billiard_slopes),
        "agree": abs(b_rate - c_rate) <= AGREEMENT_SIGMA * combined + 1e-12,
    }


@dataclass
class CrossValidation:
    rows: List[Dict[str, Any]]
    csv_path: Optional[Path] = None

    @property
    def agreed(self) -> bool:
        """全てのテーブルが成功し、2σ 以内で一致したか"""
        return bool(self.rows) and all(
            row.get("status") == "ok" and row.get("agree") for row in self.rows
        )


def run_crossing_sweep(
    cfg: ExperimentConfig,
    store: Optional[ResultStore] = None,
    force: bool = False,
    progress: bool = True,
    write: bool = True,
) -> SweepSummary:
    """交差数による拡散率のスイープ"""
    rows = run_cached_jobs(cfg, "crossings", crossing_job, store, force, progress)
    ok = [row for row in rows if row.get("status") == "ok"]
    mean, stderr = aggregate(
        [row["crossing_rate"] for row in ok], [row["crossing_stderr"] for row in ok]
    )
    summary = SweepSummary(rows, mean, stderr, len(rows) - len(ok))
    if write:
        summary.csv_path = write_csv(cfg.output_path("crossing_sweep.csv"), rows, CROSS_FIELDS)
    return summary


def cross_validate(
    cfg: ExperimentConfig,
    store: Optional[ResultStore] = None,
    force: bool = False,
    progress: bool = True,
    write: bool = True,
) -> CrossValidation:
    """テーブルごとにビリヤードと交差数の傾きが合成 2σ 以内で一致するか"""
    rows = run_cached_jobs(cfg, "cross", cross_validation_job, store, force, progress)
    result = CrossValidation(rows)
    if write:
        result.csv_path = write_csv(cfg.output_path("cross_validation.csv"), rows, CROSS_FIELDS)
    logger.info("cross validation %s: agreed=%s", cfg.family, result.agreed)
    return result


@dataclass(frozen=True)
class TheoremCheck:
    stratum: str
    diffusion_mean: float
    diffusion_stderr: float
    lyapunov: ExponentReport
    tolerance: float = THEOREM_TOLERANCE

    @property
    def difference(self) -> float:
        return abs(self.diffusion_mean - self.lyapunov.lambda_plus_top)

    @property
    def passed(self) -> bool:
        return self.difference <= self.tolerance


def theorem_check(
    cfg: ExperimentConfig,
    store: Optional[ResultStore] = None,
    force: bool = False,
    progress: bool = True,
    tolerance: float = THEOREM_TOLERANCE,
) -> TheoremCheck:
    """
    族の平均拡散率と層 Q(1^{4n+p}, -1^p) の最大指数を比べる

    Raises:
        ValidationError: 空の族が指定された場合
        NotInCatalog: 族の層がカタログにない場合
    """
    spec = cfg.family_spec
    if spec is None:
        raise ValidationError("空の族には対応する層がありません")
    signature = family_stratum(spec)
    sweep = run_diffusion_sweep(cfg, store, force, progress, write=False)
    report = estimate_top_exponent(
        signature, cfg.lyap_iterations, cfg.seed, cfg.lyap_chains, store=store
    )
    check = TheoremCheck(signature.label(), sweep.mean, sweep.stderr, report, tolerance)
    logger.info(
        "theorem check %s: diffusion %.4f vs lyapunov %.4f",
        check.stratum,
        check.diffusion_mean,
        report.lambda_plus_top,
    )
    return check


# --- リャプノフ指数の図 ---

LYAPUNOV_FIELDS = [
    "config_hash",
    "version",
    "figure",
    "parameter",
    "stratum",
    "status",
    "lambda_plus_top",
    "stderr",
    "lambda_minus_check",
    "iters",
    "chains",
    "error",
]


@dataclass(frozen=True)
class FigureSpec:
    """図の横軸（n または p）と層の対応"""

    name: str
    parameter: str
    first: int
    last: int
    stratum: Callable[[int], StratumSignature]
    title: str

    def signatures(self, budget: Optional[int] = None) -> List[Tuple[int, StratumSignature]]:
        """
        横軸の値と層の組

        Raises:
            NotInCatalog: budget がカタログの範囲を超える場合
        """
        last = self.last if budget is None else budget
        if last > self.last:
            beyond = self.stratum(self.last + 1).label()
            raise NotInCatalog(f"{self.name}: {beyond} is beyond the catalog")
        return [(value, self.stratum(value)) for value in range(self.first, last + 1)]


def _no_pole(n: int) -> StratumSignature:
    return StratumSignature((1,) * (4 * n))


def _ten_pole(n: int) -> StratumSignature:
    return StratumSignature((1,) * (4 * n + 10) + (-1,) * 10)


def _poles(p: int) -> StratumSignature:
    return StratumSignature((1,) * (8 + p) + (-1,) * p)


FIGURES: Dict[str, FigureSpec] = {
    "no_pole": FigureSpec("no_pole", "n", 2, 5, _no_pole, "lambda+ of Q(1^4n)"),
    "ten_pole": FigureSpec("ten_pole", "n", 1, 3, _ten_pole, "lambda+ of Q(1^(4n+10), -1^10)"),
    "poles": FigureSpec("poles", "p", 0, 6, _poles, "lambda+ of Q(1^(8+p), -1^p)"),
}


@handle_job_errors
def lyapunov_job(
    cfg: ExperimentConfig, signature: StratumSignature, seed: int
) -> Dict[str, Any]:
    """1つの層の最大指数（代表元は db_path の ResultStore にキャッシュ）"""
    store = ResultStore(cfg.db_path)
    report = estimate_top_exponent(
        signature, cfg.lyap_iterations, seed, cfg.lyap_chains, store=store
    )
    return {"status": "ok", **report.to_dict()}


def run_lyapunov_points(
    cfg: ExperimentConfig,
    signatures: Sequence[StratumSignature],
    store: Optional[ResultStore] = None,
    force: bool = False,
    progress: bool = True,
) -> List[Dict[str, Any]]:
    """層ごとの推定（保存済みの点は再利用）を入力順に返す"""
    config_hash = cfg.config_hash()
    seeds = job_seeds(cfg.seed, len(signatures))
    keys = [f"lyapunov:{signature.label()}" for signature in signatures]
    results: Dict[int, Dict[str, Any]] = {}
    if store is not None and cfg.skip_unchanged and not force:
        for index, key in enumerate(keys):
            cached = store.get(config_hash, key)
            if cached is not None:
                results[index] = cached

    pending = [index for index in range(len(signatures)) if index not in results]
    computed = run_jobs(
        lyapunov_job,
        [(cfg, signatures[index], seeds[index]) for index in pending],
        workers=cfg.workers,
        description="lyapunov",
        progress=progress,
    )
    for index, result in zip(pending, computed):
        results[index] = result
        if store is not None and result.get("status") == "ok":
            store.put(config_hash, keys[index], result)

    rows = []
    for index, signature in enumerate(signatures):
        row = {"stratum": signature.label(), **results[index]}
        row.update(cfg.stamp())
        rows.append(row)
    return rows


def stratum_sweep(
    cfg: ExperimentConfig,
    signatures: Sequence[StratumSignature],
    store: Optional[ResultStore] = None,
    force: bool = False,
    progress: bool = True,
    write: bool = True,
) -> Tuple[List[Dict[str, Any]], Optional[Path]]:
    """複数の層の最大指数を1つの CSV にまとめる"""
    rows = run_lyapunov_points(cfg, signatures, store, force, progress)
    path = None
    if write:
        path = write_csv(cfg.output_path("stratum_sweep.csv"), rows, LYAPUNOV_FIELDS)
    return rows, path


@dataclass
class FigureResult:
    name: str
    rows: List[Dict[str, Any]]
    checks: Dict[str, bool] = field(default_factory=dict)
    csv_path: Optional[Path] = None
    svg_path: Optional[Path] = None

    @property
    def points(self) -> List[Tuple[int, float, float]]:
        """成功した点の (横軸, λ, 標準誤差)"""
        return [
            (row["parameter"], row["lambda_plus_top"], row["stderr"])
            for row in self.rows
            if row.get("status") == "ok"
        ]

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(self.checks.values())


def _strictly_decreasing(values: Sequence[float], margins: Sequence[float] = ()) -> bool:
    margins = list(margins) or [0.0] * len(values)
    return all(values[i] - values[i + 1] > margins[i] for i in range(len(values) - 1))


def trend_checks(name: str, points: Sequence[Tuple[int, float, float]]) -> Dict[str, bool]:
    """図ごとの傾向の判定"""
    if len(points) < 1:
        return {"points": False}
    params = [p for p, _, _ in points]
    values = [v for _, v, _ in points]
    errors = [e for _, _, e in points]
    checks: Dict[str, bool] = {}
    if name == "no_pole":
        gaps = [abs(v - 0.5) for v in values]
        checks["decreasing"] = _strictly_decreasing(values)
        checks["above_half"] = all(v > 0.5 - 2 * e for v, e in zip(values, errors))
        checks["gap_shrinking"] = _strictly_decreasing(gaps)
    elif name == "ten_pole":
        checks["below_half"] = all(v < 0.5 for v in values)
    elif name == "poles":
        even = [(v, e) for p, v, e in points if p % 2 == 0]
        margins = [math.hypot(even[i][1], even[i + 1][1]) for i in range(len(even) - 1)]
        checks["decreasing"] = _strictly_decreasing([v for v, _ in even], margins)
    checks["complete"] = len(params) == len(set(params))
    return checks


def render_svg(
    title: str,
    points: Sequence[Tuple[int, float, float]],
    x_label: str,
    reference: Optional[float] = 0.5,
    width: int = 480,
    height: int = 320,
) -> str:
    """点と誤差棒と基準線だけの静的な折れ線グラフ"""
    margin = 48
    xs = [p for p, _, _ in points] or [0, 1]
    lows = [v - e for _, v, e in points if not math.isnan(e)] + [v for _, v, _ in points]
    highs = [v + e for _, v, e in points if not math.isnan(e)] + [v for _, v, _ in points]
    if reference is not None:
        lows.append(reference)
        highs.append(reference)
    y_min, y_max = (min(lows), max(highs)) if points else (0.0, 1.0)
    if y_max - y_min < 1e-9:
        y_min, y_max = y_min - 0.5, y_max + 0.5
    x_min, x_max = min(xs), max(xs)
    if x_max == x_min:
        x_min, x_max = x_min - 1, x_max + 1

    def to_svg(x: float, y: float) -> Tuple[float, float]:
        sx = margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin)
        sy = height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin)
        return round(sx, 2), round(sy, 2)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'  <rect width="{width}" height="{height}" fill="white"/>',
        f'  <text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'  <line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'  <line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'  <text x="{width / 2}" y="{height - 12}" text-anchor="middle" '
        f'font-size="12">{x_label}</text>',
    ]
    if reference is not None:
        (rx1, ry), (rx2, _) = to_svg(x_min, reference), to_svg(x_max, reference)
        parts.append(
            f'  <line x1="{rx1}" y1="{ry}" x2="{rx2}" y2="{ry}" stroke="gray" '
            f'stroke-dasharray="4,4"/>'
        )
    for x in sorted(set(xs)):
        sx, _ = to_svg(x, y_min)
        parts.append(
            f'  <text x="{sx}" y="{height - margin + 16}" text-anchor="middle" '
            f'font-size="10">{x}</text>'
        )
    for y in (y_min, y_max):
        _, sy = to_svg(x_min, y)
        parts.append(
            f'  <text x="{margin - 4}" y="{sy}" text-anchor="end" font-size="10">{y:.3f}</text>'
        )
    if points:
        polyline = " ".join(f"{sx},{sy}" for sx, sy in (to_svg(p, v) for p, v, _ in points))
        parts.append(f'  <polyline points="{polyline}" fill="none" stroke="#377eb8"/>')
    for p, v, e in points:
        sx, sy = to_svg(p, v)
        if not math.isnan(e):
            _, top = to_svg(p, v + e)
            _, bottom = to_svg(p, v - e)
            parts.append(
                f'  <line x1="{sx}" y1="{top}" x2="{sx}" y2="{bottom}" stroke="#377eb8"/>'
            )
        parts.append(f'  <circle cx="{sx}" cy="{sy}" r="3" fill="#e41a1c"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def reproduce_figure(
    name: str,
    cfg: ExperimentConfig,
    budget: Optional[int] = None,
    store: Optional[ResultStore] = None,
    force: bool = False,
    progress: bool = True,
    write: bool = True,
) -> FigureResult:
    """
    図の点（層, λ, 標準誤差）を計算して CSV と SVG を出力し、傾向を判定

    Args:
        name: no_pole / ten_pole / poles
        cfg: 実験設定（lyap_iterations, lyap_chains, seed を使う）
        budget: 横軸の上限（省略時はカタログの上限）

    Raises:
        ValidationError: 未知の図の場合
        NotInCatalog: budget がカタログの範囲を超える場合
    """
    figure = FIGURES.get(name)
    if figure is None:
        raise ValidationError(f"未知の図です: {name}（{', '.join(FIGURES)}）")
    pairs = figure.signatures(budget)
    rows = run_lyapunov_points(cfg, [signature for _, signature in pairs], store, force, progress)
    for (value, _), row in zip(pairs, rows):
        row.update({"figure": name, "parameter": value})

    result = FigureResult(name, rows)
    result.checks = trend_checks(name, result.points)
    if write:
        result.csv_path = write_csv(cfg.output_path(f"{name}.csv"), rows, LYAPUNOV_FIELDS)
        svg_path = cfg.output_path(f"{name}.svg")
        svg_path.write_text(
            render_svg(figure.title, result.points, figure.parameter), encoding="utf-8"
        )
        result.svg_path = svg_path
    logger.info("figure %s: checks %s", name, result.checks)
    return result


# --- 族の記帳とシリンダー変形 ---

DEFORMED_ROW = "alpha_1_1 = -alpha_1_2"


def bookkeeping_families(max_n: int = 4, max_p: int = 4) -> List[FamilySpec]:
    """n <= max_n, p <= max_p の族（k は非増加に並べた代表のみ）"""
    families = []
    for n in range(1, max_n + 1):
        seen = set()
        for combo in combinations_with_replacement(range(max_p + 1), n):
            k = tuple(sorted(combo, reverse=True))
            if sum(k) <= max_p and k not in seen:
                seen.add(k)
                families.append(FamilySpec(n, k))
    return families


def bookkeeping(spec: FamilySpec, seed: int = 0) -> Dict[str, bool]:
    """展開曲面の層・種数・次元と方程式系の本数を族の公式と照合（許容誤差なし）"""
    n, p = spec.n, spec.p
    table = sample_table(spec, seed)
    unfolding = unfold(table)
    report = stratum_of(unfolding.surface)
    system = build_equations(spec)
    values = periods(unfolding.surface, unfolding.basis)
    return {
        "signature": report.signature == family_stratum(spec),
        "genus": report.genus == n + 1,
        "complex_dimension": report.complex_dimension == 6 * n + 2 * p,
        "labels": unfolding.basis.labels == system.labels.labels,
        "real_rows": len(system.real_rows) == 2 * n + 2 * p + 3,
        "complex_rows": len(system.complex_rows) == 3 * n - 1,
        "solution_dimension": system.solution_dimension() == 4 * n + 2 * p - 1,
        "coordinates": len(family_coordinates(table)) == 4 * n + 2 * p - 1,
        "membership": check_membership(values, system).ok,
    }


@dataclass(frozen=True)
class DeformationCheck:
    cylinder: int
    before: MembershipResult
    after: MembershipResult
    group_two: Tuple[str, ...]

    @property
    def flipped(self) -> List[str]:
        """変形前に成り立ち、変形後に破れた第2群の方程式"""
        before = set(self.before.violated)
        return [
            name for name in self.group_two if name in self.after.violated and name not in before
        ]

    @property
    def passed(self) -> bool:
        violated = [name for name in self.group_two if name in self.after.violated]
        return self.before.ok and self.flipped == [DEFORMED_ROW] and violated == [DEFORMED_ROW]


def deformation_check(
    table: Optional[WindtreeTable] = None,
    point: Tuple[float, float] = (0.5, 0.4),
    copy: int = 0,
    delta: complex = 0.05,
) -> DeformationCheck:
    """
    水平シリンダーを1つ変形して、第2群のどの方程式が破れるかを調べる

    既定では aligned_squares(2) の障害物の間を通る長いシリンダーを実方向に変形する。
    """
    table = table if table is not None else aligned_squares(2)
    unfolding = unfold(table)
    surface, basis = unfolding.surface, unfolding.basis
    decomposition = detect_cylinders(surface, 1, basis)
    poly, _ = unfolding.locate(point[0], point[1], copy=copy)
    index = decomposition.cylinder_of(poly)

    system = build_equations(table.spec)
    base = periods(surface, basis)
    moved = cylinder_deform(surface, basis, decomposition, [index], delta, base)
    check = DeformationCheck(
        index,
        check_membership(base, system),
        check_membership(moved, system),
        tuple(row.name for row in system.group_two),
    )
    logger.info("cylinder %d deformation flips %s", index, check.flipped)
    return check


# --- 自己診断 ---


@dataclass(frozen=True)
class SelftestItem:
    number: int
    name: str
    passed: bool
    detail: str
    reduced: bool = False

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _ballistic(cfg: ExperimentConfig, full: bool, store, progress) -> Tuple[bool, str]:
    averaged = direction_averaged_rate(WindtreeTable((), cfg.seed), 8, 4096.0, cfg.seed)
    return abs(averaged.mean - 1.0) <= 0.02, f"rate {averaged.mean:.4f}"


def _classical(cfg: ExperimentConfig, full: bool, store, progress) -> Tuple[bool, str]:
    directions, max_time, tolerance = (50, 1e6, 0.05) if full else (8, 65536.0, 0.15)
    table = sample_table(FamilySpec.rectangles_only(1), cfg.seed)
    averaged: AveragedRate = direction_averaged_rate(table, directions, max_time, cfg.seed)
    detail = f"rate {averaged.mean:.4f} ± {averaged.stderr:.4f} ({averaged.used} directions)"
    return abs(averaged.mean - 2 / 3) <= tolerance, detail


def _cross_oracle(cfg: ExperimentConfig, full: bool, store, progress) -> Tuple[bool, str]:
    tables, directions, max_time = (5, 20, 1e5) if full else (2, 6, 16384.0)
    local = cfg.with_overrides(
        family="n=2", n_tables=tables, n_directions=directions, T_flow=max_time
    )
    result = cross_validate(local, store, progress=progress, write=False)
    agreed = sum(1 for row in result.rows if row.get("agree"))
    return result.agreed, f"{agreed}/{len(result.rows)} tables agree within 2σ"


def _theorem(cfg: ExperimentConfig, full: bool, store, progress) -> Tuple[bool, str]:
    if full:
        budget = dict(n_tables=10, n_directions=50, T_flow=1e6, lyap_iterations=1_000_000)
        local = cfg.with_overrides(family="n=2", lyap_chains=8, **budget)
        tolerance = THEOREM_TOLERANCE
    else:
        budget = dict(n_tables=2, n_directions=8, T_flow=32768.0, lyap_iterations=20_000)
        local = cfg.with_overrides(family="n=2", lyap_chains=1, **budget)
        tolerance = 0.15
    check = theorem_check(local, store, progress=progress, tolerance=tolerance)
    detail = (
        f"diffusion {check.diffusion_mean:.4f} vs {check.stratum} "
        f"{check.lyapunov.lambda_plus_top:.4f}"
    )
    return check.passed, detail


def _figure(name: str):
    def run(cfg: ExperimentConfig, full: bool, store, progress) -> Tuple[bool, str]:
        figure = FIGURES[name]
        if full:
            local, budget = cfg, None
        else:
            local = cfg.with_overrides(lyap_iterations=20_000, lyap_chains=1)
            budget = figure.first + (2 if name == "poles" else 1)
        result = reproduce_figure(name, local, budget, store, progress=progress, write=False)
        values = ", ".join(f"{p}:{v:.4f}" for p, v, _ in result.points)
        return result.passed, f"{values} {result.checks}"

    return run


def _bookkeeping(cfg: ExperimentConfig, full: bool, store, progress) -> Tuple[bool, str]:
    families = bookkeeping_families(*((4, 4) if full else (2, 2)))
    failures = []
    for spec in tqdm(families, desc="bookkeeping", disable=not progress, leave=False):
        failed = [name for name, ok in bookkeeping(spec, cfg.seed).items() if not ok]
        if failed:
            failures.append(f"{spec}: {', '.join(failed)}")
    detail = f"{len(families)} families" if not failures else "; ".join(failures)
    return not failures, detail


def _rauzy_checks(cfg: ExperimentConfig, full: bool, store, progress) -> Tuple[bool, str]:
    iterations = 100_000 if full else 20_000
    strata = catalog() if full else catalog()[:2]
    rng = np.random.default_rng(cfg.seed)
    problems = []
    for signature in tqdm(strata, desc="rauzy", disable=not progress, leave=False):
        gp = stratum_representative(signature, store=store, seed=cfg.seed)
        report = summarize(signature.label(), run_chain(gp, iterations, rng), iterations)
        if abs(report.lambda_minus_top - 1.0) > 0.03:
            problems.append(f"{signature.label()} lambda_minus {report.lambda_minus_top:.4f}")
        if not _unimodular_moves(gp, rng):
            problems.append(f"{signature.label()} step matrix with determinant not ±1")

    torus = StratumSignature((0,), "abelian")
    gp = stratum_representative(torus)
    torus_report = summarize(torus.label(), run_chain(gp, iterations, rng), iterations)
    if abs(torus_report.lambda_plus_top - 1.0) > 0.01:
        problems.append(f"torus lambda_plus {torus_report.lambda_plus_top:.4f}")
    return not problems, "; ".join(problems) or f"{len(strata)} strata and torus"


def _unimodular_moves(gp: LinearInvolution, rng: np.random.Generator, steps: int = 200) -> bool:
    current = gp.with_lengths(balanced_lengths(gp, rng))
    for _ in range(steps):
        try:
            move = rauzy_move(current)
        except LabError:
            current = current.with_lengths(balanced_lengths(current, rng))
            continue
        if round(abs(np.linalg.det(move.matrix))) != 1:
            return False
        current = move.result
    return True


def _deformation(cfg: ExperimentConfig, full: bool, store, progress) -> Tuple[bool, str]:
    check = deformation_check()
    return check.passed, f"cylinder {check.cylinder} flips {check.flipped}"


SELFTEST_ITEMS: Dict[int, Tuple[str, Callable, bool]] = {
    1: ("ballistic control", _ballistic, True),
    2: ("classical windtree", _classical, False),
    3: ("estimator cross-oracle", _cross_oracle, False),
    4: ("theorem check n=2", _theorem, False),
    5: ("figure no_pole trend", _figure("no_pole"), False),
    6: ("figure poles trend", _figure("poles"), False),
    7: ("figure ten_pole spot", _figure("ten_pole"), False),
    8: ("exact bookkeeping", _bookkeeping, True),
    9: ("rauzy self-checks", _rauzy_checks, True),
    10: ("cylinder deformation", _deformation, True),
}


def selftest(
    cfg: ExperimentConfig,
    full: bool = False,
    items: Optional[Sequence[int]] = None,
    store: Optional[ResultStore] = None,
    progress: bool = True,
) -> List[SelftestItem]:
    """
    診断項目を実行して PASS/FAIL を返す

    full=False では統計的な項目（2-7）を縮小した予算と緩い許容誤差で実行します。
    """
    numbers = sorted(items) if items else sorted(SELFTEST_ITEMS)
    results = []
    for number in numbers:
        if number not in SELFTEST_ITEMS:
            raise ValidationError(f"未知の診断項目です: {number}")
        name, check, exact = SELFTEST_ITEMS[number]
        try:
            passed, detail = check(cfg, full, store, progress)
        except LabError as e:
            logger.warning(f"selftest item {number} failed: {e.message}")
            passed, detail = False, f"{type(e).__name__}: {e.message}"
        results.append(SelftestItem(number, name, bool(passed), detail, not (full or exact)))
    return results
