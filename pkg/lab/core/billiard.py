"""
周期的ビリヤード軌道の追跡と拡散率の推定

無限周期テーブル上の軌道を基本領域の位置と格子セルの組で表し、
障害物の辺での鏡面反射をたどる。拡散率は二進チェックポイントでの
log(変位) 対 log(時間) の最小二乗傾きで推定する。
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats

from .exceptions import (
    CornerGraze,
    InsufficientData,
    NoProgress,
    TooManyExclusions,
    ValidationError,
)
from .windtree import TRANSLATES, WindtreeTable

logger = logging.getLogger(__name__)

EPS_CORNER = 1e-12
EPS_STEP = 1e-14
T0 = 16.0
MIN_DOUBLINGS = 6
MIN_REGRESSION_POINTS = 8
AXIS_EXCLUSION = 1e-6
MAX_EXCLUDED_FRACTION = 0.2
SLOPE_RANGE = (-0.1, 1.1)
MAX_STDERR = 0.25


@dataclass(frozen=True)
class Ray:
    """基本領域内の位置・格子セル・単位方向"""

    position: Tuple[float, float]
    cell: Tuple[int, int]
    direction: Tuple[float, float]

    @classmethod
    def from_angle(cls, x: float, y: float, theta: float, cell: Tuple[int, int] = (0, 0)) -> "Ray":
        return cls((x, y), cell, (math.cos(theta), math.sin(theta)))

    def unfolded(self) -> Tuple[float, float]:
        """平面上の位置（セル座標 + セル内位置）"""
        return (self.cell[0] + float(self.position[0]), self.cell[1] + float(self.position[1]))


def reverse_ray(ray: Ray) -> Ray:
    """方向を反転した光線（時間反転）"""
    return replace(ray, direction=(-ray.direction[0], -ray.direction[1]))


def shift_ray(ray: Ray, shift: Tuple[int, int]) -> Ray:
    """格子ベクトルだけ平行移動した光線"""
    return replace(ray, cell=(ray.cell[0] + shift[0], ray.cell[1] + shift[1]))


@dataclass(frozen=True)
class HitEvent:
    """
    trace の結果

    kind が "side" のとき obstacle/side/parameter は当たった辺と辺上の位置
    （辺の始点からの弧長）、"none" のときは時間予算を使い切った。
    """

    kind: str
    time: float
    obstacle: int = -1
    side: int = -1
    parameter: float = 0.0


@dataclass(frozen=True)
class _Geometry:
    vertical: np.ndarray  # (c, lo, hi, obstacle, side)
    horizontal: np.ndarray
    corners: np.ndarray
    dtype: type


@lru_cache(maxsize=64)
def _geometry(table: WindtreeTable, dtype_name: str) -> _Geometry:
    dtype = np.dtype(dtype_name).type
    vertical, horizontal, corners = [], [], []
    for index, obstacle in enumerate(table.obstacles):
        for dx, dy in TRANSLATES:
            moved = obstacle.translated(dx, dy).boundary
            size = len(moved)
            for j in range(size):
                (ax, ay), (bx, by) = moved[j], moved[(j + 1) % size]
                if ax == bx:
                    vertical.append((ax, min(ay, by), max(ay, by), index, j))
                else:
                    horizontal.append((ay, min(ax, bx), max(ax, bx), index, j))
                corners.append((ax, ay))

    def as_array(rows, width):
        return np.array(rows, dtype=dtype).reshape(-1, width)

    return _Geometry(
        as_array(vertical, 5), as_array(horizontal, 5), as_array(corners, 2), dtype
    )


def _first_hit(sides: np.ndarray, p_along: float, p_across: float, d_along: float, d_across: float):
    """
    軸に垂直な辺の集合との最初の交点

    sides の各行は (座標, 下限, 上限, ...)。along は辺に垂直な軸。
    """
    if len(sides) == 0 or d_along == 0:
        return math.inf, -1
    t = (sides[:, 0] - p_along) / d_along
    across = p_across + t * d_across
    valid = (t > 0) & (across >= sides[:, 1]) & (across <= sides[:, 2])
    if not np.any(valid):
        return math.inf, -1
    candidates = np.where(valid, t, np.inf)
    best = int(np.argmin(candidates))
    return candidates[best], best


def corner_tolerance(dtype, elapsed: float, length: float) -> float:
    """
    角への最接近距離の閾値

    EPS_CORNER と (機械イプシロン × 経過時間) の大きい方をステップ長で拡大します。
    """
    drift = float(np.finfo(dtype).eps) * abs(float(elapsed))
    return max(EPS_CORNER, drift) * max(1.0, float(length))


def _check_corners(geometry: _Geometry, px, py, dx, dy, length, elapsed) -> None:
    corners = geometry.corners
    if len(corners) == 0:
        return
    qx = corners[:, 0] - px
    qy = corners[:, 1] - py
    s = np.clip(qx * dx + qy * dy, 0, length)
    distance = np.hypot(qx - s * dx, qy - s * dy)
    closest = float(distance.min())
    if closest < corner_tolerance(geometry.dtype, elapsed, length):
        raise CornerGraze(f"trajectory passes {closest:.3e} from an obstacle corner")


def trace(
    table: WindtreeTable,
    ray: Ray,
    max_time: float = math.inf,
    dtype=np.float64,
    clock: float = 0.0,
) -> Tuple[Ray, HitEvent]:
    """
    次の障害物の辺まで軌道を進めて反射させる

    基本領域の境界を越えるたびに格子セルを更新します。
    時間予算 max_time 以内に辺に当たらなければ kind="none" を返します。
    clock はこの呼び出しまでの経過時間で、角の判定の閾値に使います。

    Raises:
        CornerGraze: 角への最接近距離が閾値未満の場合
        NoProgress: ステップ長が EPS_STEP 未満の場合
    """
    geometry = _geometry(table, np.dtype(dtype).name)
    cast = geometry.dtype
    px, py = cast(ray.position[0]), cast(ray.position[1])
    dx, dy = cast(ray.direction[0]), cast(ray.direction[1])
    cx, cy = ray.cell
    elapsed = cast(0)
    one, zero = cast(1), cast(0)

    while True:
        remaining = cast(max_time) - elapsed if math.isfinite(max_time) else cast(math.inf)
        tx = (one - px) / dx if dx > 0 else ((zero - px) / dx if dx < 0 else cast(math.inf))
        ty = (one - py) / dy if dy > 0 else ((zero - py) / dy if dy < 0 else cast(math.inf))
        t_box = min(tx, ty)

        t_v, i_v = _first_hit(geometry.vertical, px, py, dx, dy)
        t_h, i_h = _first_hit(geometry.horizontal, py, px, dy, dx)
        t_hit = min(t_v, t_h)
        step = min(t_hit, t_box, remaining)
        _check_corners(geometry, px, py, dx, dy, step, clock + float(elapsed))

        if t_hit <= t_box and t_hit <= remaining:
            if t_hit < EPS_STEP:
                raise NoProgress(f"step {float(t_hit):.3e} below {EPS_STEP}")
            if t_v <= t_h:
                row = geometry.vertical[i_v]
                py = py + t_hit * dy
                px = row[0]
                dx = -dx
                parameter = abs(py - row[1])
            else:
                row = geometry.horizontal[i_h]
                px = px + t_hit * dx
                py = row[0]
                dy = -dy
                parameter = abs(px - row[1])
            elapsed = elapsed + t_hit
            event = HitEvent("side", elapsed, int(row[3]), int(row[4]), parameter)
            return Ray((px, py), (cx, cy), (dx, dy)), event

        if remaining <= t_box:
            px = px + remaining * dx
            py = py + remaining * dy
            elapsed = elapsed + remaining
            return Ray((px, py), (cx, cy), (dx, dy)), HitEvent("none", elapsed)

        px = px + t_box * dx
        py = py + t_box * dy
        elapsed = elapsed + t_box
        if tx == t_box:
            if dx > 0:
                px, cx = zero, cx + 1
            else:
                px, cx = one, cx - 1
        if ty == t_box:
            if dy > 0:
                py, cy = zero, cy + 1
            else:
                py, cy = one, cy - 1


class KahanSum:
    """補償付き加算"""

    def __init__(self):
        self.total = 0.0
        self._compensation = 0.0

    def add(self, value: float) -> float:
        y = value - self._compensation
        t = self.total + y
        self._compensation = (t - self.total) - y
        self.total = t
        return self.total


@dataclass
class DiffusionSeries:
    """二進チェックポイントでの変位の系列"""

    theta: float
    times: List[float] = field(default_factory=list)
    displacements: List[float] = field(default_factory=list)
    cells: List[Tuple[int, int]] = field(default_factory=list)
    degenerate: bool = False
    bounces: int = 0

    def __len__(self) -> int:
        return len(self.times)

    def rows(self) -> List[Tuple[float, float, int, int]]:
        return [(t, d, c[0], c[1]) for t, d, c in zip(self.times, self.displacements, self.cells)]


@dataclass(frozen=True)
class RateEstimate:
    slope: float
    stderr: float
    window: Tuple[int, int]
    status: str

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def is_degenerate_direction(theta: float) -> bool:
    """軸方向の近傍（軸に平行な障害物に対して退化する方向）"""
    residue = math.fmod(theta, math.pi / 2)
    if residue < 0:
        residue += math.pi / 2
    return min(residue, math.pi / 2 - residue) < AXIS_EXCLUSION


def checkpoint_times(max_time: float, t0: float = T0) -> List[float]:
    times = []
    t = t0
    while t <= max_time:
        times.append(t)
        t *= 2
    return times


def diffuse(
    table: WindtreeTable,
    theta: float,
    start: Ray,
    max_time: float,
    t0: float = T0,
    dtype=np.float64,
) -> DiffusionSeries:
    """
    二進チェックポイント t_k = t0 * 2^k ごとに出発点からの変位を記録

    Args:
        table: テーブル
        theta: 方向角（ラジアン）
        start: 出発点（方向は theta で上書き）
        max_time: 最大の流れ時間
        t0: 最初のチェックポイント

    Raises:
        ValidationError: max_time が t0 * 2^MIN_DOUBLINGS 未満の場合
        CornerGraze: 角をかすめた場合（partial に途中までの系列）
    """
    if max_time < t0 * 2**MIN_DOUBLINGS:
        raise ValidationError(f"max_time must be at least {t0 * 2 ** MIN_DOUBLINGS:g}")

    ray = replace(start, direction=(math.cos(theta), math.sin(theta)))
    origin = ray.unfolded()
    series = DiffusionSeries(theta, degenerate=is_degenerate_direction(theta))
    clock = KahanSum()

    try:
        for checkpoint in checkpoint_times(max_time, t0):
            while clock.total < checkpoint:
                ray, event = trace(table, ray, checkpoint - clock.total, dtype, clock.total)
                if event.kind == "none":
                    clock = KahanSum()
                    clock.add(checkpoint)
                    break
                clock.add(float(event.time))
                series.bounces += 1
            x, y = ray.unfolded()
            series.times.append(checkpoint)
            series.displacements.append(math.hypot(x - origin[0], y - origin[1]))
            series.cells.append(ray.cell)
    except CornerGraze as error:
        raise CornerGraze(error.message, partial=series)
    return series


def diffusion_rate(
    series: DiffusionSeries, envelope: bool = False, max_stderr: float = MAX_STDERR
) -> RateEstimate:
    """
    上半分のチェックポイントでの log(変位) 対 log(時間) の傾き

    Args:
        series: 変位の系列
        envelope: 変位の累積最大値で回帰する（limsup の感度分析用）
        max_stderr: これを超える標準誤差は低信頼とみなす

    Raises:
        InsufficientData: チェックポイントが MIN_REGRESSION_POINTS 未満の場合
    """
    m = len(series)
    if m < MIN_REGRESSION_POINTS:
        raise InsufficientData(f"{m} checkpoints, at least {MIN_REGRESSION_POINTS} needed")

    displacements = np.asarray(series.displacements, dtype=float)
    if envelope:
        displacements = np.maximum.accumulate(displacements)
    first = m - math.ceil(m / 2)
    times = np.asarray(series.times[first:], dtype=float)
    window = np.maximum(displacements[first:], np.finfo(float).tiny)
    fit = stats.linregress(np.log(times), np.log(window))

    slope, stderr = float(fit.slope), float(fit.stderr)
    low, high = SLOPE_RANGE
    status = "converged"
    if series.degenerate or stderr > max_stderr or not low <= slope <= high:
        status = "low-confidence"
    slope = min(max(slope, low), high)
    return RateEstimate(slope, stderr, (first, m), status)


@dataclass(frozen=True)
class AveragedRate:
    mean: float
    stderr: float
    used: int
    excluded: int
    slopes: Tuple[float, ...] = ()
    # 採用した方向の系列（slopes と同じ順）
    series: Tuple[DiffusionSeries, ...] = ()


def sample_direction(rng: np.random.Generator) -> float:
    """軸方向の近傍を除いた一様な方向"""
    while True:
        theta = float(rng.uniform(0.0, 2 * math.pi))
        if not is_degenerate_direction(theta):
            return theta


def sample_start(table: WindtreeTable, rng: np.random.Generator) -> Ray:
    """障害物の外の一様な出発点"""
    while True:
        x, y = rng.uniform(0.0, 1.0, size=2)
        if not table.contains(float(x), float(y)):
            return Ray((float(x), float(y)), (0, 0), (1.0, 0.0))


def direction_averaged_rate(
    table: WindtreeTable,
    n_directions: int,
    max_time: float,
    seed: int,
    envelope: bool = False,
    max_stderr: float = MAX_STDERR,
) -> AveragedRate:
    """
    一様に選んだ N 方向の拡散率の平均

    低信頼の推定と角をかすめた軌道（1回だけ出発点を取り直す）は除外します。

    Raises:
        ValidationError: N < 2 の場合
        TooManyExclusions: 除外が20%を超える場合
    """
    if n_directions < 2:
        raise ValidationError("n_directions must be at least 2")

    rng = np.random.default_rng(seed)
    slopes: List[float] = []
    used: List[DiffusionSeries] = []
    excluded = 0
    for _ in range(n_directions):
        theta = sample_direction(rng)
        estimate: Optional[RateEstimate] = None
        for _attempt in range(2):
            try:
                series = diffuse(table, theta, sample_start(table, rng), max_time)
                estimate = diffusion_rate(series, envelope, max_stderr)
                break
            except (CornerGraze, NoProgress) as error:
                logger.warning("direction %.6f restarted: %s", theta, error.message)
        if estimate is None or not estimate.converged:
            excluded += 1
            continue
        slopes.append(estimate.slope)
        used.append(series)

    if excluded > MAX_EXCLUDED_FRACTION * n_directions or not slopes:
        raise TooManyExclusions(
            f"{excluded} of {n_directions} directions excluded", excluded, n_directions
        )

    values = np.array(slopes)
    stderr = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    return AveragedRate(
        float(values.mean()), stderr, len(values), excluded, tuple(slopes), tuple(used)
    )
