"""
lab/core/billiard.pyのユニットテスト
軌道追跡と拡散率推定のテスト
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# プロジェクトルートをパスに追加
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from lab.core.billiard import (  # noqa: E402
    DiffusionSeries,
    KahanSum,
    Ray,
    checkpoint_times,
    corner_tolerance,
    diffuse,
    diffusion_rate,
    direction_averaged_rate,
    is_degenerate_direction,
    reverse_ray,
    sample_direction,
    shift_ray,
    trace,
)
from lab.core.exceptions import (  # noqa: E402
    CornerGraze,
    InsufficientData,
    TooManyExclusions,
    ValidationError,
)
from lab.core.windtree import WindtreeTable  # noqa: E402

EMPTY = WindtreeTable(())


def power_series(exponent, count, theta=0.3):
    """d = t^exponent の合成系列"""
    times = [16.0 * 2**k for k in range(count)]
    return DiffusionSeries(theta, times, [t**exponent for t in times])


class TestTrace:
    """軌道追跡のテスト"""

    def test_hits_vertical_side(self, rectangle_table):
        """右向きの軌道は障害物の左辺で反射"""
        ray = Ray((0.1, 0.4), (0, 0), (1.0, 0.0))
        after, event = trace(rectangle_table, ray)
        assert event.kind == "side"
        assert event.time == pytest.approx(0.1)
        assert after.position == pytest.approx((0.2, 0.4))
        assert after.direction == pytest.approx((-1.0, 0.0))
        assert event.parameter == pytest.approx(0.1)

    def test_crosses_cell_boundary(self, rectangle_table):
        """基本領域を出ると格子セルが変わる"""
        ray = Ray((0.9, 0.1), (0, 0), (1.0, 0.0))
        after, event = trace(rectangle_table, ray, max_time=0.5)
        assert event.kind == "none"
        assert after.cell == (1, 0)
        assert after.unfolded() == pytest.approx((1.4, 0.1))

    def test_corner_tolerance_grows_with_time(self):
        """閾値は経過時間とともに大きくなる"""
        assert corner_tolerance(np.float64, 0.0, 0.5) == pytest.approx(1e-12)
        assert corner_tolerance(np.float64, 1e6, 0.5) == pytest.approx(
            np.finfo(np.float64).eps * 1e6
        )
        assert corner_tolerance(np.float64, 0.0, 10.0) == pytest.approx(1e-11)
        assert corner_tolerance(np.float32, 1e3, 1.0) > corner_tolerance(np.float64, 1e3, 1.0)

    def test_near_corner_after_long_flow(self, rectangle_table):
        """同じ距離でも長く流した後なら角をかすめたとみなす"""
        ray = Ray((0.1, 0.3 - 5e-11), (0, 0), (1.0, 0.0))
        _, event = trace(rectangle_table, ray, max_time=0.5)
        assert event.kind == "none"
        with pytest.raises(CornerGraze):
            trace(rectangle_table, ray, max_time=0.5, clock=1e6)

    def test_time_reversal(self, rectangle_table):
        """壁から離れた点で方向を反転すると出発点に戻る"""
        start = Ray.from_angle(0.05, 0.05, 0.7)
        at_wall, event = trace(rectangle_table, start)
        away, _ = trace(rectangle_table, at_wall, max_time=0.05)
        back_at_wall, back_event = trace(rectangle_table, reverse_ray(away))
        assert back_event.kind == "side"
        assert back_event.time == pytest.approx(0.05)
        home, _ = trace(rectangle_table, back_at_wall, max_time=event.time)
        assert home.unfolded() == pytest.approx(start.unfolded())

    def test_lattice_shift(self, rectangle_table):
        """格子ベクトルの平行移動と可換"""
        start = Ray.from_angle(0.05, 0.05, 0.7)
        after, _ = trace(rectangle_table, start)
        shifted, _ = trace(rectangle_table, shift_ray(start, (3, -2)))
        assert shifted.cell == (after.cell[0] + 3, after.cell[1] - 2)
        assert shifted.position == pytest.approx(after.position)

    def test_empty_table(self):
        """障害物のないテーブルでは直進"""
        after, event = trace(EMPTY, Ray.from_angle(0.5, 0.5, 0.0), max_time=10.0)
        assert event.kind == "none"
        assert after.unfolded() == pytest.approx((10.5, 0.5))


class TestCheckpoints:
    """チェックポイントと方向の除外のテスト"""

    def test_dyadic_times(self):
        """t0 から倍々"""
        assert checkpoint_times(1024) == [16, 32, 64, 128, 256, 512, 1024]

    @pytest.mark.parametrize("theta", [0.0, math.pi / 2, math.pi, -math.pi / 2, 2 * math.pi])
    def test_axis_directions(self, theta):
        """軸方向は退化"""
        assert is_degenerate_direction(theta)

    def test_generic_direction(self):
        """一般の方向"""
        assert not is_degenerate_direction(0.3)

    def test_sampled_directions_not_degenerate(self):
        """サンプルした方向は軸方向を避ける"""
        rng = np.random.default_rng(0)
        assert not any(is_degenerate_direction(sample_direction(rng)) for _ in range(200))

    def test_kahan_sum(self):
        """補償付き加算"""
        clock = KahanSum()
        for _ in range(10):
            clock.add(0.1)
        assert clock.total == 1.0


class TestDiffuse:
    """拡散の測定テスト"""

    def test_empty_table_is_ballistic(self):
        """障害物がなければ変位は時間に等しい"""
        series = diffuse(EMPTY, 0.3, Ray((0.5, 0.5), (0, 0), (1.0, 0.0)), 4096)
        assert len(series) == 9
        assert series.displacements == pytest.approx(series.times, rel=1e-9)
        assert series.bounces == 0

    def test_short_time(self):
        """最大時間が短すぎる"""
        with pytest.raises(ValidationError, match="max_time"):
            diffuse(EMPTY, 0.3, Ray((0.5, 0.5), (0, 0), (1.0, 0.0)), 1000)

    def test_degenerate_flag(self):
        """軸方向の系列には印が付く"""
        series = diffuse(EMPTY, 0.0, Ray((0.5, 0.5), (0, 0), (1.0, 0.0)), 1024)
        assert series.degenerate

    def test_rows(self):
        """(時間, 変位, セル) の行"""
        series = diffuse(EMPTY, 0.3, Ray((0.5, 0.5), (0, 0), (1.0, 0.0)), 1024)
        t, d, cx, cy = series.rows()[0]
        assert t == 16
        assert d == pytest.approx(16)
        assert (cx, cy) == series.cells[0]


class TestDiffusionRate:
    """拡散率の推定テスト"""

    def test_square_root_growth(self):
        """d = t^0.5 の傾き"""
        estimate = diffusion_rate(power_series(0.5, 10))
        assert estimate.slope == pytest.approx(0.5)
        assert estimate.window == (5, 10)
        assert estimate.converged

    def test_odd_count_window(self):
        """上半分（切り上げ）のチェックポイント"""
        assert diffusion_rate(power_series(0.5, 9)).window == (4, 9)

    def test_insufficient_data(self):
        """チェックポイントが足りない"""
        with pytest.raises(InsufficientData):
            diffusion_rate(power_series(0.5, 7))

    def test_slope_clamped(self):
        """範囲外の傾きは低信頼として丸める"""
        estimate = diffusion_rate(power_series(1.5, 10))
        assert estimate.slope == pytest.approx(1.1)
        assert estimate.status == "low-confidence"

    def test_degenerate_series(self):
        """退化した方向は低信頼"""
        series = power_series(0.5, 10)
        series.degenerate = True
        assert not diffusion_rate(series).converged

    def test_envelope(self):
        """累積最大値で回帰"""
        series = power_series(0.5, 10)
        series.displacements[-1] = 1.0
        plain = diffusion_rate(series)
        envelope = diffusion_rate(series, envelope=True)
        assert envelope.slope > plain.slope


class TestDirectionAverage:
    """方向平均のテスト"""

    def test_empty_table(self):
        """障害物がなければ拡散率は1"""
        averaged = direction_averaged_rate(EMPTY, 4, 4096.0, seed=1)
        assert averaged.mean == pytest.approx(1.0, abs=1e-6)
        assert averaged.used == 4
        assert averaged.excluded == 0

    def test_deterministic(self, rectangle_table):
        """同じ seed では同じ結果"""

        def run():
            try:
                return direction_averaged_rate(rectangle_table, 3, 2048.0, seed=5)
            except TooManyExclusions as error:
                return (error.excluded, error.total)

        assert run() == run()

    def test_too_few_directions(self):
        """方向は2つ以上"""
        with pytest.raises(ValidationError, match="at least 2"):
            direction_averaged_rate(EMPTY, 1, 4096.0, seed=1)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
