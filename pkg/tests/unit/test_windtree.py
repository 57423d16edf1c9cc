"""
lab/core/windtree.pyのユニットテスト
テーブルの検証・生成・展開のテスト
"""

import json
import sys
from pathlib import Path

import pytest

# プロジェクトルートをパスに追加
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from lab.core.exceptions import NonRectilinear, Overlap, TableError  # noqa: E402
from lab.core.flat import periods, stratum_of  # noqa: E402
from lab.core.windtree import (  # noqa: E402
    FamilySpec,
    Obstacle,
    WindtreeTable,
    aligned_squares,
    family_coordinates,
    notched_rectangle,
    reconstruct_table,
    rectangle,
    sample_table,
    side_labels,
    unfold,
    validate_table,
)


class TestFamilySpec:
    """族指定のテスト"""

    def test_parse(self):
        """文字列からの生成"""
        spec = FamilySpec.parse("n=2,k=1,2")
        assert spec.n == 2
        assert spec.k == (1, 2)
        assert spec.p == 3
        assert not spec.rectangles
        assert str(spec) == "n=2,k=1,2"

    def test_rectangles_only(self):
        """長方形のみの族"""
        spec = FamilySpec.rectangles_only(3)
        assert spec.k == (0, 0, 0)
        assert spec.rectangles


class TestObstacle:
    """障害物のテスト"""

    def test_rectangle_has_no_concave_corner(self):
        """長方形の凹角は0"""
        assert rectangle(0.1, 0.1, 0.2, 0.3).concave_count == 0

    def test_notched_rectangle(self):
        """1段の切り欠きで凹角が1つ"""
        obstacle = notched_rectangle(0.2, 0.2, 0.4, 0.4, [[(0.1, 0.1)], [], [], []])
        assert obstacle.concave_count == 1
        assert len(obstacle.boundary) == 6
        obstacle.check_rectilinear()

    def test_clockwise_sides_start_upwards(self):
        """時計回りの最初の辺は上向きの垂直辺"""
        sides = rectangle(0.2, 0.3, 0.4, 0.25).clockwise_sides()
        (ax, ay), (bx, by) = sides[0]
        assert (ax, ay) == (0.2, 0.3)
        assert ax == bx and by > ay

    def test_too_few_vertices(self):
        """三角形は直線多角形でない"""
        triangle = Obstacle(((0.1, 0.1), (0.3, 0.1), (0.1, 0.3)))
        with pytest.raises(NonRectilinear, match="has 3 vertices"):
            triangle.check_rectilinear()

    def test_diagonal_side(self):
        """斜めの辺"""
        skewed = Obstacle(((0.1, 0.1), (0.3, 0.1), (0.35, 0.3), (0.1, 0.3)))
        with pytest.raises(NonRectilinear, match="axis parallel"):
            skewed.check_rectilinear()


class TestWindtreeTable:
    """テーブルのテスト"""

    def test_contains_is_periodic(self, rectangle_table):
        """障害物の判定は周期的"""
        assert rectangle_table.contains(0.3, 0.4)
        assert rectangle_table.contains(1.3, -0.6)
        assert not rectangle_table.contains(0.1, 0.1)

    def test_boundary_counts_as_obstacle(self, rectangle_table):
        """閉包で判定"""
        assert rectangle_table.contains(0.2, 0.4)

    def test_validate(self, rectangle_table):
        """正しいテーブル"""
        assert validate_table(rectangle_table)

    def test_overlap(self):
        """重なった障害物"""
        table = WindtreeTable((rectangle(0.1, 0.1, 0.3, 0.3), rectangle(0.2, 0.2, 0.3, 0.3)))
        with pytest.raises(Overlap, match="obstacles 0 and 1 overlap"):
            validate_table(table)

    def test_overlap_with_own_translate(self):
        """平行移動像との接触"""
        table = WindtreeTable((rectangle(0.0, 0.2, 1.0, 0.2),))
        with pytest.raises(Overlap) as excinfo:
            validate_table(table)
        assert (excinfo.value.i, excinfo.value.j) == (0, 0)

    def test_json(self, rectangle_table):
        """JSONから同じテーブルを復元"""
        assert WindtreeTable.from_json(rectangle_table.to_json()) == rectangle_table

    def test_json_k_mismatch(self, rectangle_table):
        """k と境界が矛盾するJSON"""
        payload = json.loads(rectangle_table.to_json())
        payload["k"] = [2]
        with pytest.raises(TableError, match="does not match"):
            WindtreeTable.from_json(json.dumps(payload))


class TestSampleTable:
    """テーブル生成のテスト"""

    def test_deterministic(self):
        """同じ seed からは同じテーブル"""
        spec = FamilySpec.parse("n=2")
        assert sample_table(spec, 3) == sample_table(spec, 3)
        assert sample_table(spec, 3) != sample_table(spec, 4)

    def test_concave_counts(self):
        """凹角数が族と一致"""
        table = sample_table(FamilySpec.parse("n=2,k=1,0"), 11)
        assert table.k == (1, 0)
        assert validate_table(table)

    def test_obstacles_strictly_inside(self):
        """障害物は基本領域の内部"""
        table = sample_table(FamilySpec.parse("n=3"), 5)
        for obstacle in table.obstacles:
            for x, y in obstacle.boundary:
                assert 0 < x < 1 and 0 < y < 1


class TestFamilyCoordinates:
    """族の座標のテスト"""

    def test_rectangle_coordinates(self, rectangle_table):
        """垂直辺・水平辺・尺度"""
        assert list(family_coordinates(rectangle_table)) == pytest.approx([0.25, 0.4, 1.0])

    @pytest.mark.parametrize("family", ["n=1", "n=2", "n=2,k=1,0", "n=3,k=2,0,1"])
    def test_length(self, family):
        """長さは 4n + 2p - 1"""
        spec = FamilySpec.parse(family)
        table = sample_table(spec, 2)
        assert len(family_coordinates(table)) == 4 * spec.n + 2 * spec.p - 1

    def test_reconstruct(self):
        """座標から同じ形の障害物を復元"""
        spec = FamilySpec.parse("n=2,k=1,0")
        coords = family_coordinates(sample_table(spec, 8))
        rebuilt = reconstruct_table(coords, spec, anchor=(0.1, 0.1))
        assert rebuilt.k == spec.k
        assert list(family_coordinates(rebuilt)) == pytest.approx(list(coords))

    def test_reconstruct_wrong_length(self):
        """座標の長さが族と合わない"""
        with pytest.raises(TableError, match="expected 3 coordinates"):
            reconstruct_table([0.1, 0.2], FamilySpec.rectangles_only(1))


class TestSideLabels:
    """障害物辺のラベルのテスト"""

    def test_last_sides_dropped(self):
        """最後の障害物の最終辺は除く"""
        labels = [label for label, *_ in side_labels(FamilySpec.parse("n=2,k=1,0"))]
        assert labels == [
            "alpha_1_1",
            "alpha_1_2",
            "alpha_1_3",
            "beta_1_1",
            "beta_1_2",
            "beta_1_3",
            "alpha_2_1",
            "beta_2_1",
        ]


class TestUnfold:
    """展開曲面のテスト"""

    def test_labels(self, rectangle_unfolding):
        """基底のラベル順"""
        assert rectangle_unfolding.basis.labels == (
            "a1",
            "b1",
            "a2",
            "b2",
            "alpha_1_1",
            "beta_1_1",
        )

    def test_label_count(self):
        """ラベル数は 6n + 2p"""
        spec = FamilySpec.parse("n=2,k=1,0")
        unfolding = unfold(sample_table(spec, 4))
        assert len(unfolding.basis.labels) == 6 * spec.n + 2 * spec.p
        assert "d_1" in unfolding.basis.labels
        assert unfolding.basis.labels[-1] == "gamma_1"

    def test_stratum(self, rectangle_unfolding):
        """長方形1つの展開は Q(1^4)"""
        report = stratum_of(rectangle_unfolding.surface)
        assert report.signature.multiplicities == (1, 1, 1, 1)
        assert report.genus == 2

    def test_periods(self, rectangle_unfolding):
        """コピー1は上下が反転したチャート"""
        values = periods(rectangle_unfolding.surface, rectangle_unfolding.basis)
        assert values["a1"] == pytest.approx(1.0)
        assert values["b1"] == pytest.approx(1j)
        assert values["a2"] == pytest.approx(1.0)
        assert values["b2"] == pytest.approx(-1j)
        assert values["alpha_1_1"] == pytest.approx(0.25j)
        assert values["beta_1_1"] == pytest.approx(0.4)

    def test_locate(self, rectangle_unfolding):
        """テーブル上の点のチャート座標"""
        _, z0 = rectangle_unfolding.locate(0.5, 0.1, copy=0)
        _, z1 = rectangle_unfolding.locate(0.5, 0.1, copy=1)
        assert z0 == pytest.approx(0.5 + 0.1j)
        assert z1 == pytest.approx(0.5 - 0.1j)

    def test_locate_inside_obstacle(self, rectangle_unfolding):
        """障害物の中の点"""
        with pytest.raises(TableError, match="inside an obstacle"):
            rectangle_unfolding.locate(0.3, 0.4)

    def test_obstacle_on_boundary(self):
        """基本領域の境界に接する障害物"""
        table = WindtreeTable((rectangle(0.0, 0.2, 0.3, 0.3),))
        with pytest.raises(TableError, match="strictly inside"):
            unfold(table)

    def test_aligned_squares(self):
        """並べた正方形の展開"""
        unfolding = unfold(aligned_squares(2))
        assert stratum_of(unfolding.surface).genus == 3


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
