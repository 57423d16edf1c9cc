"""
lab/core/flat.pyのユニットテスト
多角形の貼り合わせ・層の判定・二重被覆のテスト
"""

import sys
from fractions import Fraction
from pathlib import Path

import pytest

# プロジェクトルートをパスに追加
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from lab.core.exceptions import (  # noqa: E402
    DegeneratePolygon,
    Disconnected,
    GeometryError,
    HolonomyObstruction,
    MismatchedEdge,
    UnknownEdge,
)
from lab.core.flat import (  # noqa: E402
    EdgeGluing,
    PlanarPolygon,
    StratumSignature,
    build_surface,
    double_cover,
    hat_basis,
    periods,
    pillowcase,
    rotate_surface,
    square_torus,
    stratum_of,
    surface_from_json,
    surface_to_json,
)

SQUARE = PlanarPolygon(((0, 0), (1, 0), (1, 1), (0, 1)))


class TestBuildSurface:
    """曲面の構成テスト"""

    def test_torus(self):
        """正方形トーラス"""
        surface, _ = square_torus()
        assert surface.is_translation
        assert surface.area() == pytest.approx(1.0)
        assert surface.cone_points == []

    def test_mismatched_edge(self):
        """符号と辺ベクトルが合わない貼り合わせ"""
        gluing = EdgeGluing((((0, 0), (0, 2), -1), ((0, 1), (0, 3), 1)))
        with pytest.raises(MismatchedEdge, match="do not match"):
            build_surface([SQUARE], gluing)

    def test_unglued_edges(self):
        """貼り合わせのない辺"""
        gluing = EdgeGluing((((0, 0), (0, 2), 1),))
        with pytest.raises(MismatchedEdge, match="unglued"):
            build_surface([SQUARE], gluing)

    def test_unknown_edge(self):
        """存在しない辺"""
        gluing = EdgeGluing((((0, 0), (0, 7), 1), ((0, 1), (0, 3), 1)))
        with pytest.raises(UnknownEdge):
            build_surface([SQUARE], gluing)

    def test_clockwise_polygon(self):
        """負の向きの多角形"""
        clockwise = PlanarPolygon(((0, 0), (0, 1), (1, 1), (1, 0)))
        gluing = EdgeGluing((((0, 0), (0, 2), 1), ((0, 1), (0, 3), 1)))
        with pytest.raises(DegeneratePolygon, match="not positively oriented"):
            build_surface([clockwise], gluing)

    def test_disconnected(self):
        """2つのトーラスの非連結和"""
        gluing = EdgeGluing(
            (
                ((0, 0), (0, 2), 1),
                ((0, 1), (0, 3), 1),
                ((1, 0), (1, 2), 1),
                ((1, 1), (1, 3), 1),
            )
        )
        with pytest.raises(Disconnected, match="components"):
            build_surface([SQUARE, SQUARE.translated(3 + 0j)], gluing)
        surface = build_surface(
            [SQUARE, SQUARE.translated(3 + 0j)], gluing, require_connected=False
        )
        assert len(surface.polygons) == 2


class TestExactCoordinates:
    """有理座標の多角形のテスト"""

    def test_rational_vertices_stay_exact(self):
        """int と Fraction の座標は Fraction のまま"""
        third = Fraction(1, 3)
        polygon = PlanarPolygon(((0, 0), (third, 0), (third, third), (0, third)))
        assert polygon.exact
        assert all(isinstance(c, Fraction) for vertex in polygon.vertices for c in vertex)
        assert polygon.exact_area() == Fraction(1, 9)
        assert polygon.vertex(2) == pytest.approx(complex(1 / 3, 1 / 3))
        assert polygon.translated((third, 0)).vertices[1] == (Fraction(2, 3), 0)

    def test_float_vertices(self):
        """浮動小数点を含めば全て float"""
        polygon = PlanarPolygon(((0, 0), (0.5, 0), (0.5, 1), (0, 1)))
        assert not polygon.exact
        assert polygon.exact_area() is None
        assert polygon.signed_area() == pytest.approx(0.5)
        assert isinstance(polygon.vertices[0][0], float)

    def test_exact_gluing_rejects_tiny_mismatch(self):
        """有理座標では許容誤差以下のずれも貼り合わせられない"""
        tiny = Fraction(1, 10**12)
        vertices = ((0, 0), (1, 0), (1 + tiny, 1), (0, 1))
        gluing = EdgeGluing((((0, 0), (0, 2), 1), ((0, 1), (0, 3), 1)))
        with pytest.raises(MismatchedEdge, match="do not match"):
            build_surface([PlanarPolygon(vertices)], gluing)
        approximate = PlanarPolygon(tuple((float(x), float(y)) for x, y in vertices))
        assert build_surface([approximate], gluing).area() == pytest.approx(1.0)

    def test_json_keeps_fractions(self):
        """JSON を通しても有理座標は厳密"""
        third = Fraction(1, 3)
        square = PlanarPolygon(((0, 0), (third, 0), (third, third), (0, third)))
        gluing = EdgeGluing((((0, 0), (0, 2), 1), ((0, 1), (0, 3), 1)))
        restored = surface_from_json(surface_to_json(build_surface([square], gluing)))
        assert restored.polygons[0].vertices == square.vertices
        assert restored.polygons[0].exact


class TestStratum:
    """層・種数・次元のテスト"""

    def test_torus_stratum(self):
        """トーラスは種数1の平行移動曲面"""
        surface, _ = square_torus()
        report = stratum_of(surface)
        assert report.genus == 1
        assert report.signature.kind == "abelian"

    def test_pillowcase_stratum(self):
        """枕カバーは Q(-1^4)"""
        surface, _ = pillowcase()
        report = stratum_of(surface)
        assert report.signature.multiplicities == (-1, -1, -1, -1)
        assert report.genus == 0
        assert report.complex_dimension == 2
        assert report.signature.label() == "Q(-1^4)"

    def test_signature_dimensions(self):
        """重複度から種数と次元"""
        signature = StratumSignature((1, 1, 1, 1))
        assert signature.genus == 2
        assert signature.complex_dimension == 6
        assert signature.label() == "Q(1^4)"

    def test_signature_sorted(self):
        """重複度は降順に正規化"""
        assert StratumSignature((-1, 2, -1, 0)).multiplicities == (2, 0, -1, -1)

    def test_signature_without_genus(self):
        """種数が整数にならない重複度"""
        with pytest.raises(GeometryError, match="integer genus"):
            StratumSignature((1, 1)).genus


class TestPeriods:
    """周期のテスト"""

    def test_torus_periods(self):
        """水平・垂直ループの周期"""
        surface, basis = square_torus()
        values = periods(surface, basis)
        assert values["a"] == pytest.approx(1.0)
        assert values["b"] == pytest.approx(1j)

    def test_rotation(self):
        """回転すると周期も回転する"""
        surface, basis = square_torus()
        rotated = rotate_surface(surface, 1j)
        assert periods(rotated, basis)["a"] == pytest.approx(1j)

    def test_pillowcase_periods(self):
        """極を結ぶ相対類の周期"""
        surface, basis = pillowcase()
        values = periods(surface, basis).as_dict()
        assert values == pytest.approx({"s": 1.0, "t": 1j})

    def test_replace(self):
        """周期の一部を置き換え"""
        surface, basis = square_torus()
        values = periods(surface, basis).replace({"a": 2.0})
        assert values["a"] == pytest.approx(2.0)
        assert values["b"] == pytest.approx(1j)


class TestDoubleCover:
    """向き付け二重被覆のテスト"""

    def test_torus_cover_splits(self):
        """自明なホロノミーでは2成分に分かれる"""
        surface, basis = square_torus()
        cover = double_cover(surface)
        assert cover.split
        with pytest.raises(HolonomyObstruction):
            hat_basis(cover, basis)

    def test_pillowcase_cover(self):
        """枕カバーの被覆はトーラス"""
        surface, _ = pillowcase()
        cover = double_cover(surface)
        assert not cover.split
        assert cover.sheets == 1
        assert cover.deck == (1, 0)
        assert stratum_of(cover.surface).genus == 1

    def test_pillowcase_hat_basis(self):
        """ハット基底は層の次元と同じ大きさ"""
        surface, basis = pillowcase()
        hat = hat_basis(double_cover(surface), basis)
        assert hat.labels == ("s", "t")
        assert hat.dropped == ()
        assert hat.expected == 2


class TestSurfaceJson:
    """JSON入出力のテスト"""

    def test_json_restores_surface(self):
        """{polygons, gluings} 形式から同じ曲面を復元"""
        surface, _ = pillowcase()
        restored = surface_from_json(surface_to_json(surface))
        assert restored.gluing == surface.gluing
        assert stratum_of(restored).signature == stratum_of(surface).signature


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
