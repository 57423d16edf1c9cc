"""
平坦曲面カーネルモジュール
多角形の貼り合わせで作る半平行移動曲面・平行移動曲面の錐点、種数、層、
相対ホモロジー、向き付け二重被覆の計算を提供

辺の向きの約束:
    多角形は反時計回り。辺 (P, j) は頂点 j から頂点 j+1 へ向かう。
    貼り合わせ符号 +1 は平行移動で v(e2) = -v(e1)、符号 -1 は -Id との合成で
    v(e2) = v(e1)。どちらの場合も e の始点は e' の終点へ写る。
"""

import json
import logging
import math
import numbers
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from shapely.geometry import Polygon as ShapelyPolygon

from .exceptions import (
    BasisDeficiency,
    DegeneratePolygon,
    Disconnected,
    GeometryError,
    HolonomyObstruction,
    MismatchedEdge,
    NonPositiveAngle,
    UnknownEdge,
)

logger = logging.getLogger(__name__)

TAU_GEOM = 1e-9
ANGLE_TOL = 1e-6

EdgeRef = Tuple[int, int]
Corner = Tuple[int, int]
# (多角形, 辺, 向き ±1) の列
EdgePath = Tuple[Tuple[int, int, int], ...]


Coordinate = Union[Fraction, float]


def _coordinates(vertices) -> Tuple[Tuple[Coordinate, Coordinate], ...]:
    """全て有理数なら Fraction、そうでなければ float にそろえる"""
    pairs = [tuple(v) for v in vertices]
    exact = all(isinstance(c, numbers.Rational) for pair in pairs for c in pair)
    convert = Fraction if exact else float
    return tuple((convert(x), convert(y)) for x, y in pairs)


@dataclass(frozen=True)
class PlanarPolygon:
    """
    反時計回りの単純多角形

    座標が全て有理数（int / Fraction）なら Fraction のまま保持し、
    面積と辺の貼り合わせの判定を厳密に行います。
    """

    vertices: Tuple[Tuple[Coordinate, Coordinate], ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", _coordinates(self.vertices))

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def exact(self) -> bool:
        return all(isinstance(x, Fraction) for x, _ in self.vertices)

    @property
    def points(self) -> np.ndarray:
        return np.array([[float(x), float(y)] for x, y in self.vertices])

    def vertex(self, j: int) -> complex:
        x, y = self.vertices[j % len(self.vertices)]
        return complex(float(x), float(y))

    def edge_vector(self, j: int) -> complex:
        return self.vertex(j + 1) - self.vertex(j)

    def edge_vectors(self) -> List[complex]:
        return [self.edge_vector(j) for j in range(len(self))]

    def exact_edge(self, j: int) -> Tuple[Coordinate, Coordinate]:
        (x0, y0), (x1, y1) = self.vertices[j % len(self)], self.vertices[(j + 1) % len(self)]
        return x1 - x0, y1 - y0

    def exact_area(self) -> Optional[Fraction]:
        """有理座標の多角形の符号付き面積（それ以外は None）"""
        if not self.exact:
            return None
        size = len(self)
        twice = sum(
            self.vertices[j][0] * self.vertices[(j + 1) % size][1]
            - self.vertices[(j + 1) % size][0] * self.vertices[j][1]
            for j in range(size)
        )
        return Fraction(twice) / 2

    def signed_area(self) -> float:
        exact = self.exact_area()
        if exact is not None:
            return float(exact)
        pts = self.points
        x, y = pts[:, 0], pts[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    def interior_angle(self, j: int) -> float:
        """頂点 j の内角（ラジアン）"""
        incoming = self.edge_vector(j - 1)
        outgoing = self.edge_vector(j)
        turn = math.atan2(
            incoming.real * outgoing.imag - incoming.imag * outgoing.real,
            incoming.real * outgoing.real + incoming.imag * outgoing.imag,
        )
        return math.pi - turn

    def translated(self, shift: Union[complex, Tuple[Coordinate, Coordinate]]) -> "PlanarPolygon":
        """平行移動（有理数の組で与えれば厳密なまま）"""
        dx, dy = (shift.real, shift.imag) if isinstance(shift, complex) else shift
        return PlanarPolygon(tuple((x + dx, y + dy) for x, y in self.vertices))

    def rotated(self, factor: complex) -> "PlanarPolygon":
        """複素数 factor（|factor| = 1）を掛けた多角形"""
        images = [self.vertex(j) * factor for j in range(len(self))]
        return PlanarPolygon(tuple((z.real, z.imag) for z in images))


@dataclass(frozen=True)
class EdgeGluing:
    """有向辺の対合的な組（e1, e2, 符号）"""

    pairs: Tuple[Tuple[EdgeRef, EdgeRef, int], ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "pairs",
            tuple((tuple(a), tuple(b), int(sign)) for a, b, sign in self.pairs),
        )

    def partner_map(self) -> Dict[EdgeRef, Tuple[EdgeRef, int]]:
        partners: Dict[EdgeRef, Tuple[EdgeRef, int]] = {}
        for a, b, sign in self.pairs:
            partners[a] = (b, sign)
            partners[b] = (a, sign)
        return partners

    def pair_index(self) -> Dict[EdgeRef, Tuple[int, int]]:
        """辺 → (組番号, 組内の位置 0/1)"""
        index: Dict[EdgeRef, Tuple[int, int]] = {}
        for k, (a, b, _) in enumerate(self.pairs):
            index[a] = (k, 0)
            index[b] = (k, 1)
        return index


@dataclass(frozen=True)
class ConePoint:
    """頂点類と全角（πの倍数）"""

    corners: Tuple[Corner, ...]
    angle_multiple: int

    @property
    def order(self) -> int:
        return self.angle_multiple - 2


@dataclass(frozen=True)
class HalfTranslationSurface:
    """貼り合わせ多角形による半平行移動曲面"""

    polygons: Tuple[PlanarPolygon, ...]
    gluing: EdgeGluing
    vertex_classes: Tuple[ConePoint, ...]
    corner_class: Dict[Corner, int] = field(compare=False, hash=False)

    @property
    def cone_points(self) -> List[ConePoint]:
        """正則点（全角 2π）を除いた錐点"""
        return [c for c in self.vertex_classes if c.angle_multiple != 2]

    @property
    def is_translation(self) -> bool:
        return all(sign == 1 for _, _, sign in self.gluing.pairs)

    def partner(self, edge: EdgeRef) -> Tuple[EdgeRef, int]:
        try:
            return self._partners[edge]
        except KeyError:
            raise UnknownEdge(f"edge {edge} is not glued")

    @property
    def _partners(self) -> Dict[EdgeRef, Tuple[EdgeRef, int]]:
        cached = self.__dict__.get("_partner_cache")
        if cached is None:
            cached = self.gluing.partner_map()
            object.__setattr__(self, "_partner_cache", cached)
        return cached

    def edge_vector(self, edge: EdgeRef) -> complex:
        poly, j = edge
        if not 0 <= poly < len(self.polygons) or not 0 <= j < len(self.polygons[poly]):
            raise UnknownEdge(f"unknown edge {edge}")
        return self.polygons[poly].edge_vector(j)

    def area(self) -> float:
        return sum(p.signed_area() for p in self.polygons)

    def diameter(self) -> float:
        """多角形の頂点座標から見積もった直径の上界"""
        return sum(float(np.ptp(p.points, axis=0).max()) for p in self.polygons)

    def is_singular(self, corner: Corner) -> bool:
        return self.vertex_classes[self.corner_class[corner]].angle_multiple != 2


def _check_polygon(index: int, polygon: PlanarPolygon) -> None:
    if len(polygon) < 3:
        raise DegeneratePolygon(f"polygon {index} has fewer than 3 vertices")
    shape = ShapelyPolygon(polygon.points)
    if not shape.is_valid:
        raise DegeneratePolygon(f"polygon {index} is not simple")
    if polygon.signed_area() <= 0:
        raise DegeneratePolygon(f"polygon {index} is not positively oriented")


def _check_gluing(polygons: Sequence[PlanarPolygon], gluing: EdgeGluing) -> None:
    seen = set()
    for a, b, sign in gluing.pairs:
        for poly, j in (a, b):
            if not 0 <= poly < len(polygons) or not 0 <= j < len(polygons[poly]):
                raise UnknownEdge(f"unknown edge {(poly, j)}")
        if a == b:
            raise MismatchedEdge(f"edge {a} is glued to itself")
        if a in seen or b in seen:
            raise MismatchedEdge(f"edge {a if a in seen else b} is glued twice")
        seen.update((a, b))
        if sign not in (1, -1):
            raise MismatchedEdge(f"invalid gluing sign {sign} for {a} ~ {b}")

        va = polygons[a[0]].edge_vector(a[1])
        vb = polygons[b[0]].edge_vector(b[1])
        residual = abs(va + vb) if sign == 1 else abs(va - vb)
        first, second = polygons[a[0]], polygons[b[0]]
        if first.exact and second.exact:
            ea, eb = first.exact_edge(a[1]), second.exact_edge(b[1])
            matched = ea == (-sign * eb[0], -sign * eb[1])
        else:
            matched = residual <= TAU_GEOM * max(1.0, abs(va))
        if not matched:
            raise MismatchedEdge(
                f"edges {a} and {b} do not match for sign {sign} (residual {residual:.3e})"
            )

    expected = sum(len(p) for p in polygons)
    if len(seen) != expected:
        raise MismatchedEdge(f"{expected - len(seen)} edges are left unglued")


def _trace_corners(
    polygons: Sequence[PlanarPolygon], partners: Dict[EdgeRef, Tuple[EdgeRef, int]]
) -> List[List[Corner]]:
    """角を辺越しにたどって頂点類に分ける"""
    visited = set()
    classes: List[List[Corner]] = []
    for p, polygon in enumerate(polygons):
        for j in range(len(polygon)):
            if (p, j) in visited:
                continue
            orbit: List[Corner] = []
            corner = (p, j)
            while corner not in visited:
                visited.add(corner)
                orbit.append(corner)
                (q, m), _ = partners[corner]
                corner = (q, (m + 1) % len(polygons[q]))
            classes.append(orbit)
    return classes


def polygon_components(n_polygons: int, gluing: EdgeGluing) -> Tuple[int, np.ndarray]:
    """貼り合わせで結ばれる多角形の連結成分"""
    rows = [a[0] for a, _, _ in gluing.pairs]
    cols = [b[0] for _, b, _ in gluing.pairs]
    graph = coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n_polygons, n_polygons)
    )
    return connected_components(graph, directed=False)


def build_surface(
    polygons: Sequence[PlanarPolygon],
    gluing: EdgeGluing,
    require_connected: bool = True,
) -> HalfTranslationSurface:
    """
    多角形と辺の貼り合わせから曲面を構成

    Args:
        polygons: 反時計回りの多角形
        gluing: 辺の組と符号
        require_connected: 連結でない場合に例外とするか

    Returns:
        錐点を計算済みの曲面

    Raises:
        DegeneratePolygon: 多角形が単純でない、または負の向き
        MismatchedEdge: 組の辺ベクトルが τ_geom を超えて一致しない
        Disconnected: 連結でない
        NonPositiveAngle: 全角がπの正の整数倍にならない
    """
    polygons = tuple(polygons)
    for index, polygon in enumerate(polygons):
        _check_polygon(index, polygon)
    _check_gluing(polygons, gluing)

    if require_connected:
        n_components, _ = polygon_components(len(polygons), gluing)
        if n_components != 1:
            raise Disconnected(f"glued surface has {n_components} components")

    classes = []
    corner_class: Dict[Corner, int] = {}
    for orbit in _trace_corners(polygons, gluing.partner_map()):
        total = sum(polygons[p].interior_angle(j) for p, j in orbit)
        multiple = round(total / math.pi)
        if abs(total - multiple * math.pi) > ANGLE_TOL * max(1, len(orbit)) or multiple < 1:
            raise NonPositiveAngle(
                f"vertex class {orbit[0]} has angle {total / math.pi:.6f}π"
            )
        for corner in orbit:
            corner_class[corner] = len(classes)
        classes.append(ConePoint(tuple(orbit), multiple))

    surface = HalfTranslationSurface(polygons, gluing, tuple(classes), corner_class)
    logger.debug(
        "surface built: %d polygons, %d vertex classes, %d cone points",
        len(polygons),
        len(classes),
        len(surface.cone_points),
    )
    return surface


@dataclass(frozen=True)
class StratumSignature:
    """層の重複度（降順）と種類"""

    multiplicities: Tuple[int, ...]
    kind: str = "quadratic"

    def __post_init__(self):
        object.__setattr__(
            self,
            "multiplicities",
            tuple(sorted((int(d) for d in self.multiplicities), reverse=True)),
        )
        if self.kind not in ("quadratic", "abelian"):
            raise GeometryError(f"unknown stratum kind {self.kind!r}")

    @property
    def genus(self) -> int:
        total = sum(self.multiplicities)
        if self.kind == "quadratic":
            genus, rest = divmod(total + 4, 4)
        else:
            genus, rest = divmod(total + 2, 2)
        if rest or genus < 0:
            raise GeometryError(f"signature {self.multiplicities} has no integer genus")
        return genus

    @property
    def complex_dimension(self) -> int:
        n = len(self.multiplicities)
        if self.kind == "quadratic":
            return 2 * self.genus - 2 + n
        return 2 * self.genus - 1 + max(n, 1)

    def label(self) -> str:
        """"1^8,-1^2" 形式の表記"""
        parts = []
        for value in sorted(set(self.multiplicities), reverse=True):
            count = self.multiplicities.count(value)
            parts.append(f"{value}^{count}" if count > 1 else str(value))
        prefix = "Q" if self.kind == "quadratic" else "H"
        return f"{prefix}({','.join(parts)})"


@dataclass(frozen=True)
class StratumReport:
    signature: StratumSignature
    genus: int
    complex_dimension: int


def euler_genus(surface: HalfTranslationSurface) -> int:
    """V - E + F から種数を求める（連結曲面）"""
    chi = len(surface.vertex_classes) - len(surface.gluing.pairs) + len(surface.polygons)
    genus, rest = divmod(2 - chi, 2)
    if rest:
        raise GeometryError(f"odd Euler characteristic {chi}")
    return genus


def stratum_of(surface: HalfTranslationSurface) -> StratumReport:
    """
    錐点の全角から層・種数・複素次元を求める

    Raises:
        NonPositiveAngle: 全角がπ未満の頂点類がある場合
        GeometryError: ガウス・ボンネの関係とオイラー標数が矛盾する場合
    """
    for cone in surface.vertex_classes:
        if cone.angle_multiple < 1:
            raise NonPositiveAngle(
                f"vertex class {cone.corners[0]} has angle {cone.angle_multiple}π"
            )

    if surface.is_translation:
        orders = []
        for cone in surface.cone_points:
            if cone.angle_multiple % 2:
                raise GeometryError("translation surface with odd cone angle multiple")
            orders.append(cone.angle_multiple // 2 - 1)
        signature = StratumSignature(tuple(orders), "abelian")
    else:
        signature = StratumSignature(tuple(c.order for c in surface.cone_points), "quadratic")

    genus = euler_genus(surface)
    if signature.genus != genus:
        raise GeometryError(
            f"Gauss-Bonnet genus {signature.genus} disagrees with Euler genus {genus}"
        )
    return StratumReport(signature, genus, signature.complex_dimension)


@dataclass(frozen=True)
class DoubleCover:
    """
    向き付け二重被覆

    被覆の多角形 P + s*N はシート s の複製で、シート1は π 回転している。
    """

    surface: HalfTranslationSurface
    base: HalfTranslationSurface
    deck: Tuple[int, ...]
    projection: Tuple[int, ...]
    split: bool

    @property
    def sheets(self) -> int:
        return len(self.base.polygons)

    def lift(self, poly: int, sheet: int) -> int:
        return poly + sheet * self.sheets


def double_cover(surface: HalfTranslationSurface) -> DoubleCover:
    """
    向き付け二重被覆を構成

    符号 +1 の貼り合わせは同じシート内、符号 -1 の貼り合わせはシートをまたぐ。
    ホロノミーが自明な場合は2成分に分かれ、split フラグを立てて返す。

    Raises:
        GeometryError: リーマン・フルヴィッツの関係が成り立たない場合
    """
    n = len(surface.polygons)
    polygons = list(surface.polygons) + [p.rotated(-1) for p in surface.polygons]
    pairs = []
    for (p, j), (q, m), sign in surface.gluing.pairs:
        for s in (0, 1):
            t = s if sign == 1 else 1 - s
            pairs.append(((p + s * n, j), (q + t * n, m), 1))
    cover = build_surface(polygons, EdgeGluing(tuple(pairs)), require_connected=False)

    n_components, _ = polygon_components(len(polygons), cover.gluing)
    split = n_components > 1
    if split:
        logger.info("orientation double cover is disconnected (trivial holonomy)")
    else:
        base_genus = euler_genus(surface)
        odd = sum(1 for c in surface.cone_points if c.order % 2)
        cover_genus = euler_genus(cover)
        if 2 - 2 * cover_genus != 2 * (2 - 2 * base_genus) - odd:
            raise GeometryError(
                f"Riemann-Hurwitz fails: cover genus {cover_genus}, base genus {base_genus}, "
                f"{odd} odd points"
            )

    deck = tuple(list(range(n, 2 * n)) + list(range(n)))
    projection = tuple(list(range(n)) * 2)
    return DoubleCover(cover, surface, deck, projection, split)


@dataclass(frozen=True)
class HomologyBasis:
    """ラベル付きの辺パス（絶対類と相対類）"""

    classes: Tuple[Tuple[str, EdgePath], ...]
    absolute: FrozenSet[str] = frozenset()

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(label for label, _ in self.classes)

    def path(self, label: str) -> EdgePath:
        for name, path in self.classes:
            if name == label:
                return path
        raise KeyError(label)

    def as_dict(self) -> Dict[str, EdgePath]:
        return dict(self.classes)


@dataclass(frozen=True)
class PeriodVector:
    """ラベルごとの複素周期"""

    labels: Tuple[str, ...]
    values: np.ndarray = field(compare=False)

    def __getitem__(self, label: str) -> complex:
        return complex(self.values[self.labels.index(label)])

    def as_dict(self) -> Dict[str, complex]:
        return {label: complex(v) for label, v in zip(self.labels, self.values)}

    def replace(self, updates: Dict[str, complex]) -> "PeriodVector":
        values = self.values.astype(complex).copy()
        for label, value in updates.items():
            values[self.labels.index(label)] = value
        return PeriodVector(self.labels, values)


def path_period(surface: HalfTranslationSurface, path: EdgePath) -> complex:
    total = 0j
    for poly, j, orientation in path:
        total += orientation * surface.edge_vector((poly, j))
    return total


def periods(surface: HalfTranslationSurface, basis: HomologyBasis) -> PeriodVector:
    """
    各類の周期（辺ベクトルの符号付き和）

    Raises:
        UnknownEdge: 曲面にない辺を参照した場合
    """
    values = np.array([path_period(surface, path) for _, path in basis.classes], dtype=complex)
    return PeriodVector(basis.labels, values)


@dataclass(frozen=True)
class HatBasis:
    labels: Tuple[str, ...]
    dropped: Tuple[str, ...]
    vectors: np.ndarray = field(compare=False)
    expected: int = 0


def _endpoints(
    cover: HalfTranslationSurface, poly: int, j: int, orientation: int
) -> Tuple[int, int]:
    size = len(cover.polygons[poly])
    head, tail = (poly, j), (poly, (j + 1) % size)
    if orientation < 0:
        head, tail = tail, head
    return cover.corner_class[head], cover.corner_class[tail]


def _lift_path(
    cover: DoubleCover, label: str, path: EdgePath, closed: bool
) -> List[Tuple[int, int, int]]:
    """基底の辺パスを被覆のシート0から持ち上げる"""
    surface = cover.surface
    lifted: List[Tuple[int, int, int]] = []
    sheet = 0
    current: Optional[int] = None
    start: Optional[int] = None
    for poly, j, orientation in path:
        choices = [sheet, 1 - sheet]
        for candidate in choices:
            head, tail = _endpoints(surface, cover.lift(poly, candidate), j, orientation)
            if current is None or head == current:
                break
        else:
            raise HolonomyObstruction(f"path {label!r} is not connected on the cover")
        sheet = candidate
        if start is None:
            start = head
        current = tail
        lifted.append((cover.lift(poly, sheet), j, orientation))

    if closed and current != start:
        raise HolonomyObstruction(f"absolute class {label!r} has nontrivial linear holonomy")
    return lifted


def _chain(surface: HalfTranslationSurface, path: Sequence[Tuple[int, int, int]]) -> np.ndarray:
    """辺パスを1-チェイン（組ごとの係数）に直す"""
    index = surface.gluing.pair_index()
    chain = np.zeros(len(surface.gluing.pairs))
    for poly, j, orientation in path:
        k, position = index[(poly, j)]
        chain[k] += orientation if position == 0 else -orientation
    return chain


def _face_boundaries(surface: HalfTranslationSurface) -> np.ndarray:
    rows = []
    for p, polygon in enumerate(surface.polygons):
        rows.append(_chain(surface, [(p, j, 1) for j in range(len(polygon))]))
    return np.array(rows)


def hat_basis(cover: DoubleCover, basis: HomologyBasis) -> HatBasis:
    """
    反不変な持ち上げ γ' - deck(γ') の極大独立部分集合

    独立性は面の境界を法とした1-チェインの階数で判定します。

    Raises:
        HolonomyObstruction: 絶対類の持ち上げが閉じない、またはハット像が0の場合
        BasisDeficiency: 独立な元が層の複素次元に足りない場合
    """
    if cover.split:
        raise HolonomyObstruction("hat basis needs a connected orientation double cover")

    surface = cover.surface
    boundaries = _face_boundaries(surface)
    base_rank = np.linalg.matrix_rank(boundaries)
    expected = stratum_of(cover.base).complex_dimension

    kept: List[str] = []
    dropped: List[str] = []
    rows: List[np.ndarray] = []
    for label, path in basis.classes:
        lifted = _lift_path(cover, label, path, closed=label in basis.absolute)
        swapped = [(cover.deck[poly], j, o) for poly, j, o in lifted]
        hat = _chain(surface, lifted) - _chain(surface, swapped)
        if not np.any(hat):
            raise HolonomyObstruction(f"class {label!r} is deck invariant (zero hat image)")
        if len(boundaries):
            candidate = np.vstack(rows + [hat, boundaries])
        else:
            candidate = np.array(rows + [hat])
        if np.linalg.matrix_rank(candidate) - base_rank > len(rows):
            rows.append(hat)
            kept.append(label)
        else:
            dropped.append(label)

    if len(kept) < expected:
        raise BasisDeficiency(
            f"only {len(kept)} independent hat classes, stratum dimension is {expected}"
        )
    if len(kept) > expected:
        raise GeometryError(f"{len(kept)} independent hat classes exceed dimension {expected}")
    logger.debug("hat basis: kept %s, dropped %s", kept, dropped)
    return HatBasis(tuple(kept), tuple(dropped), np.array(rows), expected)


def _dump(value: Coordinate):
    return str(value) if isinstance(value, Fraction) else float(value)


def surface_to_json(surface: HalfTranslationSurface) -> str:
    """{polygons, gluings} 形式のJSON（有理座標は "p/q" の文字列）"""
    payload = {
        "polygons": [[[_dump(x), _dump(y)] for x, y in p.vertices] for p in surface.polygons],
        "gluings": [[list(a), list(b), sign] for a, b, sign in surface.gluing.pairs],
    }
    return json.dumps(payload)


def _load(value):
    return Fraction(value) if isinstance(value, str) else value


def surface_from_json(text: str) -> HalfTranslationSurface:
    payload = json.loads(text)
    polygons = [
        PlanarPolygon(tuple(tuple(_load(c) for c in v) for v in vertices))
        for vertices in payload["polygons"]
    ]
    gluing = EdgeGluing(tuple((tuple(a), tuple(b), sign) for a, b, sign in payload["gluings"]))
    return build_surface(polygons, gluing)


def rotate_surface(surface: HalfTranslationSurface, factor: complex) -> HalfTranslationSurface:
    """全ての多角形に factor を掛けた曲面（貼り合わせは不変）"""
    return build_surface([p.rotated(factor) for p in surface.polygons], surface.gluing)


def square_torus() -> Tuple[HalfTranslationSurface, HomologyBasis]:
    """単位正方形の平坦トーラスと水平・垂直ループ"""
    square = PlanarPolygon(((0, 0), (1, 0), (1, 1), (0, 1)))
    surface = build_surface([square], EdgeGluing((((0, 0), (0, 2), 1), ((0, 1), (0, 3), 1))))
    basis = HomologyBasis((("a", ((0, 0, 1),)), ("b", ((0, 1, 1),))), frozenset({"a", "b"}))
    return surface, basis


def pillowcase() -> Tuple[HalfTranslationSurface, HomologyBasis]:
    """4つの極をもつ枕カバー Q(-1^4) と極を結ぶ2本の相対類"""
    hexagon = PlanarPolygon(((0, 0), (1, 0), (2, 0), (2, 1), (1, 1), (0, 1)))
    gluing = EdgeGluing(
        (
            ((0, 0), (0, 1), -1),
            ((0, 3), (0, 4), -1),
            ((0, 2), (0, 5), 1),
        )
    )
    surface = build_surface([hexagon], gluing)
    basis = HomologyBasis((("s", ((0, 0, 1),)), ("t", ((0, 2, 1),))))
    return surface, basis
