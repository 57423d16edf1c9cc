"""
展開曲面上の線形流とシリンダー分解

平坦曲面上で一定方向の測地線をたどり、代表曲線 h_S, v_S との符号付き
交差数を数える。周期方向では水平帯を貼り合わせてシリンダー分解を求める。
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from shapely.geometry import LineString, box
from shapely.geometry import Polygon as ShapelyPolygon

from .billiard import (
    MIN_DOUBLINGS,
    T0,
    DiffusionSeries,
    KahanSum,
    checkpoint_times,
    is_degenerate_direction,
)
from .exceptions import NotPeriodic, SingularityHit, UnsupportedSurface, ValidationError
from .flat import EdgeRef, HalfTranslationSurface, HomologyBasis, PlanarPolygon, rotate_surface
from .windtree import MarkedClasses, Unfolding

logger = logging.getLogger(__name__)

EPS_SINGULAR = 1e-10
EPS_EXIT = 1e-12
SIDE_TOL = 1e-9
LENGTH_FACTOR = 1e3
LEAF_ANGLE_TOL = 1e-9


def _cross(p: complex, q: complex) -> float:
    return p.real * q.imag - p.imag * q.real


@dataclass(frozen=True)
class FlowPoint:
    """多角形の番号・チャート座標・単位方向"""

    poly: int
    z: complex
    direction: complex


def _first_exit(surface: HalfTranslationSurface, point: FlowPoint) -> Tuple[float, int, float]:
    """多角形から出る (時間, 辺, 辺上の位置 s ∈ [0, 1])"""
    polygon = surface.polygons[point.poly]
    d = point.direction
    best: Optional[Tuple[float, int, float]] = None
    for j in range(len(polygon)):
        a = polygon.vertex(j)
        v = polygon.edge_vector(j)
        denominator = _cross(d, v)
        if abs(denominator) < 1e-15:
            continue
        w = a - point.z
        t = _cross(w, v) / denominator
        s = _cross(w, d) / denominator
        if t > EPS_EXIT and -SIDE_TOL <= s <= 1 + SIDE_TOL and (best is None or t < best[0]):
            best = (t, j, min(max(s, 0.0), 1.0))
    if best is None:
        raise SingularityHit(f"no exit edge from polygon {point.poly} at {point.z}")
    return best


def _exit(surface: HalfTranslationSurface, point: FlowPoint) -> Tuple[float, int, float]:
    """_first_exit に加えて錐点の近傍に入ったら止める"""
    polygon = surface.polygons[point.poly]
    best = _first_exit(surface, point)
    t, j, s = best
    length = abs(polygon.edge_vector(j))
    ends = (((point.poly, j), s * length), ((point.poly, (j + 1) % len(polygon)), (1 - s) * length))
    for corner, distance in ends:
        if distance < EPS_SINGULAR and surface.is_singular(corner):
            raise SingularityHit(f"trajectory enters the cone point at corner {corner}")
    return best


def _cross_edge(surface: HalfTranslationSurface, point: FlowPoint, j: int, s: float) -> FlowPoint:
    (target, m), sign = surface.partner((point.poly, j))
    polygon = surface.polygons[target]
    a, b = polygon.vertex(m), polygon.vertex((m + 1) % len(polygon))
    direction = point.direction if sign == 1 else -point.direction
    return FlowPoint(target, b + s * (a - b), direction)


def crossing_weights(
    surface: HalfTranslationSurface, marked: MarkedClasses
) -> Dict[EdgeRef, Tuple[int, int]]:
    """
    代表曲線が通る辺 → (v_S の係数, h_S の係数)

    貼り合わせ相手の辺にも逆向きの係数を入れるので、どちらの側から
    出ても同じ交差として数えられる。
    """
    weights: Dict[EdgeRef, Tuple[int, int]] = {}
    for edge, (fx, fy) in marked.weights().items():
        partner, _ = surface.partner(edge)
        for key, factor in ((edge, 1), (partner, -1)):
            wx, wy = weights.get(key, (0, 0))
            weights[key] = (wx + factor * fx, wy + factor * fy)
    return weights


def flow(
    surface: HalfTranslationSurface,
    start: FlowPoint,
    duration: float,
    weights: Optional[Dict[EdgeRef, Tuple[int, int]]] = None,
) -> Tuple[FlowPoint, Tuple[int, int], int]:
    """
    時間 duration だけ流す

    Returns:
        (終点, 符号付き交差数 (x, y), 辺の通過回数)

    Raises:
        SingularityHit: 錐点の EPS_SINGULAR 近傍に入った場合
    """
    weights = weights or {}
    point = start
    clock = KahanSum()
    pairing_x = pairing_y = 0
    crossings = 0
    while True:
        remaining = duration - clock.total
        t, j, s = _exit(surface, point)
        if t >= remaining:
            end = FlowPoint(point.poly, point.z + remaining * point.direction, point.direction)
            return end, (pairing_x, pairing_y), crossings

        coefficient = weights.get((point.poly, j))
        if coefficient is not None:
            # 出ていく辺は常に進行方向の左から右へ横切る
            v = surface.polygons[point.poly].edge_vector(j)
            orientation = int(np.sign(_cross(v, point.direction)))
            pairing_x += coefficient[0] * orientation
            pairing_y += coefficient[1] * orientation
        point = _cross_edge(surface, point, j, s)
        clock.add(t)
        crossings += 1


@dataclass
class CrossingSeries:
    """二進チェックポイントでの符号付き交差数"""

    theta: float
    times: List[float] = field(default_factory=list)
    pairings: List[Tuple[int, int]] = field(default_factory=list)
    crossings: int = 0

    def __len__(self) -> int:
        return len(self.times)

    def rows(self) -> List[Tuple[float, int, int]]:
        return [(t, px, py) for t, (px, py) in zip(self.times, self.pairings)]

    def as_diffusion(self) -> DiffusionSeries:
        """交差数のノルムを変位とみなした系列（diffusion_rate にそのまま渡せる）"""
        return DiffusionSeries(
            self.theta,
            list(self.times),
            [math.hypot(px, py) for px, py in self.pairings],
            list(self.pairings),
            degenerate=is_degenerate_direction(self.theta),
            bounces=self.crossings,
        )


def crossing_diffusion(
    surface: HalfTranslationSurface,
    marked: MarkedClasses,
    theta: float,
    start: Tuple[int, complex],
    max_time: float,
    t0: float = T0,
) -> CrossingSeries:
    """
    方向 theta の測地線と h_S, v_S の交差数を二進チェックポイントで記録

    Args:
        surface: 展開曲面
        marked: 代表曲線
        theta: チャート上の方向角
        start: (多角形, チャート座標)
        max_time: 最大の流れ時間（チャートの長さ単位）
        t0: 最初のチェックポイント

    Raises:
        ValidationError: max_time が短すぎる場合
        SingularityHit: 錐点に当たった場合
    """
    if max_time < t0 * 2**MIN_DOUBLINGS:
        raise ValidationError(f"max_time must be at least {t0 * 2 ** MIN_DOUBLINGS:g}")

    weights = crossing_weights(surface, marked)
    point = FlowPoint(start[0], complex(start[1]), complex(math.cos(theta), math.sin(theta)))
    series = CrossingSeries(theta)
    total_x = total_y = 0
    elapsed = 0.0
    for checkpoint in checkpoint_times(max_time, t0):
        point, (dx, dy), crossings = flow(surface, point, checkpoint - elapsed, weights)
        elapsed = checkpoint
        total_x += dx
        total_y += dy
        series.crossings += crossings
        series.times.append(checkpoint)
        series.pairings.append((total_x, total_y))
    return series


def pairing_matrix(unfolding: Unfolding) -> np.ndarray:
    """
    f = (f_x, f_y) とコピー0の水平・垂直閉測地線 h_1, v_1 との交差数

    障害物の最小座標より下（左）の帯は空いているので、その中の閉測地線を使う。
    行は (f_x, f_y)、列は (h_1, v_1)。テーブル上の格子変位に一致する符号の
    約束では単位行列になる。
    """
    surface = unfolding.surface
    weights = crossing_weights(surface, unfolding.marked)
    scale = unfolding.table.scale
    loops = (
        (0.5, unfolding.ys[1] / 2, 0.0),
        (unfolding.xs[1] / 2, 0.5, math.pi / 2),
    )
    matrix = np.zeros((2, 2), dtype=int)
    for column, (x, y, theta) in enumerate(loops):
        poly, z = unfolding.locate(x, y, copy=0)
        start = FlowPoint(poly, z, complex(round(math.cos(theta)), round(math.sin(theta))))
        _, (px, py), _ = flow(surface, start, scale, weights)
        matrix[:, column] = (px, py)
    return matrix


# --- シリンダー分解 ---


@dataclass(frozen=True)
class _Cell:
    up: int
    down: int
    top: Tuple[int, ...]
    bottom: Tuple[int, ...]
    height: float
    length: float


def _cell(surface: HalfTranslationSurface, poly: int) -> _Cell:
    polygon = surface.polygons[poly]
    ups, downs, tops, bottoms = [], [], [], []
    for j, v in enumerate(polygon.edge_vectors()):
        if abs(v.real) < SIDE_TOL and v.imag > SIDE_TOL:
            ups.append(j)
        elif abs(v.real) < SIDE_TOL and v.imag < -SIDE_TOL:
            downs.append(j)
        elif abs(v.imag) < SIDE_TOL:
            (bottoms if v.real > 0 else tops).append(j)
        else:
            raise UnsupportedSurface(f"polygon {poly} has an edge transverse to the direction")
    if len(ups) != 1 or len(downs) != 1:
        raise UnsupportedSurface(f"polygon {poly} is not a single horizontal band")
    height = polygon.edge_vector(ups[0]).imag
    length = float(np.ptp(polygon.points[:, 0]))
    return _Cell(ups[0], downs[0], tuple(tops), tuple(bottoms), height, length)


@dataclass(frozen=True)
class Cylinder:
    """
    シリンダー

    core は中心帯を横切る辺 (多角形, 辺, 進行方向 ±1) を貼り合わせの両側について並べたもの。
    intersections は芯曲線と基底の各類との交差数。
    """

    width: float
    circumference: float
    core: Tuple[Tuple[int, int, int], ...]
    cells: Tuple[int, ...]
    intersections: Dict[str, int] = field(default_factory=dict, compare=False, hash=False)

    @property
    def area(self) -> float:
        return self.width * self.circumference


@dataclass(frozen=True)
class CylinderDecomposition:
    direction: complex
    rotation: complex
    cylinders: Tuple[Cylinder, ...]
    # 多角形 → (シリンダー番号, 多角形の高さ)。複数のシリンダーにまたがる多角形は split へ
    cell_heights: Dict[int, Tuple[int, float]] = field(compare=False, hash=False)
    split: Tuple[int, ...] = ()

    def cylinder_of(self, poly: int) -> int:
        return self.cell_heights[poly][0]

    def total_area(self) -> float:
        return sum(c.area for c in self.cylinders)

    def report(self) -> List[Dict]:
        return [
            {
                "width": c.width,
                "circumference": c.circumference,
                "core_class": dict(c.intersections),
            }
            for c in self.cylinders
        ]

    def to_json(self) -> str:
        return json.dumps(self.report(), indent=2)


def _strip_cycle(
    rotated: HalfTranslationSurface, cells: Sequence[_Cell], start: Tuple[int, int]
) -> List[Tuple[int, int]]:
    nodes = [start]
    poly, heading = start
    limit = 2 * len(cells) + 1
    while True:
        exit_edge = cells[poly].up if heading == 1 else cells[poly].down
        (target, m), sign = rotated.partner((poly, exit_edge))
        heading *= sign
        expected = cells[target].down if heading == 1 else cells[target].up
        if m != expected:
            raise UnsupportedSurface(f"edge ({target}, {m}) does not bound a horizontal band")
        poly = target
        if (poly, heading) == start:
            return nodes
        nodes.append((poly, heading))
        if len(nodes) > limit:
            raise NotPeriodic(f"strip from {start} does not close")

def detect_cylinders(
    surface: HalfTranslationSurface,
    direction: complex = 1,
    basis: Optional[HomologyBasis] = None,
) -> CylinderDecomposition:
    """
    周期方向のシリンダー分解

    direction を水平に回した曲面で、全ての多角形が単一の水平帯なら帯を貼り継ぐ。
    そうでなければ頂点から出る水平な葉をたどって多角形を高さで切り分け、
    閉じた葉と正則な葉で結ばれる断片を同じシリンダーにまとめる。

    Args:
        surface: 曲面
        direction: 方向（複素数）
        basis: 芯曲線との交差数を求める基底

    Raises:
        ValidationError: direction が0の場合
        UnsupportedSurface: 水平帯にならず、凸でない多角形がある場合
        NotPeriodic: 葉が閉じない、周長が上限を超える、または面積が合わない場合
    """
    direction = complex(direction)
    if abs(direction) == 0:
        raise ValidationError("direction must be nonzero")
    rotation = direction.conjugate() / abs(direction)
    rotated = surface if rotation == 1 else rotate_surface(surface, rotation)
    try:
        cells = [_cell(rotated, poly) for poly in range(len(rotated.polygons))]
    except UnsupportedSurface as error:
        logger.debug("%s; tracing leaves from the vertices", error.message)
        decomposition = traced_cylinders(rotated, direction, rotation, basis)
    else:
        decomposition = _band_cylinders(rotated, cells, direction, rotation, basis)

    area = surface.area()
    if abs(decomposition.total_area() - area) > 1e-9 * area:
        raise NotPeriodic(
            f"cylinder areas sum to {decomposition.total_area():.12g}, surface area {area:.12g}"
        )
    logger.info("direction %s: %d cylinders", direction, len(decomposition.cylinders))
    return decomposition


def _band_cylinders(
    rotated: HalfTranslationSurface,
    cells: Sequence[_Cell],
    direction: complex,
    rotation: complex,
    basis: Optional[HomologyBasis],
) -> CylinderDecomposition:
    """全ての多角形が単一の水平帯のとき、境界に錐点を含まない帯同士をまとめる"""
    max_length = LENGTH_FACTOR * rotated.diameter()

    strips: List[List[Tuple[int, int]]] = []
    strip_of: Dict[int, int] = {}
    for poly in range(len(cells)):
        if poly in strip_of:
            continue
        nodes = _strip_cycle(rotated, cells, (poly, 1))
        for p, _ in nodes:
            strip_of[p] = len(strips)
        strips.append(nodes)

    parent = list(range(len(strips)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for index, nodes in enumerate(strips):
        boundary = []
        for poly, heading in nodes:
            edges = cells[poly].top if heading == 1 else cells[poly].bottom
            boundary.extend((poly, j) for j in edges)
        size = {poly: len(rotated.polygons[poly]) for poly, _ in nodes}
        singular = any(
            rotated.is_singular((poly, j)) or rotated.is_singular((poly, (j + 1) % size[poly]))
            for poly, j in boundary
        )
        if singular:
            continue
        for edge in boundary:
            (target, _), _ = rotated.partner(edge)
            parent[find(strip_of[target])] = find(index)

    groups: Dict[int, List[int]] = {}
    for index in range(len(strips)):
        groups.setdefault(find(index), []).append(index)

    cylinders: List[Cylinder] = []
    cell_heights: Dict[int, Tuple[int, float]] = {}
    for members in groups.values():
        widths, lengths = [], []
        for index in members:
            nodes = strips[index]
            visited = set(nodes)
            flipped = any((p, -h) in visited for p, h in nodes)
            height = cells[nodes[0][0]].height
            widths.append(height / 2 if flipped else height)
            lengths.append(sum(cells[p].length for p, _ in nodes))
        circumference = lengths[0]
        if circumference > max_length:
            raise NotPeriodic(
                f"cylinder circumference {circumference:.3e} exceeds {max_length:.3e}"
            )
        if max(lengths) - min(lengths) > SIDE_TOL * max(1.0, circumference):
            logger.warning("strips of one cylinder disagree in length: %s", lengths)

        core_nodes = strips[members[0]]
        core: List[Tuple[int, int, int]] = []
        for poly, heading in core_nodes:
            exit_edge = cells[poly].up if heading == 1 else cells[poly].down
            (target, m), sign = rotated.partner((poly, exit_edge))
            core.append((poly, exit_edge, heading))
            core.append((target, m, heading * sign))

        number = len(cylinders)
        for index in members:
            for poly, _ in strips[index]:
                cell_heights[poly] = (number, cells[poly].height)
        cylinder = Cylinder(
            float(sum(widths)),
            float(circumference),
            tuple(core),
            tuple(sorted({p for i in members for p, _ in strips[i]})),
        )
        if basis is not None:
            cylinder.intersections.update(_core_intersections(rotated, cells, core_nodes, basis))
        cylinders.append(cylinder)

    return CylinderDecomposition(direction, rotation, tuple(cylinders), cell_heights)


def _core_intersections(
    rotated: HalfTranslationSurface,
    cells: Sequence[_Cell],
    core_nodes: Sequence[Tuple[int, int]],
    basis: HomologyBasis,
) -> Dict[str, int]:
    """中心帯の側辺を上向きに横切る回数から芯曲線との交差数を数える"""
    sides = set()
    for poly, _ in core_nodes:
        sides.add((poly, cells[poly].up))
        sides.add((poly, cells[poly].down))
    result = {}
    for label in basis.labels:
        count = 0
        for poly, j, orientation in basis.path(label):
            if (poly, j) in sides:
                count += int(np.sign((orientation * rotated.edge_vector((poly, j))).imag))
        result[label] = count
    return result


# --- 一般の方向：頂点から出る水平な葉で多角形を切り分ける ---

# (出る多角形, 辺, 出る向き, 入る多角形, 辺, 入る向き)
Crossing = Tuple[int, int, complex, int, int, complex]


@dataclass(frozen=True)
class _Piece:
    """多角形の高さ (low, high) の帯"""

    poly: int
    low: float
    high: float
    area: float


def _vertex_hit(
    surface: HalfTranslationSurface, point: FlowPoint, j: int, s: float
) -> Optional[Tuple[int, int]]:
    polygon = surface.polygons[point.poly]
    length = abs(polygon.edge_vector(j))
    if s * length < EPS_SINGULAR:
        return (point.poly, j)
    if (1 - s) * length < EPS_SINGULAR:
        return (point.poly, (j + 1) % len(polygon))
    return None


def _enters(polygon: PlanarPolygon, k: int, direction: complex) -> bool:
    """頂点 k から direction へ進むと多角形の内部に入るか"""
    q = direction / polygon.edge_vector(k)
    phi = math.atan2(q.imag, q.real) % (2 * math.pi)
    return LEAF_ANGLE_TOL < phi < polygon.interior_angle(k) - LEAF_ANGLE_TOL


def _vertex_leaf(
    surface: HalfTranslationSurface, corner: Tuple[int, int], heading: int, max_length: float
) -> Tuple[List[Tuple[int, float]], Tuple[int, int]]:
    """
    角 corner から水平に出る葉を次の頂点までたどる

    Returns:
        (通った多角形と高さの列, 行き着いた角)
    """
    poly, k = corner
    point = FlowPoint(poly, surface.polygons[poly].vertex(k), complex(heading))
    chords: List[Tuple[int, float]] = []
    travelled = 0.0
    while True:
        chords.append((point.poly, point.z.imag))
        t, j, s = _first_exit(surface, point)
        travelled += t
        end = _vertex_hit(surface, point, j, s)
        if end is not None:
            return chords, end
        if travelled > max_length:
            raise NotPeriodic(
                f"leaf from corner {corner} reaches no vertex within {max_length:.3e}"
            )
        point = _cross_edge(surface, point, j, s)


def _chord(polygon: PlanarPolygon, y: float) -> Tuple[float, float]:
    xs = polygon.points[:, 0]
    line = LineString([(xs.min() - 1.0, y), (xs.max() + 1.0, y)])
    section = ShapelyPolygon(polygon.points).intersection(line)
    if section.is_empty:
        raise UnsupportedSurface(f"height {y:.6g} misses the polygon")
    x0, _, x1, _ = section.bounds
    return x0, x1


def _closed_leaf(
    surface: HalfTranslationSurface, poly: int, y: float, max_length: float
) -> Tuple[float, List[Tuple[int, float]], List[Crossing]]:
    """
    多角形 poly の高さ y の弦の中点から右向きに1周する

    Returns:
        (周長, 通った多角形と高さの列, 横切った辺の列)

    Raises:
        NotPeriodic: 頂点に当たる、または max_length までに閉じない場合
    """
    x0, x1 = _chord(surface.polygons[poly], y)
    x = (x0 + x1) / 2
    point = FlowPoint(poly, complex(x, y), 1 + 0j)
    length = 0.0
    chords: List[Tuple[int, float]] = []
    crossings: List[Crossing] = []
    while True:
        chords.append((point.poly, point.z.imag))
        t, j, s = _first_exit(surface, point)
        if _vertex_hit(surface, point, j, s) is not None:
            raise NotPeriodic(f"leaf at height {y:.6g} of polygon {poly} hits a vertex")
        length += t
        entered = _cross_edge(surface, point, j, s)
        (target, m), _ = surface.partner((point.poly, j))
        crossings.append((point.poly, j, point.direction, target, m, entered.direction))
        point = entered
        if point.poly == poly and point.direction == 1 and abs(point.z.imag - y) < SIDE_TOL:
            return length + (x - point.z.real), chords, crossings
        if length > max_length:
            raise NotPeriodic(f"leaf at height {y:.6g} of polygon {poly} does not close")


def _leaf_intersections(
    rotated: HalfTranslationSurface, crossings: Sequence[Crossing], basis: HomologyBasis
) -> Dict[str, int]:
    """閉じた葉が基底の辺パスを横切る符号付き回数（左から右へ横切ると +1）"""
    sides: Dict[Tuple[int, int], List[complex]] = {}
    for poly, j, out, target, m, into in crossings:
        sides.setdefault((poly, j), []).append(out)
        sides.setdefault((target, m), []).append(into)
    result = {}
    for label in basis.labels:
        count = 0
        for poly, j, orientation in basis.path(label):
            v = orientation * rotated.edge_vector((poly, j))
            count += sum(int(np.sign(_cross(d, v))) for d in sides.get((poly, j), ()))
        result[label] = count
    return result


def _components(size: int, links: Sequence[Tuple[int, int]]) -> np.ndarray:
    rows = np.array([a for a, _ in links], dtype=int)
    cols = np.array([b for _, b in links], dtype=int)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size))
    _, labels = connected_components(graph, directed=False)
    return labels


def traced_cylinders(
    rotated: HalfTranslationSurface,
    direction: complex = 1,
    rotation: complex = 1,
    basis: Optional[HomologyBasis] = None,
) -> CylinderDecomposition:
    """
    水平方向のシリンダー分解（多角形は凸であること）

    各頂点から内部へ向かう水平な葉を次の頂点までたどり、通った高さで多角形を
    断片に切る。断片の中の葉はどの頂点にも当たらずに閉じる。同じ閉じた葉が通る
    断片と、錐点に触れない葉をはさんで隣り合う断片を同じシリンダーにまとめる。

    Args:
        rotated: 方向を水平に回した曲面
        direction: 元の方向（結果に記録する）
        rotation: 元の曲面から rotated への回転
        basis: 芯曲線との交差数を求める基底

    Raises:
        UnsupportedSurface: 凸でない多角形がある場合
        NotPeriodic: 葉が閉じない場合
    """
    polygons = rotated.polygons
    for poly, polygon in enumerate(polygons):
        if any(polygon.interior_angle(k) > math.pi + LEAF_ANGLE_TOL for k in range(len(polygon))):
            raise UnsupportedSurface(f"polygon {poly} is not convex")
    max_length = LENGTH_FACTOR * rotated.diameter()
    tol = SIDE_TOL * max(1.0, rotated.diameter())

    # 頂点類を水平な葉と水平な辺で結び、錐点を含む成分を分離線とする
    class_links: List[Tuple[int, int]] = []
    chords: Dict[int, List[Tuple[float, int]]] = {poly: [] for poly in range(len(polygons))}
    for poly, polygon in enumerate(polygons):
        for k in range(len(polygon)):
            origin = rotated.corner_class[(poly, k)]
            if abs(polygon.edge_vector(k).imag) < tol:
                class_links.append((origin, rotated.corner_class[(poly, (k + 1) % len(polygon))]))
            for heading in (1, -1):
                if not _enters(polygon, k, complex(heading)):
                    continue
                path, end = _vertex_leaf(rotated, (poly, k), heading, max_length)
                class_links.append((origin, rotated.corner_class[end]))
                for p, y in path:
                    chords[p].append((y, origin))
    leaf_of = _components(len(rotated.vertex_classes), class_links)
    separatrices = {
        leaf_of[i] for i, cone in enumerate(rotated.vertex_classes) if cone.angle_multiple != 2
    }

    # 多角形ごとに臨界高さで断片に切る
    pieces: List[_Piece] = []
    levels_of: Dict[int, List[float]] = {}
    first_piece: Dict[int, int] = {}
    piece_links: List[Tuple[int, int]] = []
    for poly, polygon in enumerate(polygons):
        candidates = sorted(
            [float(y) for y in polygon.points[:, 1]] + [y for y, _ in chords[poly]]
        )
        levels = [candidates[0]]
        for y in candidates[1:]:
            if y - levels[-1] > tol:
                levels.append(y)
        levels_of[poly] = levels
        first_piece[poly] = len(pieces)
        shape = ShapelyPolygon(polygon.points)
        x0, _, x1, _ = shape.bounds
        for low, high in zip(levels, levels[1:]):
            area = shape.intersection(box(x0, low, x1, high)).area
            pieces.append(_Piece(poly, low, high, float(area)))
        # 錐点に触れない葉をはさむ断片は同じシリンダー
        for i, level in enumerate(levels[1:-1]):
            singular = any(
                leaf_of[origin] in separatrices
                for y, origin in chords[poly]
                if abs(y - level) <= tol
            )
            if not singular:
                piece = first_piece[poly] + i
                piece_links.append((piece, piece + 1))

    def piece_at(poly: int, y: float) -> int:
        levels = levels_of[poly]
        i = int(np.searchsorted(levels, y)) - 1
        return first_piece[poly] + min(max(i, 0), len(levels) - 2)

    # 断片の中点の高さの葉を1周させ、通った断片を結ぶ
    loops: Dict[int, Tuple[float, List[Crossing]]] = {}
    visited = set()
    for index, piece in enumerate(pieces):
        if index in visited:
            continue
        y = (piece.low + piece.high) / 2
        length, path, crossings = _closed_leaf(rotated, piece.poly, y, max_length)
        loops[index] = (length, crossings)
        for p, height in path:
            other = piece_at(p, height)
            visited.add(other)
            piece_links.append((index, other))
    cylinder_of_piece = _components(len(pieces), piece_links)

    groups: Dict[int, List[int]] = {}
    for index in range(len(pieces)):
        groups.setdefault(int(cylinder_of_piece[index]), []).append(index)

    cylinders: List[Cylinder] = []
    members_of_poly: Dict[int, set] = {}
    for members in sorted(groups.values()):
        number = len(cylinders)
        traced = [loops[i] for i in members if i in loops]
        lengths = [length for length, _ in traced]
        circumference, crossings = traced[0]
        if max(lengths) - min(lengths) > SIDE_TOL * max(1.0, circumference):
            logger.warning("closed leaves of one cylinder disagree in length: %s", lengths)
        area = sum(pieces[i].area for i in members)
        core: List[Tuple[int, int, int]] = []
        for poly, j, out, target, m, into in crossings:
            core.append((poly, j, int(out.real)))
            core.append((target, m, int(into.real)))
        cylinder = Cylinder(
            float(area / circumference),
            float(circumference),
            tuple(core),
            tuple(sorted({pieces[i].poly for i in members})),
        )
        if basis is not None:
            cylinder.intersections.update(_leaf_intersections(rotated, crossings, basis))
        cylinders.append(cylinder)
        for i in members:
            members_of_poly.setdefault(pieces[i].poly, set()).add(number)

    cell_heights: Dict[int, Tuple[int, float]] = {}
    split = []
    for poly, numbers in sorted(members_of_poly.items()):
        if len(numbers) == 1:
            height = float(np.ptp(polygons[poly].points[:, 1]))
            cell_heights[poly] = (next(iter(numbers)), height)
        else:
            split.append(poly)
    return CylinderDecomposition(
        direction, rotation, tuple(cylinders), cell_heights, tuple(split)
    )
