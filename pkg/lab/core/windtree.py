"""
風の木テーブルモジュール
B_n(k_1, ..., k_n) 族のテーブル検証・生成と、半平行移動曲面への展開

テーブル座標はトーラスの一辺を1に正規化した単位正方形 [0, 1)^2。
展開の第2コピーは水平軸に関する鏡映 y -> -y で描く。
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, shortest_path
from shapely.geometry import Point, box
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.geometry.polygon import orient
from shapely.ops import unary_union
from shapely.prepared import prep

from .exceptions import (
    DisconnectedComplement,
    NonRectilinear,
    Overlap,
    SamplingExhausted,
    TableError,
)
from .flat import (
    EdgeGluing,
    EdgePath,
    HalfTranslationSurface,
    HomologyBasis,
    PlanarPolygon,
    build_surface,
)
from .validators import InputValidator

logger = logging.getLogger(__name__)

# 棄却サンプリングの上限回数
MAX_REJECTION_ROUNDS = 10_000
# 異なる障害物の辺の最小間隔
DELTA_MIN = 1e-3
TRANSLATES = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)]


@dataclass(frozen=True)
class FamilySpec:
    """障害物数 n と各障害物の凹角数 k_i"""

    n: int
    k: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        InputValidator.validate_family(self.n, self.k)

    @property
    def p(self) -> int:
        return sum(self.k)

    @property
    def rectangles(self) -> bool:
        return self.p == 0

    @classmethod
    def parse(cls, text: str) -> "FamilySpec":
        """"n=2,k=1,2" 形式から生成"""
        n, k = InputValidator.parse_family(text)
        return cls(n, k)

    @classmethod
    def rectangles_only(cls, n: int) -> "FamilySpec":
        return cls(n, (0,) * n)

    def __str__(self) -> str:
        return f"n={self.n},k={','.join(str(v) for v in self.k)}"


@dataclass(frozen=True)
class Obstacle:
    """軸に平行な単純直線多角形（反時計回り）"""

    boundary: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "boundary", tuple((float(x), float(y)) for x, y in self.boundary)
        )

    @property
    def shape(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.boundary)

    def corner_turns(self) -> List[int]:
        """各頂点での曲がり方（+1: 外向きの角、-1: 内向きの角）"""
        turns = []
        size = len(self.boundary)
        for j in range(size):
            ax, ay = self.boundary[j - 1]
            bx, by = self.boundary[j]
            cx, cy = self.boundary[(j + 1) % size]
            cross = (bx - ax) * (cy - by) - (by - ay) * (cx - bx)
            turns.append(1 if cross > 0 else -1)
        return turns

    @property
    def concave_count(self) -> int:
        return sum(1 for t in self.corner_turns() if t < 0)

    def clockwise_sides(self) -> List[Tuple[Tuple[float, float], Tuple[float, float]]]:
        """
        最下段の水平辺の左端から時計回りにたどった辺の列

        最初の辺は上向きの垂直辺になります。
        """
        size = len(self.boundary)
        horizontal = [
            j for j in range(size) if self.boundary[j][1] == self.boundary[(j + 1) % size][1]
        ]
        lowest = min(
            horizontal,
            key=lambda j: (
                self.boundary[j][1],
                min(self.boundary[j][0], self.boundary[(j + 1) % size][0]),
            ),
        )
        a, b = self.boundary[lowest], self.boundary[(lowest + 1) % size]
        start = lowest if a[0] < b[0] else (lowest + 1) % size
        ordered = [self.boundary[(start - t) % size] for t in range(size)]
        return [(ordered[t], ordered[(t + 1) % size]) for t in range(size)]

    def translated(self, dx: float, dy: float) -> "Obstacle":
        return Obstacle(tuple((x + dx, y + dy) for x, y in self.boundary))

    def check_rectilinear(self) -> None:
        """
        全ての辺が水平または垂直で向きが交互になっていることの検証

        Raises:
            NonRectilinear: 斜めの辺や連続する同方向の辺がある場合
        """
        size = len(self.boundary)
        if size < 4 or size % 2:
            raise NonRectilinear(f"obstacle has {size} vertices")
        kinds = []
        for j in range(size):
            (ax, ay), (bx, by) = self.boundary[j], self.boundary[(j + 1) % size]
            if ax == bx and ay != by:
                kinds.append("v")
            elif ay == by and ax != bx:
                kinds.append("h")
            else:
                raise NonRectilinear(f"side {j} is not axis parallel")
        if any(kinds[j] == kinds[j - 1] for j in range(size)):
            raise NonRectilinear("consecutive sides with the same direction")
        if not self.shape.is_valid or self.shape.area <= 0:
            raise NonRectilinear("obstacle boundary is not a simple polygon")


def rectangle(x0: float, y0: float, width: float, height: float) -> Obstacle:
    return Obstacle(((x0, y0), (x0 + width, y0), (x0 + width, y0 + height), (x0, y0 + height)))


def notched_rectangle(
    x0: float,
    y0: float,
    width: float,
    height: float,
    steps: Sequence[Sequence[Tuple[float, float]]],
) -> Obstacle:
    """
    四隅を階段状に切り欠いた直線多角形

    Args:
        steps: 各隅（左下, 右下, 右上, 左上）ごとの切り欠き寸法 (幅, 高さ) の列。
               幅は増加、高さは減少の順に並べ、1段ごとに凹角が1つ増える

    Returns:
        外向きの角 4 + k、内向きの角 k をもつ障害物
    """
    shape = box(x0, y0, x0 + width, y0 + height)
    anchors = [
        (x0, y0, 1, 1),
        (x0 + width, y0, -1, 1),
        (x0 + width, y0 + height, -1, -1),
        (x0, y0 + height, 1, -1),
    ]
    cuts = []
    for (ax, ay, sx, sy), corner_steps in zip(anchors, steps):
        for cut_w, cut_h in corner_steps:
            xs = sorted((ax, ax + sx * cut_w))
            ys = sorted((ay, ay + sy * cut_h))
            cuts.append(box(xs[0], ys[0], xs[1], ys[1]))
    if cuts:
        shape = shape.difference(unary_union(cuts))
    shape = orient(shape.simplify(0), sign=1.0)
    coords = list(shape.exterior.coords)[:-1]
    return Obstacle(tuple(coords))


@dataclass(frozen=True)
class WindtreeTable:
    """単位正方形トーラス上の n 個の障害物"""

    obstacles: Tuple[Obstacle, ...]
    seed: Optional[int] = None
    scale: float = 1.0

    @property
    def n(self) -> int:
        return len(self.obstacles)

    @property
    def k(self) -> Tuple[int, ...]:
        return tuple(o.concave_count for o in self.obstacles)

    @property
    def spec(self) -> FamilySpec:
        return FamilySpec(self.n, self.k)

    def contains(self, x: float, y: float) -> bool:
        """点 (x, y) が障害物（周期的な平行移動像を含む）の閉包に入るか"""
        return self.region.intersects(Point(x % 1.0, y % 1.0))

    @property
    def region(self):
        """障害物とその8近傍の平行移動像の和集合（prepared geometry）"""
        cached = self.__dict__.get("_region")
        if cached is None:
            shapes = [o.translated(dx, dy).shape for o in self.obstacles for dx, dy in TRANSLATES]
            cached = prep(unary_union(shapes)) if shapes else prep(Point(-10.0, -10.0))
            object.__setattr__(self, "_region", cached)
        return cached

    def to_json(self) -> str:
        payload = {
            "n": self.n,
            "k": list(self.k),
            "obstacles": [[list(v) for v in o.boundary] for o in self.obstacles],
            "seed": self.seed,
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "WindtreeTable":
        payload = json.loads(text)
        obstacles = tuple(Obstacle(tuple(tuple(v) for v in o)) for o in payload["obstacles"])
        table = cls(obstacles, payload.get("seed"))
        if list(table.k) != list(payload.get("k", table.k)):
            raise TableError("k does not match the obstacle boundaries")
        return table


def _grid_coordinates(values: Sequence[float]) -> List[float]:
    return sorted({0.0, 1.0} | {v % 1.0 for v in values})


def free_cells(table: WindtreeTable) -> Tuple[List[float], List[float], np.ndarray]:
    """
    障害物の座標で単位正方形を格子に分け、障害物の外にあるセルを求める

    Returns:
        (x座標列, y座標列, free[ix, iy])
    """
    xs = _grid_coordinates([x for o in table.obstacles for x, _ in o.boundary])
    ys = _grid_coordinates([y for o in table.obstacles for _, y in o.boundary])
    free = np.ones((len(xs) - 1, len(ys) - 1), dtype=bool)
    for ix in range(len(xs) - 1):
        for iy in range(len(ys) - 1):
            cx = 0.5 * (xs[ix] + xs[ix + 1])
            cy = 0.5 * (ys[iy] + ys[iy + 1])
            free[ix, iy] = not table.contains(cx, cy)
    return xs, ys, free


def validate_table(table: WindtreeTable) -> bool:
    """
    テーブルの検証（周期的な平行移動像を含む）

    Raises:
        NonRectilinear: 障害物が直線多角形でない場合
        Overlap: 障害物の閉包が交わる場合
        DisconnectedComplement: 補集合が連結でない場合
    """
    for obstacle in table.obstacles:
        obstacle.check_rectilinear()

    shapes = [o.shape for o in table.obstacles]
    for i, first in enumerate(shapes):
        for j in range(i, len(shapes)):
            for dx, dy in TRANSLATES:
                if i == j and (dx, dy) == (0, 0):
                    continue
                moved = table.obstacles[j].translated(dx, dy).shape
                if first.intersects(moved):
                    raise Overlap(i, j)

    xs, ys, free = free_cells(table)
    nx, ny = free.shape
    ids = -np.ones_like(free, dtype=int)
    ids[free] = np.arange(int(free.sum()))
    rows, cols = [], []
    for ix in range(nx):
        for iy in range(ny):
            if not free[ix, iy]:
                continue
            for jx, jy in (((ix + 1) % nx, iy), (ix, (iy + 1) % ny)):
                if free[jx, jy]:
                    rows.append(ids[ix, iy])
                    cols.append(ids[jx, jy])
    size = int(free.sum())
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size))
    n_components, _ = connected_components(graph, directed=False)
    if n_components != 1:
        raise DisconnectedComplement(f"complement has {n_components} components")
    return True


def _sample_obstacle(rng: np.random.Generator, n: int, concave: int) -> Obstacle:
    limit = 0.8 / np.sqrt(n)
    width = rng.uniform(0.05, limit)
    height = rng.uniform(0.05, limit)
    x0 = rng.uniform(2 * DELTA_MIN, 1 - width - 2 * DELTA_MIN)
    y0 = rng.uniform(2 * DELTA_MIN, 1 - height - 2 * DELTA_MIN)
    if concave == 0:
        return rectangle(x0, y0, width, height)

    per_corner = [concave // 4 + (1 if c < concave % 4 else 0) for c in range(4)]
    steps = []
    for count in per_corner:
        # 幅は増加、高さは減少する階段
        cut_w = np.sort(rng.uniform(0.05, 0.4, size=count)) * width
        cut_h = np.sort(rng.uniform(0.05, 0.4, size=count))[::-1] * height
        steps.append(list(zip(cut_w.tolist(), cut_h.tolist())))
    return notched_rectangle(x0, y0, width, height, steps)


def _feature_ok(obstacle: Obstacle, placed: Sequence[Obstacle], concave: int) -> bool:
    sides = obstacle.clockwise_sides()
    if any(abs(a[0] - b[0]) + abs(a[1] - b[1]) < DELTA_MIN for a, b in sides):
        return False
    if obstacle.concave_count != concave:
        return False
    return all(obstacle.shape.distance(other.shape) > DELTA_MIN for other in placed)


def sample_table(spec: FamilySpec, seed: int) -> WindtreeTable:
    """
    族の一般的なテーブルを棄却サンプリングで生成

    障害物は基本領域の内部に置き、寸法と位置は連続分布から取ります。

    Raises:
        SamplingExhausted: MAX_REJECTION_ROUNDS 回で有効なテーブルが得られない場合
    """
    rng = np.random.default_rng(seed)
    placed: List[Obstacle] = []
    rounds = 0
    for concave in spec.k:
        while True:
            rounds += 1
            if rounds > MAX_REJECTION_ROUNDS:
                raise SamplingExhausted(
                    f"no valid table for {spec} after {MAX_REJECTION_ROUNDS} rounds"
                )
            candidate = _sample_obstacle(rng, spec.n, concave)
            if _feature_ok(candidate, placed, concave):
                placed.append(candidate)
                break

    table = WindtreeTable(tuple(placed), seed)
    validate_table(table)
    logger.debug("sampled table %s with seed %s after %d rounds", spec, seed, rounds)
    return table


def aligned_squares(n: int) -> WindtreeTable:
    """同じ高さに並べた n 個の正方形"""
    side = 0.4 / n
    return WindtreeTable(tuple(rectangle((i + 0.3) / n, 0.3, side, side) for i in range(n)))


def offset_squares(n: int) -> WindtreeTable:
    """
    高さをずらした n 個の正方形

    y > 0.5 の帯には障害物がなく、第1コピーにその帯だけを通る円柱ができる。
    """
    side = 0.3 / n
    return WindtreeTable(
        tuple(rectangle((i + 0.2) / n, 0.1 + 0.15 * i / n, side, side) for i in range(n))
    )


GridVertex = Tuple[int, int]


@dataclass(frozen=True)
class MarkedClasses:
    """
    交差数を数える代表曲線と双対コサイクル f = (f_x, f_y)

    h_S は両コピーの y = 0 の線、v_S は両コピーの x = 0 の線で実現する。
    f_x は v_S との符号付き交差数、f_y は h_S との符号付き交差数で、
    テーブル上の格子変位に一致する向きに符号を固定している。
    """

    hS: EdgePath
    vS: EdgePath

    def weights(self) -> Dict[Tuple[int, int], Tuple[int, int]]:
        """辺 → (f_x の係数, f_y の係数)"""
        table: Dict[Tuple[int, int], Tuple[int, int]] = {}
        for poly, j, orientation in self.vS:
            fx, fy = table.get((poly, j), (0, 0))
            table[(poly, j)] = (fx + orientation, fy)
        for poly, j, orientation in self.hS:
            fx, fy = table.get((poly, j), (0, 0))
            table[(poly, j)] = (fx, fy + orientation)
        return table


@dataclass
class Unfolding:
    """展開した曲面と、テーブル座標との対応"""

    table: WindtreeTable
    surface: HalfTranslationSurface
    marked: MarkedClasses
    basis: HomologyBasis
    xs: List[float]
    ys: List[float]
    cells: Dict[Tuple[int, int, int], int]
    segments: Tuple[Dict[Tuple[GridVertex, GridVertex], Tuple[int, int, int]], ...] = field(
        repr=False
    )

    def locate(self, x: float, y: float, copy: int = 0) -> Tuple[int, complex]:
        """
        テーブル上の点を展開曲面の (多角形, チャート座標) に写す

        Raises:
            TableError: 点が障害物の中にある場合
        """
        x, y = x % 1.0, y % 1.0
        ix = int(np.searchsorted(self.xs, x, side="right")) - 1
        iy = int(np.searchsorted(self.ys, y, side="right")) - 1
        ix = min(max(ix, 0), len(self.xs) - 2)
        iy = min(max(iy, 0), len(self.ys) - 2)
        poly = self.cells.get((copy, ix, iy))
        if poly is None:
            raise TableError(f"point ({x}, {y}) lies inside an obstacle")
        scale = self.table.scale
        chart_y = y if copy == 0 else -y
        return poly, complex(x * scale, chart_y * scale)


def _cell_polygon(
    copy: int, x0: float, y0: float, x1: float, y1: float, scale: float
) -> PlanarPolygon:
    if copy == 0:
        corners = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
    else:
        corners = ((x0, -y1), (x1, -y1), (x1, -y0), (x0, -y0))
    return PlanarPolygon(tuple((scale * x, scale * y) for x, y in corners))


def _cell_grid_vertices(copy: int, ix: int, iy: int) -> List[GridVertex]:
    """多角形の頂点順に並べたテーブル格子の頂点"""
    if copy == 0:
        return [(ix, iy), (ix + 1, iy), (ix + 1, iy + 1), (ix, iy + 1)]
    return [(ix, iy + 1), (ix + 1, iy + 1), (ix + 1, iy), (ix, iy)]


# 隣接方向 → (このセルの辺, 隣のセルの辺)。コピーごと。
_NEIGHBOR_EDGES = {
    0: {"right": (1, 3), "up": (2, 0)},
    1: {"right": (1, 3), "up": (0, 2)},
}
# 障害物に接する辺 → (コピー0の辺, コピー1の辺)
_OBSTACLE_EDGES = {"right": (1, 1), "left": (3, 3), "up": (2, 0), "down": (0, 2)}


def _walk(segments, vertices: Sequence[GridVertex]) -> EdgePath:
    path = []
    for u, v in zip(vertices[:-1], vertices[1:]):
        path.append(segments[(u, v)])
    return tuple(path)


def _straight(start: GridVertex, end: GridVertex) -> List[GridVertex]:
    """軸に平行な線分上の格子頂点列"""
    (ax, ay), (bx, by) = start, end
    if ax == bx:
        step = 1 if by > ay else -1
        return [(ax, y) for y in range(ay, by + step, step)]
    step = 1 if bx > ax else -1
    return [(x, ay) for x in range(ax, bx + step, step)]


def _shortest_grid_path(
    segments, xs: Sequence[float], ys: Sequence[float], start: GridVertex, end: GridVertex
) -> List[GridVertex]:
    """第1コピーの格子辺に沿った最短路（トーラスの巻き付きなし）"""
    ny = len(ys)
    vid = lambda v: v[0] * ny + v[1]  # noqa: E731
    rows, cols, weights = [], [], []
    for u, v in segments:
        rows.append(vid(u))
        cols.append(vid(v))
        weights.append(abs(xs[u[0]] - xs[v[0]]) + abs(ys[u[1]] - ys[v[1]]))
    size = len(xs) * ny
    graph = coo_matrix((weights, (rows, cols)), shape=(size, size)).tocsr()
    _, predecessors = shortest_path(
        graph, directed=True, indices=vid(start), return_predecessors=True
    )
    path = [vid(end)]
    while path[-1] != vid(start):
        previous = predecessors[path[-1]]
        if previous < 0:
            raise TableError(f"no grid path from {start} to {end}")
        path.append(previous)
    return [divmod(int(v), ny) for v in reversed(path)]


def side_labels(spec: FamilySpec) -> List[Tuple[str, int, int, str]]:
    """障害物辺のラベル (ラベル, 障害物番号, 辺番号, 'alpha'|'beta')。最後の障害物の最終辺は除く"""
    labels = []
    for i, concave in enumerate(spec.k, start=1):
        count = 2 + concave
        for kind in ("alpha", "beta"):
            for j in range(1, count + 1):
                if i == spec.n and j == count:
                    continue
                labels.append((f"{kind}_{i}_{j}", i, j, kind))
    return labels


def unfold(table: WindtreeTable) -> Unfolding:
    """
    テーブルを2枚のコピーから成る半平行移動曲面に展開

    同じコピー内とトーラスの巻き付きは平行移動で、障害物の辺はコピー間で
    貼り合わせる（水平な辺は符号 +1、垂直な辺は符号 -1）。

    Raises:
        TableError: 障害物が基本領域の内部に収まっていない場合
    """
    for obstacle in table.obstacles:
        xs_o = [x for x, _ in obstacle.boundary]
        ys_o = [y for _, y in obstacle.boundary]
        if min(xs_o) <= 0 or min(ys_o) <= 0 or max(xs_o) >= 1 or max(ys_o) >= 1:
            raise TableError("unfolding needs every obstacle strictly inside the unit square")

    xs, ys, free = free_cells(table)
    nx, ny = free.shape
    scale = table.scale

    polygons: List[PlanarPolygon] = []
    cells: Dict[Tuple[int, int, int], int] = {}
    segments: Tuple[Dict, Dict] = ({}, {})
    for copy in (0, 1):
        for ix in range(nx):
            for iy in range(ny):
                if not free[ix, iy]:
                    continue
                poly = len(polygons)
                cells[(copy, ix, iy)] = poly
                polygons.append(
                    _cell_polygon(copy, xs[ix], ys[iy], xs[ix + 1], ys[iy + 1], scale)
                )
                corners = _cell_grid_vertices(copy, ix, iy)
                for j in range(4):
                    u, v = corners[j], corners[(j + 1) % 4]
                    segments[copy].setdefault((u, v), (poly, j, 1))
                    segments[copy].setdefault((v, u), (poly, j, -1))

    pairs = []
    for copy in (0, 1):
        for ix in range(nx):
            for iy in range(ny):
                if not free[ix, iy]:
                    continue
                here = cells[(copy, ix, iy)]
                for direction, (jx, jy) in (
                    ("right", ((ix + 1) % nx, iy)),
                    ("up", (ix, (iy + 1) % ny)),
                ):
                    if free[jx, jy]:
                        mine, theirs = _NEIGHBOR_EDGES[copy][direction]
                        pairs.append(((here, mine), (cells[(copy, jx, jy)], theirs), 1))

    # 障害物の辺はコピー0側から一度だけ貼る
    for ix in range(nx):
        for iy in range(ny):
            if not free[ix, iy]:
                continue
            for direction, (jx, jy) in (
                ("right", (ix + 1, iy)),
                ("left", (ix - 1, iy)),
                ("up", (ix, iy + 1)),
                ("down", (ix, iy - 1)),
            ):
                if free[jx % nx, jy % ny]:
                    continue
                first, second = _OBSTACLE_EDGES[direction]
                sign = -1 if direction in ("right", "left") else 1
                pairs.append(
                    ((cells[(0, ix, iy)], first), (cells[(1, ix, iy)], second), sign)
                )

    surface = build_surface(polygons, EdgeGluing(tuple(pairs)))
    basis = _relative_basis(table, xs, ys, segments)
    marked = _marked_classes(xs, ys, segments)
    logger.info(
        "unfolded table n=%d k=%s: %d polygons, %d gluings",
        table.n,
        list(table.k),
        len(polygons),
        len(pairs),
    )
    return Unfolding(table, surface, marked, basis, xs, ys, cells, segments)


def _grid_index(xs: Sequence[float], ys: Sequence[float], point: Tuple[float, float]) -> GridVertex:
    return xs.index(point[0]), ys.index(point[1])


def _relative_basis(table: WindtreeTable, xs, ys, segments) -> HomologyBasis:
    nx, ny = len(xs) - 1, len(ys) - 1
    first, second = segments
    bottom = _straight((0, 0), (nx, 0))
    left = _straight((0, 0), (0, ny))
    classes: List[Tuple[str, EdgePath]] = [
        ("a1", _walk(first, bottom)),
        ("b1", _walk(first, left)),
        ("a2", _walk(second, bottom)),
        ("b2", _walk(second, left)),
    ]
    absolute = {"a1", "b1", "a2", "b2"}

    starts = []
    sides: Dict[Tuple[str, int, int], List[GridVertex]] = {}
    for i, obstacle in enumerate(table.obstacles, start=1):
        ordered = obstacle.clockwise_sides()
        starts.append(_grid_index(xs, ys, ordered[0][0]))
        counters = {"alpha": 0, "beta": 0}
        for a, b in ordered:
            kind = "alpha" if a[0] == b[0] else "beta"
            counters[kind] += 1
            sides[(kind, i, counters[kind])] = _straight(
                _grid_index(xs, ys, a), _grid_index(xs, ys, b)
            )

    gammas = []
    for i in range(1, table.n):
        route = _shortest_grid_path(first, xs, ys, starts[i - 1], starts[i])
        gamma = _walk(first, route)
        back = _walk(second, list(reversed(route)))
        classes.append((f"d_{i}", gamma + back))
        absolute.add(f"d_{i}")
        gammas.append((f"gamma_{i}", gamma))

    for label, i, j, kind in side_labels(table.spec):
        classes.append((label, _walk(first, sides[(kind, i, j)])))
    classes.extend(gammas)
    return HomologyBasis(tuple(classes), frozenset(absolute))


def _marked_classes(xs, ys, segments) -> MarkedClasses:
    nx, ny = len(xs) - 1, len(ys) - 1
    first, second = segments
    bottom = _straight((0, 0), (nx, 0))
    # y = 0 の線: コピー0は右向き、コピー1は（テーブルで）左向き
    h_path = _walk(first, bottom) + _walk(second, list(reversed(bottom)))
    # x = 0 の線: 両コピーとも多角形の左辺をその向きのまま
    down = list(reversed(_straight((0, 0), (0, ny))))
    v_path = _walk(first, down) + _walk(second, list(reversed(down)))
    return MarkedClasses(h_path, v_path)


def family_coordinates(table: WindtreeTable) -> np.ndarray:
    """
    族の内在的パラメータ

    各障害物の最初の 1 + k_i 本の垂直辺と水平辺の符号付き長さ、
    第1障害物の起点から見た他の障害物の起点の相対位置、トーラスの尺度を並べる。
    長さは 4n - 1（長方形のみ）または 4n + 2p - 1。
    """
    values: List[float] = []
    starts = []
    for obstacle, concave in zip(table.obstacles, table.k):
        ordered = obstacle.clockwise_sides()
        starts.append(ordered[0][0])
        vertical = [b[1] - a[1] for a, b in ordered if a[0] == b[0]]
        horizontal = [b[0] - a[0] for a, b in ordered if a[1] == b[1]]
        values.extend(vertical[: 1 + concave])
        values.extend(horizontal[: 1 + concave])
    x0, y0 = starts[0]
    for x, y in starts[1:]:
        values.extend([x - x0, y - y0])
    values.append(table.scale)
    return np.array(values)


def reconstruct_table(
    coords: Sequence[float], spec: FamilySpec, anchor: Tuple[float, float] = (0.1, 0.1)
) -> WindtreeTable:
    """
    family_coordinates の逆写像（第1障害物の起点を anchor に置く）

    Raises:
        TableError: 座標の長さが族と合わない場合
    """
    expected = 4 * spec.n + 2 * spec.p - 1
    if len(coords) != expected:
        raise TableError(f"expected {expected} coordinates for {spec}, got {len(coords)}")

    cursor = 0
    shapes = []
    for concave in spec.k:
        count = 1 + concave
        vertical = list(coords[cursor : cursor + count])
        horizontal = list(coords[cursor + count : cursor + 2 * count])
        cursor += 2 * count
        vertical.append(-sum(vertical))
        horizontal.append(-sum(horizontal))
        shapes.append((vertical, horizontal))

    offsets = [(0.0, 0.0)]
    for _ in range(spec.n - 1):
        offsets.append((coords[cursor], coords[cursor + 1]))
        cursor += 2
    scale = float(coords[cursor])

    obstacles = []
    for (vertical, horizontal), (dx, dy) in zip(shapes, offsets):
        x, y = anchor[0] + dx, anchor[1] + dy
        clockwise = [(x, y)]
        for up, across in zip(vertical, horizontal):
            y += up
            clockwise.append((x, y))
            x += across
            clockwise.append((x, y))
        clockwise.pop()
        obstacles.append(Obstacle(tuple(reversed(clockwise))))
    return WindtreeTable(tuple(obstacles), scale=scale)
