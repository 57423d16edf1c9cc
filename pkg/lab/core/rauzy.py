"""
線形対合の Rauzy-Veech 誘導と Zorich 加速によるリャプノフ指数の推定

一般化置換（上段・下段の2行、各文字がちょうど2回現れる）と区間長の組を
線形対合として扱う。長さのコサイクル（タウトロジカルな H^-）と、符号付きの
コサイクル（底曲面のホモロジー H^+）をそれぞれ正規直交枠で追跡し、
λ^+ = Θ^+ / Θ_1 を推定する。
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import qr
from scipy.optimize import linprog

from .exceptions import (
    GeometryError,
    LengthTie,
    NonConvergence,
    NotInCatalog,
    Reducible,
    ValidationError,
)
from .flat import (
    EdgeGluing,
    HalfTranslationSurface,
    PlanarPolygon,
    StratumSignature,
    build_surface,
    stratum_of,
)

logger = logging.getLogger(__name__)

TOP, BOTTOM = 0, 1
ORTHO_EVERY = 32
BATCHES = 20
TIE_PERTURBATION = 1e-12
NONCONVERGENCE_SIGMA = 5.0
RECOMMENDED_ITERATIONS = 100_000

CATALOG_VERSION = 1
PILLOWCASE = "0 0 1 / 1 2 2"
TORUS = "0 1 / 1 0"

Position = Tuple[int, int]


@dataclass(frozen=True)
class LinearInvolution:
    """
    一般化置換と区間長

    lengths は文字ごと（文字 0..d-1）。上段と下段の長さの合計は等しい。
    """

    top: Tuple[int, ...]
    bottom: Tuple[int, ...]
    lengths: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "top", tuple(int(a) for a in self.top))
        object.__setattr__(self, "bottom", tuple(int(a) for a in self.bottom))
        counts = Counter(self.top + self.bottom)
        d = len(counts)
        if sorted(counts) != list(range(d)) or any(c != 2 for c in counts.values()):
            raise ValidationError("each letter 0..d-1 must appear exactly twice")
        if not self.top or not self.bottom:
            raise Reducible("a generalized permutation needs two nonempty rows")
        if self.lengths and len(self.lengths) != d:
            raise ValidationError(f"{len(self.lengths)} lengths for {d} letters")
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))

    @classmethod
    def parse(cls, text: str, lengths: Sequence[float] = ()) -> "LinearInvolution":
        """"0 0 1 / 1 2 2" 形式"""
        try:
            top_text, bottom_text = text.split("/")
        except ValueError:
            raise ValidationError(f"expected 'top / bottom': {text!r}")
        return cls(
            tuple(int(a) for a in top_text.split()),
            tuple(int(a) for a in bottom_text.split()),
            tuple(lengths),
        )

    def label(self) -> str:
        return f"{' '.join(map(str, self.top))} / {' '.join(map(str, self.bottom))}"

    @property
    def d(self) -> int:
        return (len(self.top) + len(self.bottom)) // 2

    def flips(self, row: int) -> frozenset:
        """同じ段に2回現れる文字"""
        counts = Counter(self.top if row == TOP else self.bottom)
        return frozenset(a for a, c in counts.items() if c == 2)

    @property
    def is_abelian(self) -> bool:
        return not self.flips(TOP) and not self.flips(BOTTOM)

    def row_sums(self) -> Tuple[float, float]:
        return (
            sum(self.lengths[a] for a in self.top),
            sum(self.lengths[a] for a in self.bottom),
        )

    def with_lengths(self, lengths: Sequence[float]) -> "LinearInvolution":
        return replace(self, lengths=tuple(lengths))

    def relabeled(self) -> "LinearInvolution":
        """初出順（上段→下段）に文字を振り直す"""
        order: Dict[int, int] = {}
        for a in self.top + self.bottom:
            order.setdefault(a, len(order))
        lengths = [0.0] * self.d
        for old, new in order.items():
            if self.lengths:
                lengths[new] = self.lengths[old]
        return LinearInvolution(
            tuple(order[a] for a in self.top),
            tuple(order[a] for a in self.bottom),
            tuple(lengths) if self.lengths else (),
        )


def occurrence_signs(top: Sequence[int], bottom: Sequence[int]) -> Dict[Position, int]:
    """
    各出現の符号

    上段を左から、続いて下段を左から読んだ最初の出現が +1。2回目の出現は
    段をまたぐ文字なら +1、同じ段の文字なら -1。
    """
    same_row = {a for row in (top, bottom) for a, c in Counter(row).items() if c == 2}
    seen = set()
    signs: Dict[Position, int] = {}
    for row, letters in ((TOP, top), (BOTTOM, bottom)):
        for index, a in enumerate(letters):
            if a in seen:
                signs[(row, index)] = -1 if a in same_row else 1
            else:
                seen.add(a)
                signs[(row, index)] = 1
    return signs


def balanced_lengths(gp: LinearInvolution, rng: np.random.Generator) -> Tuple[float, ...]:
    """
    一様乱数の長さを上段・下段の合計が等しくなるように調整

    上段のフリップ文字をまとめて拡大縮小して釣り合わせ、同じ長さの組は
    TIE_PERTURBATION だけずらす。
    """
    lengths = rng.uniform(np.nextafter(0.0, 1.0), 1.0, size=gp.d)
    top_flips, bottom_flips = sorted(gp.flips(TOP)), sorted(gp.flips(BOTTOM))
    if top_flips or bottom_flips:
        if not top_flips or not bottom_flips:
            raise Reducible("flip letters must occur in both rows")
        ratio = lengths[bottom_flips].sum() / lengths[top_flips].sum()
        lengths[top_flips] *= ratio
    _, unique_index = np.unique(lengths, return_index=True)
    for a in sorted(set(range(gp.d)) - set(unique_index)):
        lengths[a] *= 1 + TIE_PERTURBATION * (a + 1)
    if top_flips:
        # ずらした分を上段のフリップで吸収
        top_sum, bottom_sum = gp.with_lengths(lengths).row_sums()
        lengths[top_flips] += (bottom_sum - top_sum) / (2 * len(top_flips))
    return tuple(float(x) for x in lengths)


@dataclass(frozen=True)
class RauzyMove:
    """1回の Rauzy 移動"""

    result: LinearInvolution
    kind: str
    winner: int
    loser: int
    epsilon: int
    kappa: int

    @property
    def matrix(self) -> np.ndarray:
        """旧長さ = matrix @ 新長さ となる初等行列"""
        m = np.eye(self.result.d, dtype=int)
        m[self.winner, self.loser] += 1
        return m


def _winner(gp: LinearInvolution) -> Tuple[str, int, int]:
    a, b = gp.top[-1], gp.bottom[-1]
    if a == b:
        raise Reducible(f"letter {a} ends both rows of {gp.label()}")
    la, lb = gp.lengths[a], gp.lengths[b]
    if abs(la - lb) <= 1e-14 * (la + lb):
        raise LengthTie(f"letters {a} and {b} have equal length {la:.17g}")
    return ("top", a, b) if la > lb else ("bottom", b, a)


def rauzy_move(gp: LinearInvolution) -> RauzyMove:
    """
    右からの Rauzy 移動

    最後の区間のうち長い方（勝者）が短い方（敗者）を切り取り、敗者は勝者の
    もう一方の出現の隣へ移る。もう一方の出現が反対の段なら右隣、同じ段なら左隣。

    Raises:
        LengthTie: 最後の区間長が一致した場合
        Reducible: 段が空になる、または両段が同じ文字で終わる場合
    """
    kind, winner, loser = _winner(gp)
    top, bottom = list(gp.top), list(gp.bottom)
    signs = occurrence_signs(top, bottom)
    winner_flip = winner in gp.flips(TOP) or winner in gp.flips(BOTTOM)

    if kind == "top":
        own, other = top, bottom
        winner_position = (TOP, len(top) - 1)
        loser_position = (BOTTOM, len(bottom) - 1)
        own_row, other_row = TOP, BOTTOM
    else:
        own, other = bottom, top
        winner_position = (BOTTOM, len(bottom) - 1)
        loser_position = (TOP, len(top) - 1)
        own_row, other_row = BOTTOM, TOP

    other.pop()
    if winner in other:
        index = other.index(winner) + 1
        other.insert(index, loser)
        new_position = (other_row, index)
    else:
        index = own.index(winner)
        own.insert(index, loser)
        new_position = (own_row, index)
    if not top or not bottom:
        raise Reducible(f"a row empties after inducing {gp.label()}")

    lengths = list(gp.lengths)
    lengths[winner] -= lengths[loser]
    result = LinearInvolution(tuple(top), tuple(bottom), tuple(lengths))

    new_signs = occurrence_signs(top, bottom)
    epsilon = signs[winner_position] * signs[loser_position]
    kappa = (-1 if winner_flip else 1) * signs[loser_position] * new_signs[new_position]
    return RauzyMove(result, kind, winner, loser, epsilon, kappa)


@dataclass(frozen=True)
class ZorichState:
    """
    加速誘導の状態

    frame_minus は長さのコサイクル（符号なし）、frame_plus は符号付きコサイクルを運ぶ。
    行が文字、列が枠のベクトル。
    """

    gp: LinearInvolution
    log_scale: float = 0.0
    frame_plus: np.ndarray = field(default=None, compare=False)
    frame_minus: np.ndarray = field(default=None, compare=False)
    log_norms_plus: np.ndarray = field(default=None, compare=False)
    log_norms_minus: np.ndarray = field(default=None, compare=False)
    step_count: int = 0
    last_kind: str = ""

    @classmethod
    def start(cls, gp: LinearInvolution, rng: np.random.Generator) -> "ZorichState":
        """乱数の枠と正規化した長さから始める"""
        if not gp.lengths:
            gp = gp.with_lengths(balanced_lengths(gp, rng))
        gp = _normalized(_rebalanced(gp))
        d = gp.d
        plus, _ = qr(rng.standard_normal((d, d)))
        minus, _ = qr(rng.standard_normal((d, d)))
        return cls(gp, 0.0, plus, minus, np.zeros(d), np.zeros(d))

    @property
    def total_length(self) -> float:
        return float(sum(self.gp.row_sums()))

    @property
    def clock(self) -> float:
        """くりこみ時間（-log 総長の累積）"""
        return self.log_scale - math.log(self.total_length / 2)

    def orthonormalized(self) -> "ZorichState":
        q_plus, r_plus = qr(self.frame_plus)
        q_minus, r_minus = qr(self.frame_minus)
        return replace(
            self,
            frame_plus=q_plus,
            frame_minus=q_minus,
            log_norms_plus=self.log_norms_plus + np.log(np.abs(np.diag(r_plus))),
            log_norms_minus=self.log_norms_minus + np.log(np.abs(np.diag(r_minus))),
        )


def _normalized(gp: LinearInvolution) -> LinearInvolution:
    total = sum(gp.row_sums())
    return gp.with_lengths([x * 2 / total for x in gp.lengths])


def _rebalanced(gp: LinearInvolution) -> LinearInvolution:
    """
    上段と下段の合計を等しく戻す

    段をまたぐ文字は両段に同じだけ寄与するので、差は上段のフリップの和 T と
    下段のフリップの和 B だけで決まる。両方を (T + B) / 2 に揃える。
    """
    top_flips, bottom_flips = sorted(gp.flips(TOP)), sorted(gp.flips(BOTTOM))
    if not top_flips or not bottom_flips:
        return gp
    lengths = np.asarray(gp.lengths)
    top_sum, bottom_sum = lengths[top_flips].sum(), lengths[bottom_flips].sum()
    middle = (top_sum + bottom_sum) / 2
    lengths[top_flips] *= middle / top_sum
    lengths[bottom_flips] *= middle / bottom_sum
    return gp.with_lengths(lengths)


def rauzy_step(state: ZorichState) -> ZorichState:
    """
    1回の Rauzy 移動を長さと両方の枠に適用

    Raises:
        LengthTie: 最後の区間長が一致した場合
        Reducible: 既約でない場合
    """
    move = rauzy_move(state.gp)
    w, l = move.winner, move.loser
    minus = state.frame_minus.copy()
    plus = state.frame_plus.copy()
    minus[l] += minus[w]
    plus[l] = move.kappa * (plus[l] + move.epsilon * plus[w])
    return replace(
        state,
        gp=move.result,
        frame_plus=plus,
        frame_minus=minus,
        step_count=state.step_count + 1,
        last_kind=move.kind,
    )


def full_tours(state: ZorichState) -> Tuple[ZorichState, int]:
    """
    勝者が反対の段の区間の列を一巡する移動をまとめて適用

    勝者のもう一方の出現が反対の段にあるとき、その右側の区間の列は移動のたびに
    1つずつ回転し、一巡すると置換は元に戻る。一巡で勝者の長さは列の長さの和 S
    だけ減るので、ceil(λ_w / S) - 1 巡を割り算で求めて枠にも閉じた形で適用する。
    勝者がフリップの場合は何もしない。

    Returns:
        (新しい状態, 巡回の回数)
    """
    gp = state.gp
    kind, winner, _ = _winner(gp)
    other = gp.bottom if kind == "top" else gp.top
    if winner not in other:
        return state, 0
    block = other[other.index(winner) + 1 :]
    span = sum(gp.lengths[b] for b in block)
    tours = math.ceil(gp.lengths[winner] / span) - 1
    if tours < 1:
        return state, 0

    # 敗者の行は α * 行 + β * 勝者の行 に変わる。一巡分の (α, β) を記号的に追う
    lengths = list(gp.lengths)
    lengths[winner] = 2 * span + 1
    current = gp.with_lengths(lengths)
    coefficients = {b: (1, 0) for b in block}
    for _ in block:
        move = rauzy_move(current)
        alpha, beta = coefficients[move.loser]
        coefficients[move.loser] = (move.kappa * alpha, move.kappa * (beta + move.epsilon))
        current = move.result
    if (current.top, current.bottom) != (gp.top, gp.bottom):
        raise Reducible(f"a tour of {winner} does not return to {gp.label()}")

    plus = state.frame_plus.copy()
    minus = state.frame_minus.copy()
    counts = Counter(block)
    for b, (alpha, beta) in coefficients.items():
        minus[b] += tours * counts[b] * minus[winner]
        if alpha == 1:
            plus[b] += tours * beta * plus[winner]
        elif tours % 2:
            plus[b] = -plus[b] + beta * plus[winner]

    lengths = list(gp.lengths)
    lengths[winner] -= tours * span
    return (
        replace(
            state,
            gp=gp.with_lengths(lengths),
            frame_plus=plus,
            frame_minus=minus,
            step_count=state.step_count + tours * len(block),
            last_kind=kind,
        ),
        tours,
    )


def zorich_step(state: ZorichState) -> ZorichState:
    """
    同じ勝者が続く限り Rauzy 移動を繰り返す（Zorich 加速）

    一巡の繰り返しは full_tours で割り算にまとめ、残りを1回ずつ進める。
    最後に上段と下段の釣り合いを戻し、総長を2に正規化して対数を log_scale に積む。
    """
    start = state.step_count
    _, winner, _ = _winner(state.gp)
    state, _ = full_tours(state)
    while _winner(state.gp)[1] == winner:
        state = rauzy_step(state)
    gp = _rebalanced(state.gp)
    total = float(sum(gp.row_sums()))
    return replace(
        state,
        gp=_normalized(gp),
        log_scale=state.log_scale - math.log(total / 2),
        step_count=start + 1,
    )


@dataclass(frozen=True)
class BatchMeans:
    """バッチごとのくりこみ時間と対数ノルムの増分"""

    clock: Tuple[float, ...]
    plus: Tuple[float, ...]
    minus: Tuple[float, ...]

    def merged(self, other: "BatchMeans") -> "BatchMeans":
        return BatchMeans(
            self.clock + other.clock, self.plus + other.plus, self.minus + other.minus
        )


@dataclass(frozen=True)
class ExponentReport:
    stratum: str
    lambda_plus_top: float
    lambda_minus_top: float
    stderr: float
    iterations: int
    chains: int = 1

    def to_dict(self) -> Dict:
        return {
            "stratum": self.stratum,
            "lambda_plus_top": self.lambda_plus_top,
            "stderr": self.stderr,
            "lambda_minus_check": self.lambda_minus_top,
            "iters": self.iterations,
            "chains": self.chains,
        }


def _perturbed(gp: LinearInvolution, rng: np.random.Generator) -> LinearInvolution:
    factors = 1 + TIE_PERTURBATION * rng.uniform(-1.0, 1.0, size=gp.d)
    return _rebalanced(gp.with_lengths(np.asarray(gp.lengths) * factors))


def run_chain(gp: LinearInvolution, iterations: int, rng: np.random.Generator) -> BatchMeans:
    """
    1本の連鎖を走らせてバッチごとの増分を返す

    最初の1バッチ分は枠を安定させるための助走として捨てる。

    Raises:
        ValidationError: iterations が BATCHES * ORTHO_EVERY 未満の場合
        Reducible: 誘導が既約でない置換に達した場合
    """
    if iterations < BATCHES * ORTHO_EVERY:
        raise ValidationError(f"iterations must be at least {BATCHES * ORTHO_EVERY}")

    per_batch = max(ORTHO_EVERY, (iterations // BATCHES) // ORTHO_EVERY * ORTHO_EVERY)
    state = ZorichState.start(gp, rng)

    def advance(state: ZorichState, steps: int) -> ZorichState:
        done = 0
        while done < steps:
            try:
                state = zorich_step(state)
            except LengthTie as error:
                logger.debug("length tie, perturbing: %s", error.message)
                state = replace(state, gp=_perturbed(state.gp, rng))
                continue
            done += 1
            if done % ORTHO_EVERY == 0:
                state = state.orthonormalized()
        return state

    state = advance(state, per_batch)
    clock, plus, minus = [], [], []
    for _ in range(BATCHES):
        before = (state.clock, state.log_norms_plus[0], state.log_norms_minus[0])
        state = advance(state, per_batch)
        clock.append(state.clock - before[0])
        plus.append(float(state.log_norms_plus[0] - before[1]))
        minus.append(float(state.log_norms_minus[0] - before[2]))
    return BatchMeans(tuple(clock), tuple(plus), tuple(minus))


def summarize(
    stratum: str, batches: BatchMeans, iterations: int, chains: int = 1
) -> ExponentReport:
    """
    バッチの増分から指数と標準誤差を求める

    Raises:
        NonConvergence: あるバッチが残りのバッチの平均から NONCONVERGENCE_SIGMA 標準偏差以上離れた場合
    """
    clock = np.asarray(batches.clock)
    ratios_plus = np.asarray(batches.plus) / clock
    ratios_minus = np.asarray(batches.minus) / clock
    lambda_plus = float(np.sum(batches.plus) / clock.sum())
    lambda_minus = float(np.sum(batches.minus) / clock.sum())

    # 各バッチを残りのバッチの平均・標準偏差と比べる
    for i, value in enumerate(ratios_plus):
        others = np.delete(ratios_plus, i)
        spread = float(others.std(ddof=1))
        if spread > 0 and abs(value - others.mean()) > NONCONVERGENCE_SIGMA * spread:
            raise NonConvergence(
                f"batch {i} deviates {abs(value - others.mean()) / spread:.1f} "
                f"standard deviations in {stratum}"
            )
    stderr = float(ratios_plus.std(ddof=1)) / math.sqrt(len(ratios_plus))
    logger.info(
        "%s: lambda_plus=%.4f ± %.4f, lambda_minus=%.4f (%d batches)",
        stratum,
        lambda_plus,
        stderr,
        lambda_minus,
        len(ratios_minus),
    )
    return ExponentReport(stratum, lambda_plus, lambda_minus, stderr, iterations, chains)


def estimate_top_exponent(
    signature: StratumSignature,
    iterations: int,
    seed: int,
    chains: int = 1,
    store=None,
) -> ExponentReport:
    """
    層の H^+ 側の最大リャプノフ指数

    Args:
        signature: カタログにある二次微分の層
        iterations: 連鎖ごとの加速ステップ数
        seed: 乱数シード（連鎖ごとに SeedSequence で分ける）
        chains: 独立な連鎖の数
        store: 代表元をキャッシュする ResultStore

    Raises:
        NotInCatalog: カタログにない層
        NonConvergence: バッチ平均が一致しない場合
    """
    gp = stratum_representative(signature, store=store)
    if iterations < RECOMMENDED_ITERATIONS:
        logger.warning(
            "%d iterations is below the recommended %d", iterations, RECOMMENDED_ITERATIONS
        )

    merged: Optional[BatchMeans] = None
    for child in np.random.SeedSequence(seed).spawn(chains):
        batches = run_chain(gp, iterations, np.random.default_rng(child))
        merged = batches if merged is None else merged.merged(batches)
    return summarize(signature.label(), merged, iterations, chains)


# --- 懸垂とカタログ ---


def suspension_heights(gp: LinearInvolution) -> np.ndarray:
    """
    懸垂の高さ τ を線形計画で求める

    上段の真の接頭和は t 以上、下段の真の接頭和は -t 以下、両段の合計は 0 として
    t を最大化する。

    Raises:
        Reducible: t > 0 の解がない場合
    """
    d = gp.d
    rows, bounds_rhs = [], []
    for letters, sign in ((gp.top, -1.0), (gp.bottom, 1.0)):
        prefix = np.zeros(d + 1)
        for a in letters[:-1]:
            prefix[a] += sign
            row = prefix.copy()
            row[d] = 1.0
            rows.append(row)
            bounds_rhs.append(0.0)
    totals = []
    for letters in (gp.top, gp.bottom):
        row = np.zeros(d + 1)
        for a in letters:
            row[a] += 1.0
        totals.append(row)

    objective = np.zeros(d + 1)
    objective[d] = -1.0
    result = linprog(
        objective,
        A_ub=np.array(rows) if rows else None,
        b_ub=np.array(bounds_rhs) if rows else None,
        A_eq=np.array(totals),
        b_eq=np.zeros(2),
        bounds=[(-10.0, 10.0)] * d + [(0.0, 1.0)],
        method="highs",
    )
    if result.status != 0 or -result.fun <= 1e-9:
        raise Reducible(f"{gp.label()} admits no suspension")
    return np.asarray(result.x[:d])


def suspension(
    gp: LinearInvolution, rng: Optional[np.random.Generator] = None
) -> HalfTranslationSurface:
    """
    線形対合の懸垂曲面

    下段を左から右へ、続いて上段を右から左へたどる多角形を作り、
    段をまたぐ文字は平行移動、同じ段の文字は半回転で貼り合わせる。

    Raises:
        Reducible: 懸垂が存在しない場合
    """
    if not gp.lengths:
        gp = gp.with_lengths(balanced_lengths(gp, rng or np.random.default_rng(0)))
    heights = suspension_heights(gp)
    zeta = [complex(gp.lengths[a], heights[a]) for a in range(gp.d)]

    vertices = [0j]
    edges: List[int] = []
    for a in gp.bottom:
        vertices.append(vertices[-1] + zeta[a])
        edges.append(a)
    for a in reversed(gp.top):
        vertices.append(vertices[-1] - zeta[a])
        edges.append(a)
    vertices.pop()

    positions: Dict[int, List[int]] = {}
    for j, a in enumerate(edges):
        positions.setdefault(a, []).append(j)
    bottom_count = len(gp.bottom)
    pairs = []
    for a, (first, second) in sorted(positions.items()):
        crosses = (first < bottom_count) != (second < bottom_count)
        pairs.append(((0, first), (0, second), 1 if crosses else -1))

    polygon = PlanarPolygon(tuple((z.real, z.imag) for z in vertices))
    return build_surface([polygon], EdgeGluing(tuple(pairs)))


def catalog() -> List[StratumSignature]:
    """代表元を用意できる層の一覧"""
    entries = [StratumSignature((-1, -1, -1, -1))]
    entries += [StratumSignature((1,) * (4 * n)) for n in range(1, 6)]
    entries += [StratumSignature((1,) * (8 + p) + (-1,) * p) for p in range(1, 7)]
    entries += [StratumSignature((1,) * (4 * n + 10) + (-1,) * 10) for n in range(1, 4)]
    return entries


# 向きづけ可能な層は回転型の置換（フリップなし）。H^+ は H^1 全体で最大指数は1
ABELIAN_REPRESENTATIVES: Dict[StratumSignature, str] = {
    StratumSignature((0,), "abelian"): TORUS,
    StratumSignature((2,), "abelian"): "0 1 2 3 / 3 2 1 0",
    StratumSignature((1, 1), "abelian"): "0 1 2 3 4 / 4 3 2 1 0",
}


def _vertex_orders(gp: LinearInvolution, rng: np.random.Generator) -> Optional[Counter]:
    try:
        surface = suspension(gp.with_lengths(balanced_lengths(gp, rng)))
    except (Reducible, GeometryError):
        return None
    return Counter(cone.angle_multiple - 2 for cone in surface.vertex_classes)


def _mismatch(orders: Counter, target: Counter) -> int:
    keys = set(orders) | set(target)
    return sum(abs(orders.get(k, 0) - target.get(k, 0)) for k in keys)


def _random_permutation(d: int, rng: np.random.Generator) -> Tuple[List[int], int]:
    slots = [a for a in range(d) for _ in range(2)]
    rng.shuffle(slots)
    return slots, int(rng.integers(2, 2 * d - 1))


def _as_involution(slots: Sequence[int], split: int) -> Optional[LinearInvolution]:
    top, bottom = tuple(slots[:split]), tuple(slots[split:])
    if not top or not bottom:
        return None
    try:
        gp = LinearInvolution(top, bottom)
    except (Reducible, ValidationError):
        return None
    if not gp.flips(TOP) or not gp.flips(BOTTOM):
        return None
    return gp.relabeled()


def search_representative(
    signature: StratumSignature,
    seed: int = 0,
    max_evaluations: int = 200_000,
    restart_after: int = 2_000,
) -> LinearInvolution:
    """
    懸垂の錐点がちょうど signature になる一般化置換を山登りで探す

    文字数は層の複素次元 + 1。評価は懸垂を作って頂点類の位数を数える。

    Raises:
        NotInCatalog: 評価回数の上限までに見つからない場合
    """
    rng = np.random.default_rng(seed)
    d = signature.complex_dimension + 1
    target = Counter(signature.multiplicities)

    best_score: Optional[int] = None
    stale = 0
    slots, split = _random_permutation(d, rng)
    for evaluation in range(max_evaluations):
        if best_score is None or stale > restart_after:
            slots, split = _random_permutation(d, rng)
            best_score, stale = None, 0

        candidate, candidate_split = list(slots), split
        if best_score is not None:
            if rng.random() < 0.8:
                i, j = rng.choice(2 * d, size=2, replace=False)
                candidate[i], candidate[j] = candidate[j], candidate[i]
            else:
                candidate_split = int(np.clip(split + rng.choice((-1, 1)), 1, 2 * d - 1))

        gp = _as_involution(candidate, candidate_split)
        orders = _vertex_orders(gp, rng) if gp is not None else None
        if orders is None:
            stale += 1
            continue
        score = _mismatch(orders, target)
        if score == 0:
            logger.info(
                "found %s for %s after %d evaluations",
                gp.label(),
                signature.label(),
                evaluation + 1,
            )
            return gp
        if best_score is None or score <= best_score:
            if best_score is None or score < best_score:
                stale = 0
            slots, split, best_score = candidate, candidate_split, score
        stale += 1
    raise NotInCatalog(f"no representative found for {signature.label()}")


def certify(gp: LinearInvolution, signature: StratumSignature) -> Dict:
    """
    懸垂を作って層を確かめる

    Raises:
        NotInCatalog: 層が一致しない、または正則な頂点類がある場合
    """
    surface = suspension(gp)
    report = stratum_of(surface)
    # 位数0は印をつけた正則点
    marked = signature.multiplicities.count(0)
    expected = replace(
        signature, multiplicities=tuple(k for k in signature.multiplicities if k != 0)
    )
    regular = len(surface.vertex_classes) - len(surface.cone_points)
    if report.signature != expected or regular != marked:
        raise NotInCatalog(
            f"{gp.label()} suspends to {report.signature.label()} "
            f"with {regular} regular vertices, expected {signature.label()}"
        )
    return {
        "involution": gp.label(),
        "stratum": signature.label(),
        "genus": report.genus,
        "complex_dimension": report.complex_dimension,
        "catalog_version": CATALOG_VERSION,
    }


def stratum_representative(
    signature: StratumSignature, store=None, seed: int = 0
) -> LinearInvolution:
    """
    カタログの層の代表となる線形対合（長さなし）

    枕カバーと向きづけ可能な層は固定の置換、それ以外は探索して証明書とともに
    store に保存します。

    Raises:
        NotInCatalog: カタログにない層、または代表元が見つからない場合
    """
    if signature in ABELIAN_REPRESENTATIVES:
        gp = LinearInvolution.parse(ABELIAN_REPRESENTATIVES[signature])
        certify(gp, signature)
        return gp
    if signature.kind != "quadratic" or signature not in catalog():
        raise NotInCatalog(f"{signature.label()} is not in the catalog")

    key = f"catalog-v{CATALOG_VERSION}:{signature.label()}"
    if signature == StratumSignature((-1, -1, -1, -1)):
        gp = LinearInvolution.parse(PILLOWCASE)
        certify(gp, signature)
        return gp

    if store is not None:
        cached = store.get("catalog", key)
        if cached is not None:
            return LinearInvolution.parse(cached["involution"])

    gp = search_representative(signature, seed=seed)
    certificate = certify(gp, signature)
    if store is not None:
        store.put("catalog", key, certificate)
    return gp
