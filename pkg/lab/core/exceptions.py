"""
カスタム例外クラスモジュール
幾何計算・シミュレーション・誘導法のエラーハンドリングを統一
"""

from typing import Any, Optional


class LabError(Exception):
    """
    実験ツールキットの例外基底クラス

    内部ログ用のメッセージとユーザー向けメッセージを分離して管理します。
    """

    def __init__(self, message: str, user_message: Optional[str] = None):
        """
        初期化

        Args:
            message: 内部ログ用のメッセージ（詳細な技術情報を含む）
            user_message: ユーザー向けメッセージ
        """
        self.message = message
        self.user_message = user_message or "計算中にエラーが発生しました"
        super().__init__(self.message)


class ValidationError(LabError):
    """
    入力検証エラー

    検証エラーはユーザーにも詳細を伝えるため、messageとuser_messageは同じ内容にします。
    """

    def __init__(self, message: str):
        super().__init__(message, message)


class StoreError(LabError):
    """結果キャッシュ（SQLite）の操作エラー"""

    def __init__(self, message: str):
        super().__init__(message, "結果キャッシュの操作中にエラーが発生しました")


# --- 平坦曲面 ---


class GeometryError(LabError):
    """曲面構成の幾何エラー"""

    def __init__(self, message: str):
        super().__init__(message, "曲面の構成に失敗しました")


class MismatchedEdge(GeometryError):
    """貼り合わせる辺ベクトルが一致しない"""


class Disconnected(GeometryError):
    """貼り合わせ結果が連結でない"""


class DegeneratePolygon(GeometryError):
    """多角形が単純でない、または向きが負"""


class NonPositiveAngle(GeometryError):
    """錐角がπの正の整数倍でない"""


class HolonomyObstruction(GeometryError):
    """二重被覆への持ち上げが閉じない、またはハット像が0になる"""


class UnknownEdge(GeometryError):
    """存在しない辺を参照した"""


class UnsupportedSurface(GeometryError):
    """この操作が対応していない曲面形状"""


class BasisDeficiency(GeometryError):
    """ハット基底の独立な元が層の次元に足りない"""


# --- 風の木テーブル ---


class TableError(LabError):
    """テーブル検証・生成のエラー"""

    def __init__(self, message: str):
        super().__init__(message, "テーブルが不正です")


class Overlap(TableError):
    """障害物同士（または平行移動像）が重なっている"""

    def __init__(self, i: int, j: int, message: Optional[str] = None):
        self.i = i
        self.j = j
        super().__init__(message or f"obstacles {i} and {j} overlap")


class DisconnectedComplement(TableError):
    """障害物の補集合が連結でない"""


class NonRectilinear(TableError):
    """障害物の辺が軸に平行でない"""


class SamplingExhausted(TableError):
    """棄却サンプリングの上限回数に達した"""


# --- 軌道シミュレーション ---


class SimulationError(LabError):
    """軌道追跡のエラー"""

    def __init__(self, message: str):
        super().__init__(message, "軌道の追跡に失敗しました")


class CornerGraze(SimulationError):
    """
    障害物の角へ近づきすぎた

    diffuse から送出される場合は partial に途中までの系列を保持します。
    """

    def __init__(self, message: str, partial: Any = None):
        self.partial = partial
        super().__init__(message)


class NoProgress(SimulationError):
    """ステップ長が閾値未満（数値的停滞）"""


class InsufficientData(SimulationError):
    """回帰に必要なチェックポイントが足りない"""


class TooManyExclusions(SimulationError):
    """低信頼の方向が多すぎる"""

    def __init__(self, message: str, excluded: int = 0, total: int = 0):
        self.excluded = excluded
        self.total = total
        super().__init__(message)


class SingularityHit(SimulationError):
    """測地線が錐点の近傍に入った"""


class NotPeriodic(SimulationError):
    """周期方向ではない（分離線が閉じない）"""


# --- Rauzy誘導 ---


class InductionError(LabError):
    """Rauzy-Veech誘導のエラー"""

    def __init__(self, message: str):
        super().__init__(message, "リャプノフ指数の計算に失敗しました")


class NotInCatalog(InductionError):
    """カタログにない層"""


class LengthTie(InductionError):
    """最後の区間長が一致した（サドル接続）"""


class Reducible(InductionError):
    """一般化置換が既約でない"""


class NonConvergence(InductionError):
    """バッチ平均が収束しない"""


# --- 族の方程式 ---


class EquationError(LabError):
    """周期座標の方程式系のエラー"""

    def __init__(self, message: str):
        super().__init__(message, "方程式系の処理に失敗しました")


class LabelMismatch(EquationError):
    """周期ベクトルのラベルが方程式系と一致しない"""


class DegeneratingCylinder(EquationError):
    """変形でシリンダーの幅が0以下になる"""
