"""
入力値の検証モジュール
CLI・設定ファイルから受け取る族指定や層指定の検証レイヤー
"""

import re
from typing import List, Tuple

from .exceptions import ValidationError


class InputValidator:
    """入力値の検証クラス"""

    # 定数定義
    MAX_OBSTACLES = 12
    MAX_CONCAVE = 8
    MAX_WORKERS = 64
    MIN_DIRECTIONS = 2
    FAMILY_PATTERN = re.compile(r"^\s*n\s*=\s*(\d+)\s*(?:,\s*k\s*=\s*(.*))?$")
    STRATUM_TOKEN = re.compile(r"^(-?\d+)(?:\^(\d+))?$")

    @staticmethod
    def parse_family(text: str) -> Tuple[int, Tuple[int, ...]]:
        """
        族指定文字列 "n=2,k=1,2" を解析

        k を省略した場合は長方形のみの族（k_i = 0）とみなします。

        Args:
            text: 族指定文字列

        Returns:
            (n, k) のタプル

        Raises:
            ValidationError: 形式が不正な場合
        """
        if not text:
            raise ValidationError("族の指定が空です")

        match = InputValidator.FAMILY_PATTERN.match(text)
        if match is None:
            raise ValidationError(f"族の指定形式が不正です: {text!r}（例: n=2,k=1,2）")

        n = int(match.group(1))
        raw_k = match.group(2)
        if raw_k is None or not raw_k.strip():
            k: Tuple[int, ...] = (0,) * n
        else:
            try:
                k = tuple(int(part) for part in raw_k.split(","))
            except ValueError:
                raise ValidationError(f"k は整数のカンマ区切りである必要があります: {raw_k!r}")

        InputValidator.validate_family(n, k)
        return n, k

    @staticmethod
    def validate_family(n: int, k: Tuple[int, ...]) -> None:
        """
        (n, k) の検証

        Raises:
            ValidationError: 障害物数・凹角数が範囲外の場合
        """
        if n < 1:
            raise ValidationError("障害物の数 n は1以上である必要があります")
        if n > InputValidator.MAX_OBSTACLES:
            raise ValidationError(f"障害物の数 n は{InputValidator.MAX_OBSTACLES}以下にしてください")
        if len(k) != n:
            raise ValidationError(f"k の個数 ({len(k)}) が n ({n}) と一致しません")
        for value in k:
            if value < 0:
                raise ValidationError("凹角数 k_i は0以上である必要があります")
            if value > InputValidator.MAX_CONCAVE:
                raise ValidationError(f"凹角数 k_i は{InputValidator.MAX_CONCAVE}以下にしてください")

    @staticmethod
    def stratum_kind(text: str) -> Tuple[str, str]:
        """
        先頭の Q / H から層の種類を判定

        "H(2)" は向きづけ可能な層、"Q(1^4)" や接頭辞なしは二次微分の層です。

        Returns:
            (種類, 接頭辞を除いた文字列) のタプル
        """
        body = (text or "").strip()
        if body[:1] in ("H", "h"):
            return "abelian", body[1:]
        if body[:1] in ("Q", "q"):
            return "quadratic", body[1:]
        return "quadratic", body

    @staticmethod
    def parse_stratum(text: str, kind: str = "quadratic") -> List[int]:
        """
        層指定文字列 "1^8", "1^9,-1" などを重複度のリストに展開

        区切りはカンマまたは空白です。kind が "abelian" なら重複度は0以上で和は偶数。

        Raises:
            ValidationError: 形式が不正な場合
        """
        if not text or not text.strip():
            raise ValidationError("層の指定が空です")

        lowest = 0 if kind == "abelian" else -1
        multiplicities: List[int] = []
        for token in re.split(r"[,\s]+", text.strip().strip("()")):
            if not token:
                continue
            match = InputValidator.STRATUM_TOKEN.match(token)
            if match is None:
                raise ValidationError(f"層の指定形式が不正です: {token!r}（例: 1^8,-1^2）")
            value = int(match.group(1))
            count = int(match.group(2) or 1)
            if value < lowest:
                raise ValidationError(f"重複度は{lowest}以上である必要があります")
            multiplicities.extend([value] * count)

        if kind == "abelian":
            if sum(multiplicities) % 2 != 0:
                raise ValidationError("重複度の和は偶数である必要があります（2g-2）")
        elif sum(multiplicities) % 4 != 0:
            raise ValidationError("重複度の和は4の倍数である必要があります（4g-4）")
        return sorted(multiplicities, reverse=True)

    @staticmethod
    def validate_positive(name: str, value: float) -> float:
        """
        正の値であることの検証

        Raises:
            ValidationError: 0以下の場合
        """
        if value is None or value <= 0:
            raise ValidationError(f"{name} は正の値である必要があります")
        return value

    @staticmethod
    def validate_workers(workers: int) -> int:
        """ワーカー数の検証と制限"""
        if not isinstance(workers, int) or workers <= 0:
            raise ValidationError("workers は正の整数である必要があります")
        return min(workers, InputValidator.MAX_WORKERS)
