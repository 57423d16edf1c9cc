"""
族の周期座標の方程式系

展開曲面の周期ベクトルに対して、族 B_n(k_1, ..., k_n) を局所的に定める
実方程式と複素方程式を組み立て、所属判定とシリンダー変形を行う。
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (
    DegeneratingCylinder,
    LabelMismatch,
    UnsupportedSurface,
    ValidationError,
)
from .flat import HalfTranslationSurface, HomologyBasis, PeriodVector, periods
from .surface_flow import SIDE_TOL, CylinderDecomposition
from .windtree import FamilySpec, side_labels

logger = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-12


@dataclass(frozen=True)
class PeriodLabelSet:
    """
    周期座標のラベル

    順序は展開曲面の基底と同じ: a1, b1, a2, b2, d_i, 障害物の辺, gamma_i。
    ラベル数は層の複素次元 6n + 2p に等しい。
    """

    spec: FamilySpec
    labels: Tuple[str, ...]

    @classmethod
    def for_spec(cls, spec: FamilySpec) -> "PeriodLabelSet":
        labels = ["a1", "b1", "a2", "b2"]
        labels.extend(f"d_{i}" for i in range(1, spec.n))
        labels.extend(label for label, _, _, _ in side_labels(spec))
        labels.extend(f"gamma_{i}" for i in range(1, spec.n))
        return cls(spec, tuple(labels))

    @property
    def hat_labels(self) -> Dict[str, str]:
        """ラベル → 二重被覆上のハット類の名前"""
        return {label: f"hat_{label}" for label in self.labels}

    def __len__(self) -> int:
        return len(self.labels)

    def check(self, labels: Iterable[str]) -> None:
        """
        Raises:
            LabelMismatch: ラベルの並びが一致しない場合
        """
        given = tuple(labels)
        if given != self.labels:
            missing = sorted(set(self.labels) - set(given))
            extra = sorted(set(given) - set(self.labels))
            raise LabelMismatch(
                f"labels do not match family {self.spec}: missing {missing}, unexpected {extra}"
            )


@dataclass(frozen=True)
class EquationRow:
    """
    1本の方程式

    kind が "real" のとき Re(Σ c_l x_l) = 0、"complex" のとき
    Σ c_l x_l + Σ e_l conj(x_l) = 0 を表す（c は linear、e は conjugate）。
    """

    name: str
    group: int
    kind: str
    linear: Dict[str, complex] = field(hash=False)
    conjugate: Dict[str, complex] = field(default_factory=dict, hash=False)

    def value(self, values: Dict[str, complex]) -> complex:
        total = sum(c * values[label] for label, c in self.linear.items())
        total += sum(e * values[label].conjugate() for label, e in self.conjugate.items())
        return complex(total)

    def residual(self, values: Dict[str, complex]) -> float:
        value = self.value(values)
        return abs(value.real) if self.kind == "real" else abs(value)

    def functionals(self, labels: Sequence[str]) -> np.ndarray:
        """(Re x_1, Im x_1, Re x_2, ...) に対する実線形汎関数（実方程式は1行、複素方程式は2行）"""
        index = {label: i for i, label in enumerate(labels)}
        re_row = np.zeros(2 * len(labels))
        im_row = np.zeros(2 * len(labels))
        for label, c in self.linear.items():
            i = 2 * index[label]
            re_row[i] += c.real
            re_row[i + 1] -= c.imag
            im_row[i] += c.imag
            im_row[i + 1] += c.real
        for label, e in self.conjugate.items():
            i = 2 * index[label]
            re_row[i] += e.real
            re_row[i + 1] += e.imag
            im_row[i] += e.imag
            im_row[i + 1] -= e.real
        if self.kind == "real":
            return re_row[np.newaxis, :]
        return np.vstack([re_row, im_row])

    def to_dict(self) -> Dict:
        def encode(coefficients: Dict[str, complex]) -> Dict[str, List[float]]:
            return {label: [c.real, c.imag] for label, c in coefficients.items()}

        return {
            "name": self.name,
            "group": self.group,
            "kind": self.kind,
            "linear": encode(self.linear),
            "conjugate": encode(self.conjugate),
        }


@dataclass(frozen=True)
class MembershipResult:
    ok: bool
    residuals: Dict[str, float] = field(hash=False)
    tolerance: float = MEMBERSHIP_TOL

    @property
    def violated(self) -> List[str]:
        return [name for name, value in self.residuals.items() if value >= self.tolerance]


@dataclass(frozen=True)
class FamilyEquationSystem:
    labels: PeriodLabelSet
    rows: Tuple[EquationRow, ...]

    @property
    def real_rows(self) -> List[EquationRow]:
        return [row for row in self.rows if row.kind == "real"]

    @property
    def complex_rows(self) -> List[EquationRow]:
        return [row for row in self.rows if row.kind == "complex"]

    @property
    def group_one(self) -> List[EquationRow]:
        return [row for row in self.rows if row.group == 1]

    @property
    def group_two(self) -> List[EquationRow]:
        return [row for row in self.rows if row.group == 2]

    def row(self, name: str) -> EquationRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def matrix(self) -> np.ndarray:
        return np.vstack([row.functionals(self.labels.labels) for row in self.rows])

    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.matrix()))

    def solution_dimension(self) -> int:
        """解空間の実次元"""
        return 2 * len(self.labels) - self.rank()

    def to_json(self) -> str:
        payload = {
            "family": str(self.labels.spec),
            "labels": list(self.labels.labels),
            "rows": [row.to_dict() for row in self.rows],
        }
        return json.dumps(payload, indent=2)


def _sum_row_name(kind: str, i: int, count: int) -> str:
    if count == 2:
        return f"{kind}_{i}_1 = -{kind}_{i}_2"
    return f"sum {kind}_{i}"


def build_equations(spec: FamilySpec) -> FamilyEquationSystem:
    """
    族 B_n(k) を定める方程式系

    第1群（実方程式と d_i = γ_i - conj γ_i）と第2群（a1 = a2, b1 = -b2,
    最後の障害物以外の辺の和 = 0）から成る。実方程式は 2n + 2p + 3 本、
    複素方程式は 3n - 1 本で、解空間の実次元は 4n + 2p - 1。
    """
    labels = PeriodLabelSet.for_spec(spec)
    rows: List[EquationRow] = [
        EquationRow("Im a1 = 0", 1, "real", {"a1": -1j}),
        EquationRow("Re b1 = 0", 1, "real", {"b1": 1}),
        EquationRow("Re a1 = Im b1", 1, "real", {"a1": 1, "b1": 1j}),
    ]
    for i, concave in enumerate(spec.k, start=1):
        for j in range(1, 2 + concave):
            rows.append(EquationRow(f"Re alpha_{i}_{j} = 0", 1, "real", {f"alpha_{i}_{j}": 1}))
        for j in range(1, 2 + concave):
            rows.append(EquationRow(f"Im beta_{i}_{j} = 0", 1, "real", {f"beta_{i}_{j}": -1j}))
    for i in range(1, spec.n):
        rows.append(
            EquationRow(
                f"d_{i} = gamma_{i} - conj gamma_{i}",
                1,
                "complex",
                {f"d_{i}": 1, f"gamma_{i}": -1},
                {f"gamma_{i}": 1},
            )
        )

    rows.append(EquationRow("a1 = a2", 2, "complex", {"a1": 1, "a2": -1}))
    rows.append(EquationRow("b1 = -b2", 2, "complex", {"b1": 1, "b2": 1}))
    for i in range(1, spec.n):
        count = 2 + spec.k[i - 1]
        for kind in ("alpha", "beta"):
            rows.append(
                EquationRow(
                    _sum_row_name(kind, i, count),
                    2,
                    "complex",
                    {f"{kind}_{i}_{j}": 1 for j in range(1, count + 1)},
                )
            )

    system = FamilyEquationSystem(labels, tuple(rows))
    logger.debug(
        "equations for %s: %d real, %d complex rows",
        spec,
        len(system.real_rows),
        len(system.complex_rows),
    )
    return system


def check_membership(
    values: PeriodVector, system: FamilyEquationSystem, tol: float = MEMBERSHIP_TOL
) -> MembershipResult:
    """
    周期ベクトルが方程式系を満たすか

    許容誤差は周期の最大絶対値に対する相対値です。

    Raises:
        LabelMismatch: ラベルが方程式系と一致しない場合
    """
    system.labels.check(values.labels)
    lookup = values.as_dict()
    scale = max(1.0, float(np.max(np.abs(values.values)))) if len(values.values) else 1.0
    threshold = tol * scale
    residuals = {row.name: row.residual(lookup) for row in system.rows}
    ok = all(value < threshold for value in residuals.values())
    return MembershipResult(ok, residuals, threshold)


def cylinder_deform(
    surface: HalfTranslationSurface,
    basis: HomologyBasis,
    decomposition: CylinderDecomposition,
    subset: Sequence[int],
    delta: complex,
    base: Optional[PeriodVector] = None,
) -> PeriodVector:
    """
    選んだシリンダーを δ だけ変形したときの周期

    シリンダーを横切る辺はその高さの割合に応じて δ を受け取るので、
    シリンダーを横断する類はちょうど ⟨η, γ⟩·δ だけ動く。δ は曲面のチャートで与え、
    回転後の虚部がシリンダーの幅を増減させる。

    Args:
        surface: 曲面
        basis: 周期を取る基底
        decomposition: detect_cylinders の結果
        subset: 変形するシリンダーの番号
        delta: 変形量
        base: 変形前の周期（省略時は surface から計算）

    Raises:
        ValidationError: シリンダー番号が範囲外の場合
        DegeneratingCylinder: 幅が0以下になる場合
        UnsupportedSurface: 類の辺が複数のシリンダーにまたがる多角形にある場合
    """
    chosen = set(subset)
    for index in chosen:
        if not 0 <= index < len(decomposition.cylinders):
            raise ValidationError(f"cylinder index {index} out of range")

    rotation = decomposition.rotation
    turned = rotation * complex(delta)
    for index in chosen:
        width = decomposition.cylinders[index].width
        if width + turned.imag <= 0:
            raise DegeneratingCylinder(
                f"cylinder {index} of width {width:.6g} degenerates under {delta}"
            )

    current = base if base is not None else periods(surface, basis)
    updates: Dict[str, complex] = {}
    for label in basis.labels:
        shift = 0j
        for poly, j, orientation in basis.path(label):
            if poly in decomposition.split:
                raise UnsupportedSurface(f"polygon {poly} spans several cylinders")
            located = decomposition.cell_heights.get(poly)
            if located is None or located[0] not in chosen:
                continue
            height = (rotation * orientation * surface.edge_vector((poly, j))).imag
            if abs(height) <= SIDE_TOL:
                continue
            width = decomposition.cylinders[located[0]].width
            shift += (height / width) * complex(delta)
        if shift:
            updates[label] = current[label] + shift
    logger.debug("cylinder deformation %s by %s moves %s", sorted(chosen), delta, sorted(updates))
    return current.replace(updates)
