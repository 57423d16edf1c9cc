"""
lab/core/rauzy.pyのユニットテスト
一般化置換・Rauzy 移動・指数推定・カタログのテスト
"""

import logging
import sys
from pathlib import Path

import numpy as np
import pytest

# プロジェクトルートをパスに追加
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from lab.core.exceptions import (  # noqa: E402
    LengthTie,
    NonConvergence,
    NotInCatalog,
    Reducible,
    ValidationError,
)
from lab.core.flat import StratumSignature, stratum_of  # noqa: E402
from lab.core.rauzy import (  # noqa: E402
    BATCHES,
    BOTTOM,
    PILLOWCASE,
    TOP,
    TORUS,
    BatchMeans,
    LinearInvolution,
    ZorichState,
    balanced_lengths,
    catalog,
    certify,
    estimate_top_exponent,
    full_tours,
    occurrence_signs,
    rauzy_move,
    rauzy_step,
    run_chain,
    stratum_representative,
    summarize,
    suspension,
    zorich_step,
)

POLES = StratumSignature((-1, -1, -1, -1))
TORUS_STRATUM = StratumSignature((0,), "abelian")
# 探索で見つかった Q(1^4) の代表元
GENUS_TWO = "0 1 2 3 4 1 5 / 6 3 0 5 2 6 4"


class TestLinearInvolution:
    """一般化置換のテスト"""

    def test_parse_and_label(self):
        """文字列表記"""
        gp = LinearInvolution.parse(PILLOWCASE)
        assert gp.top == (0, 0, 1)
        assert gp.bottom == (1, 2, 2)
        assert gp.d == 3
        assert gp.label() == PILLOWCASE

    def test_flips(self):
        """同じ段に2回現れる文字"""
        gp = LinearInvolution.parse(PILLOWCASE)
        assert gp.flips(TOP) == {0}
        assert gp.flips(BOTTOM) == {2}
        assert not gp.is_abelian
        assert LinearInvolution.parse("0 1 / 1 0").is_abelian

    def test_letter_twice(self):
        """各文字はちょうど2回"""
        with pytest.raises(ValidationError, match="exactly twice"):
            LinearInvolution.parse("0 1 / 1")

    def test_missing_separator(self):
        """段の区切りがない"""
        with pytest.raises(ValidationError, match="top / bottom"):
            LinearInvolution.parse("0 0 1 1")

    def test_empty_row(self):
        """空の段"""
        with pytest.raises(Reducible):
            LinearInvolution((0, 0), ())

    def test_length_count(self):
        """長さの個数"""
        with pytest.raises(ValidationError, match="lengths"):
            LinearInvolution.parse(PILLOWCASE, (0.5, 0.5))

    def test_relabeled(self):
        """初出順に文字を振り直す"""
        gp = LinearInvolution((2, 2, 0), (0, 1, 1), (0.1, 0.2, 0.3))
        relabeled = gp.relabeled()
        assert relabeled.label() == PILLOWCASE
        assert relabeled.lengths == (0.3, 0.1, 0.2)

    def test_occurrence_signs(self):
        """同じ段の2回目の出現は -1"""
        signs = occurrence_signs((0, 0, 1), (1, 2, 2))
        assert signs == {
            (TOP, 0): 1,
            (TOP, 1): -1,
            (TOP, 2): 1,
            (BOTTOM, 0): 1,
            (BOTTOM, 1): 1,
            (BOTTOM, 2): -1,
        }

    def test_balanced_lengths(self):
        """上段と下段の合計が等しい正の長さ"""
        gp = LinearInvolution.parse(PILLOWCASE)
        lengths = balanced_lengths(gp, np.random.default_rng(3))
        top, bottom = gp.with_lengths(lengths).row_sums()
        assert top == pytest.approx(bottom, rel=1e-12)
        assert all(x > 0 for x in lengths)

    def test_balanced_needs_flips_in_both_rows(self):
        """フリップが片方の段だけ"""
        gp = LinearInvolution((0, 0, 1, 2), (1, 2))
        with pytest.raises(Reducible):
            balanced_lengths(gp, np.random.default_rng(0))


class TestRauzyMove:
    """Rauzy 移動のテスト"""

    def test_top_wins(self):
        """上段の最後の区間が長い"""
        gp = LinearInvolution.parse(PILLOWCASE, (0.3, 0.5, 0.3))
        move = rauzy_move(gp)
        assert move.kind == "top"
        assert (move.winner, move.loser) == (1, 2)
        assert move.result.top == (0, 0, 1)
        assert move.result.bottom == (1, 2, 2)
        assert move.result.lengths == pytest.approx((0.3, 0.2, 0.3))

    def test_matrix_recovers_lengths(self):
        """旧長さ = 行列 @ 新長さ、行列式は1"""
        gp = LinearInvolution.parse(PILLOWCASE, (0.3, 0.5, 0.3))
        move = rauzy_move(gp)
        assert move.matrix @ np.array(move.result.lengths) == pytest.approx(np.array(gp.lengths))
        assert round(np.linalg.det(move.matrix)) == 1

    def test_balance_preserved(self):
        """移動の後も上段と下段の合計は等しい"""
        gp = LinearInvolution.parse(PILLOWCASE)
        gp = gp.with_lengths(balanced_lengths(gp, np.random.default_rng(1)))
        for _ in range(20):
            gp = rauzy_move(gp).result
            top, bottom = gp.row_sums()
            assert top == pytest.approx(bottom, rel=1e-9)

    def test_length_tie(self):
        """最後の区間長が一致"""
        with pytest.raises(LengthTie):
            rauzy_move(LinearInvolution.parse(PILLOWCASE, (0.4, 0.4, 0.4)))

    def test_same_last_letter(self):
        """両段が同じ文字で終わる"""
        with pytest.raises(Reducible, match="ends both rows"):
            rauzy_move(LinearInvolution((0, 1), (0, 1), (0.5, 0.5)))


class TestZorich:
    """加速誘導と指数推定のテスト"""

    def test_rauzy_step_updates_frames(self):
        """敗者の行に勝者の行を加える"""
        gp = LinearInvolution.parse(PILLOWCASE, (0.3, 0.5, 0.3))
        state = ZorichState.start(gp, np.random.default_rng(0))
        after = rauzy_step(state)
        assert after.gp == rauzy_move(state.gp).result
        assert after.last_kind == "top"
        assert after.step_count == 1
        expected = state.frame_minus[2] + state.frame_minus[1]
        assert after.frame_minus[2] == pytest.approx(expected)
        assert after.frame_minus[0] == pytest.approx(state.frame_minus[0])

    def test_zorich_step_counts_once(self):
        """同じ勝者の連続は1ステップ"""
        state = ZorichState.start(LinearInvolution.parse(TORUS), np.random.default_rng(0))
        after = zorich_step(state)
        assert after.step_count == 1
        assert after.clock > state.clock

    def test_zorich_step_renormalizes(self):
        """毎ステップ総長2に戻し、上段と下段の合計を揃える"""
        state = ZorichState.start(LinearInvolution.parse(PILLOWCASE), np.random.default_rng(5))
        for _ in range(50):
            before = state.clock
            state = zorich_step(state)
            top, bottom = state.gp.row_sums()
            assert state.total_length == pytest.approx(2.0)
            assert top == pytest.approx(bottom, rel=1e-12)
            assert state.clock > before

    def test_torus_tours_are_division(self):
        """トーラスでは巡回の回数が連分数の部分商"""
        gp = LinearInvolution.parse(TORUS, (1.0, 3.5))
        state = ZorichState.start(gp, np.random.default_rng(0))
        after, tours = full_tours(state)
        assert tours == 3
        assert after.gp.lengths == pytest.approx((2 / 9, 1 / 9))
        expected = state.frame_minus[0] + 3 * state.frame_minus[1]
        assert after.frame_minus[0] == pytest.approx(expected)
        assert after.frame_plus[0] == pytest.approx(state.frame_plus[0] + 3 * state.frame_plus[1])

    def test_tours_match_single_moves(self):
        """割り算でまとめた巡回は1回ずつの移動と同じ枠を与える"""
        gp = LinearInvolution.parse(PILLOWCASE, (0.1, 0.93, 0.1))
        state = ZorichState.start(gp, np.random.default_rng(1))
        after, tours = full_tours(state)
        assert tours == 4

        single = state
        for _ in range(2 * tours):
            single = rauzy_step(single)
        assert after.gp.label() == single.gp.label()
        assert after.gp.lengths == pytest.approx(single.gp.lengths)
        assert after.frame_plus == pytest.approx(single.frame_plus)
        assert after.frame_minus == pytest.approx(single.frame_minus)
        assert after.step_count == single.step_count

    def test_flip_winner_has_no_tours(self):
        """勝者がフリップなら巡回はない"""
        gp = LinearInvolution((0, 1, 1), (2, 2, 3, 3, 0), (0.3, 0.5, 0.2, 0.3))
        state = ZorichState.start(gp, np.random.default_rng(0))
        after, tours = full_tours(state)
        assert tours == 0
        assert after is state

    def test_too_few_iterations(self):
        """バッチに足りない反復回数"""
        with pytest.raises(ValidationError, match="iterations"):
            run_chain(LinearInvolution.parse(PILLOWCASE), 100, np.random.default_rng(0))

    def test_torus_exponent(self):
        """トーラスでは符号付きコサイクルも長さのコサイクルと同じ成長"""
        batches = run_chain(LinearInvolution.parse(TORUS), 2000, np.random.default_rng(4))
        assert len(batches.clock) == BATCHES
        assert sum(batches.plus) / sum(batches.clock) == pytest.approx(1.0, abs=0.02)

    def test_length_cocycle_normalization(self):
        """長さのコサイクルの最大指数は1"""
        batches = run_chain(LinearInvolution.parse(PILLOWCASE), 5000, np.random.default_rng(2))
        assert sum(batches.minus) / sum(batches.clock) == pytest.approx(1.0, abs=0.05)

    def test_summarize(self):
        """バッチが揃っていれば標準誤差は0"""
        batches = BatchMeans((2.0,) * BATCHES, (1.0,) * BATCHES, (2.0,) * BATCHES)
        report = summarize("Q(1^4)", batches, 1000)
        assert report.lambda_plus_top == pytest.approx(0.5)
        assert report.lambda_minus_top == pytest.approx(1.0)
        assert report.stderr == 0.0

    def test_nonconvergence(self):
        """1つのバッチだけ大きく外れる"""
        plus = tuple(1.0 + 0.01 * (i % 2) for i in range(BATCHES - 1)) + (50.0,)
        batches = BatchMeans((1.0,) * BATCHES, plus, (1.0,) * BATCHES)
        with pytest.raises(NonConvergence, match="batch 19"):
            summarize("Q(1^4)", batches, 1000)

    def test_merged(self):
        """連鎖のバッチを連結"""
        first = BatchMeans((1.0,), (0.5,), (1.0,))
        second = BatchMeans((2.0,), (1.0,), (2.0,))
        assert first.merged(second) == BatchMeans((1.0, 2.0), (0.5, 1.0), (1.0, 2.0))

    def test_estimate_merges_chains(self, mocker, caplog):
        """連鎖ごとのバッチをまとめ、推奨回数未満では警告"""
        batches = BatchMeans((1.0,) * BATCHES, (0.5,) * BATCHES, (1.0,) * BATCHES)
        chain = mocker.patch("lab.core.rauzy.run_chain", return_value=batches)
        with caplog.at_level(logging.WARNING, logger="lab.core.rauzy"):
            report = estimate_top_exponent(POLES, 640, seed=1, chains=2)
        assert chain.call_count == 2
        assert "recommended" in caplog.text
        assert report.lambda_plus_top == pytest.approx(0.5)
        assert report.to_dict()["stratum"] == "Q(-1^4)"
        assert report.to_dict()["chains"] == 2


class TestLongChains:
    """2万ステップの連鎖で既知の値を確かめる"""

    @pytest.mark.timeout(300)
    def test_torus_top_exponent(self):
        """トーラスの λ+ は1"""
        report = estimate_top_exponent(TORUS_STRATUM, 20_000, seed=4)
        assert report.stratum == "H(0)"
        assert report.lambda_plus_top == pytest.approx(1.0, abs=0.01)

    @pytest.mark.timeout(300)
    @pytest.mark.parametrize("seed", range(5))
    def test_pillowcase(self, seed):
        """種数0なので H^+ の指数は0、長さの指数は1"""
        batches = run_chain(
            LinearInvolution.parse(PILLOWCASE), 20_000, np.random.default_rng(seed)
        )
        assert sum(batches.minus) / sum(batches.clock) == pytest.approx(1.0, abs=0.05)
        assert abs(sum(batches.plus) / sum(batches.clock)) < 0.05

    @pytest.mark.timeout(300)
    @pytest.mark.parametrize("seed", range(3))
    def test_genus_two(self, seed):
        """Q(1^4) の λ+ は 1/2 と 1 の間"""
        gp = LinearInvolution.parse(GENUS_TWO)
        report = summarize("Q(1^4)", run_chain(gp, 20_000, np.random.default_rng(seed)), 20_000)
        assert report.lambda_minus_top == pytest.approx(1.0, abs=0.05)
        assert 0.5 < report.lambda_plus_top < 1.0


class TestCatalog:
    """懸垂とカタログのテスト"""

    def test_pillowcase_suspension(self):
        """枕カバーの置換の懸垂は Q(-1^4)"""
        surface = suspension(LinearInvolution.parse(PILLOWCASE))
        assert stratum_of(surface).signature == POLES

    def test_pillowcase_representative(self):
        """固定の代表元"""
        gp = stratum_representative(POLES)
        assert gp.label() == PILLOWCASE
        certificate = certify(gp, POLES)
        assert certificate["genus"] == 0
        assert certificate["complex_dimension"] == 2

    def test_catalog_entries(self):
        """カタログの層"""
        entries = catalog()
        assert entries[0] == POLES
        assert StratumSignature((1,) * 8) in entries
        assert StratumSignature((1,) * 14 + (-1,) * 10) in entries
        assert len(entries) == 15

    def test_genus_two_representative(self):
        """固定の Q(1^4) の置換の懸垂"""
        certificate = certify(LinearInvolution.parse(GENUS_TWO), StratumSignature((1, 1, 1, 1)))
        assert certificate["genus"] == 2

    @pytest.mark.parametrize(
        "multiplicities, label, genus",
        [((0,), TORUS, 1), ((2,), "0 1 2 3 / 3 2 1 0", 2), ((1, 1), "0 1 2 3 4 / 4 3 2 1 0", 2)],
    )
    def test_abelian_representatives(self, multiplicities, label, genus):
        """向きづけ可能な層は回転型の置換"""
        signature = StratumSignature(multiplicities, "abelian")
        gp = stratum_representative(signature)
        assert gp.label() == label
        assert gp.is_abelian
        assert certify(gp, signature)["genus"] == genus

    def test_not_in_catalog(self):
        """カタログにない層"""
        with pytest.raises(NotInCatalog):
            stratum_representative(StratumSignature((2, 2)))

    def test_certify_mismatch(self):
        """層が一致しない代表元"""
        with pytest.raises(NotInCatalog, match="expected"):
            certify(LinearInvolution.parse(PILLOWCASE), StratumSignature((1, 1, 1, 1)))

    @pytest.mark.slow
    def test_search_first_genus_two_stratum(self, memory_store):
        """Q(1^4) の代表元を探索して保存"""
        signature = StratumSignature((1, 1, 1, 1))
        gp = stratum_representative(signature, store=memory_store)
        assert stratum_of(suspension(gp)).signature == signature
        cached = stratum_representative(signature, store=memory_store)
        assert cached.label() == gp.label()


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
