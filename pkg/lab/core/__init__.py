"""
平坦曲面・風の木テーブル・誘導法の計算コア
"""
