"""
風の木モデルの拡散率とリャプノフ指数の数値実験ツールキット
"""

__version__ = "1.0.0"
