"""Kernel backend selection: compiled extension if built, else pure Python."""

try:
    from ._kernels import BACKEND, iadd_scaled, mul_terms  # type: ignore[attr-defined]
except ImportError:  # extension not built; the fallback is always available
    from ._kernels_py import BACKEND, iadd_scaled, mul_terms

__all__ = ["BACKEND", "mul_terms", "iadd_scaled"]
