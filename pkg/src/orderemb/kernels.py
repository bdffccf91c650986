"""Backend selection for the hot kernels.

Prefers the compiled ``orderemb._speedups`` extension; falls back to the
pure numpy implementation when the extension is absent or when the
``ORDEREMB_PURE_PYTHON`` environment variable is set (any non-empty value).
Both backends expose identical signatures and agree numerically to within
summation-order rounding; ``benchmarks/bench_kernels.py`` compares them.
"""

import os

if os.environ.get("ORDEREMB_PURE_PYTHON"):
    from orderemb import _kernels_py as _impl
else:
    try:
        from orderemb import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        from orderemb import _kernels_py as _impl

BACKEND = _impl.BACKEND
penalty_matrix = _impl.penalty_matrix
penalty_matrix_backward = _impl.penalty_matrix_backward
gru_forward = _impl.gru_forward
gru_backward = _impl.gru_backward
adam_update = _impl.adam_update

__all__ = [
    "BACKEND",
    "penalty_matrix",
    "penalty_matrix_backward",
    "gru_forward",
    "gru_backward",
    "adam_update",
]
