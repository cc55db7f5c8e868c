"""Kernel backend selection.

The compiled extension is used when importable; the pure-numpy fallback
otherwise.  Set EFGFOM_PURE_PYTHON=1 to force the fallback (used by the
benchmark and by tests comparing the two backends).
"""

import os

if os.environ.get("EFGFOM_PURE_PYTHON") == "1":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
tree_conjugate_entropy = _impl.tree_conjugate_entropy
tree_linear_max = _impl.tree_linear_max
