"""Select the compiled kernels when available, else the numpy fallback.

Set ``RAYCLASS_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels

NAME = "numpy"
_impl = _kernels

if os.environ.get("RAYCLASS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        NAME = "cython"
    except ImportError:  # extension not built
        pass

cell_codes = _impl.cell_codes
scan_first_crossings = _impl.scan_first_crossings
adam_update = _impl.adam_update
