"""Pick the trial kernels: compiled when available, pure Python otherwise.

Set ``DFRELAY_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("DFRELAY_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as kernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:
        from . import _pykernels as kernels

BACKEND = kernels.BACKEND
