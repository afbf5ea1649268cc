"""Select the compiled kernel module when it is importable.

Set ``RF_PURE_PYTHON=1`` to force the numpy fallback.
"""

import logging
import os

logger = logging.getLogger(__name__)

if os.environ.get("RF_PURE_PYTHON", "").strip() not in ("", "0"):
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels

        BACKEND = "cython"
    except ImportError as exc:  # extension not built
        logger.debug("compiled kernels unavailable (%s); using numpy fallback", exc)
        from . import _kernels_py as kernels

        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
