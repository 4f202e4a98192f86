"""Kernel backend selection.

The compiled extension is used when it imports; set ``BFR_PURE_PYTHON=1`` to
force the pure-Python kernels.
"""
import logging
import os

log = logging.getLogger(__name__)

from . import _pykernels as python_kernels  # noqa: E402

compiled_kernels = None
if os.environ.get("BFR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_kernels  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        log.debug("compiled kernels unavailable, using pure Python")

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "compiled" if compiled_kernels is not None else "python"
