"""Select the compiled symmetric-function kernels, falling back to numpy."""
import os

BACKEND = "python"

if not os.environ.get("CONFCURV_PURE_PYTHON"):
    try:
        from ._sigma_ext import esf_batch, esf_deleted_batch
        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._sigma_py import esf_batch, esf_deleted_batch

__all__ = ["BACKEND", "esf_batch", "esf_deleted_batch"]
