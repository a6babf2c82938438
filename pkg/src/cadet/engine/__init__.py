def _tune_runtime():
    # keep large numpy temporaries on the heap: per-step mmap/munmap churn
    # (page zeroing) otherwise dominates training time
    try:
        import ctypes

        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-3, 1 << 30)  # M_MMAP_THRESHOLD
        libc.mallopt(-1, 1 << 30)  # M_TRIM_THRESHOLD
    except Exception:
        pass
    # single-threaded BLAS: the matrices here are far too small for the
    # synchronization cost of threaded GEMM
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(1, "blas")
    except Exception:
        pass


_tune_runtime()

from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckError, grad_check
from .optim import SgdMomentum, cosine_anneal_lr
from .rng import Rng
from .tensor import (
    Parameter,
    Tensor,
    autograd_off,
    concat,
    default_dtype,
    layer_norm,
    set_debug_checks,
    set_default_dtype,
)

__all__ = [
    "GradCheckError",
    "Parameter",
    "Rng",
    "SgdMomentum",
    "Tensor",
    "autograd_off",
    "concat",
    "cosine_anneal_lr",
    "default_dtype",
    "grad_check",
    "layer_norm",
    "load_checkpoint",
    "save_checkpoint",
    "set_debug_checks",
    "set_default_dtype",
]
