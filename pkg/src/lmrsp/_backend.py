"""Pick the compiled slot loops when available, else the pure-Python twin."""
import os

from . import _pykernel

python_kernel = _pykernel
compiled_kernel = None

try:
    from . import _kernel as compiled_kernel
except ImportError:  # extension not built
    compiled_kernel = None

if compiled_kernel is not None and os.environ.get("LMRSP_PURE_PYTHON", "") not in ("1", "true"):
    kernel = compiled_kernel
    BACKEND = "cython"
else:
    kernel = python_kernel
    BACKEND = "python"


def get_kernel(name: str | None = None):
    """Kernel module by name ("cython" / "python"); None gives the default."""
    if name is None:
        return kernel
    if name == "python":
        return python_kernel
    if name == "cython":
        if compiled_kernel is None:
            raise RuntimeError("compiled kernel is not built; run `pip install -e .`")
        return compiled_kernel
    raise ValueError(f"unknown backend {name!r}")
