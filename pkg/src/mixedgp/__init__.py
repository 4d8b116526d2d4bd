"""Gaussian-process emulation for computer experiments whose inputs mix
quantitative (continuous) and qualitative (categorical) factors.

Submodules are imported lazily so that entry points can configure the
numerical environment (BLAS thread pinning) before NumPy loads.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "core",
    "kernels",
    "linalg",
    "inference",
    "predict",
    "lezgp",
    "bench",
    "errors",
    "service",
    "cli",
)

__all__ = list(_SUBMODULES) + ["__version__"]


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(__all__)
